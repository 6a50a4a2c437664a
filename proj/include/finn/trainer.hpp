#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finn/datagen.hpp"
#include "finn/integrator.hpp"
#include "finn/model.hpp"
#include "finn/nn.hpp"

namespace finn::train {

/// What to do when a rollout or gradient turns non-finite: stop the run, or
/// drop that update and keep going.
enum class NanPolicy { Abort, SkipStep };

struct TrainConfig {
    int epochs = 100;
    int steps_per_epoch = 10;  // optimizer updates per epoch
    nn::AdamConfig adam;
    integrator::IntegratorConfig integ;
    std::uint64_t seed = 0;     // parameter init when the store is empty
    double grad_clip = 10.0;    // global L2 cap; <= 0 disables
    NanPolicy nan_policy = NanPolicy::Abort;
    double divergence_loss = 1e6;
    std::filesystem::path checkpoint_path;  // best-loss checkpoint, optional
    int checkpoint_every = 0;  // also snapshot every N epochs when > 0
};

/// One sparse measurement: state of `species` in control volume `cell` at
/// time `t` (t must land on the rollout's output grid).
struct Observation {
    double t = 0.0;
    std::size_t cell = 0;
    int species = 0;
    double value = 0.0;
};

struct RunRecord {
    std::vector<double> epoch_losses;  // last step loss per epoch
    int first_nan_epoch = -1;          // 0-based; -1 when never hit
    int best_epoch = -1;
    double best_loss = 0.0;
    double wall_seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

/// Closed-loop training: roll the model out from the dataset's first frame
/// across all dataset times and descend the MSE against every frame. The
/// best-loss parameters are restored into `store` before returning (and
/// written to cfg.checkpoint_path when set).
RunRecord train(const model::FinnModel& model, ad::ParamStore& store,
                const datagen::Dataset& data, const TrainConfig& cfg);

/// Same loop against scattered observations instead of dense frames. The
/// rollout grid is cfg.integ.times (must start at the time of `u0`); each
/// observation time must match a grid time.
RunRecord train_sparse(const model::FinnModel& model, ad::ParamStore& store,
                       std::span<const double> u0,
                       std::span<const Observation> obs, const TrainConfig& cfg);

}  // namespace finn::train
