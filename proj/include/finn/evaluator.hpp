#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finn/datagen.hpp"
#include "finn/integrator.hpp"
#include "finn/model.hpp"

#include "json.hpp"

namespace finn::eval {

/// Mean squared error normalized by the population variance of `target`.
/// Predicting the target mean everywhere scores exactly 1, and the score is
/// invariant under a common scale and shift of both arguments. Rejects
/// zero-variance targets.
double rmse(std::span<const double> pred, std::span<const double> target);

struct ConservationResult {
    double error = 0.0;       // |mass change - boundary - source| / |initial|
    double mass_change = 0.0; // volume-integrated, self-sourced species only
    double boundary = 0.0;    // time-integrated net boundary influx
    double source = 0.0;      // time-integrated reaction source
};

/// Rolls the model out with the flow totals integrated alongside the state
/// and closes the budget: the change in total quantity must equal what
/// crossed the boundary plus what reactions produced. Normalized by the
/// volume integral of |u0|.
ConservationResult conservation_error(const model::FinnModel& model,
                                      ad::ParamStore& store,
                                      std::span<const double> u0,
                                      const integrator::IntegratorConfig& integ);

struct EvalConfig {
    integrator::IntegratorConfig integ;  // times come from each dataset
    int query_points = 201;
    double query_min = -1.0;  // learned-function tabulation range
    double query_max = 1.0;
};

/// Closed-loop rollout of the model over one dataset's time grid; the
/// returned frames use the dataset layout. Aborts surface in `complete`.
integrator::Trajectory rollout(const model::FinnModel& model,
                               ad::ParamStore& store,
                               const datagen::Dataset& data,
                               const integrator::IntegratorConfig& integ);

std::vector<double> query_grid(double lo, double hi, int n);

/// Full report over any number of splits: per-split normalized error and
/// conservation budget (aborted rollouts become error entries instead of
/// throwing), learned-function tables for every Network/Polynomial module,
/// and the stencil weights. Deterministic key order.
nlohmann::ordered_json evaluate(const model::FinnModel& model,
                                ad::ParamStore& store,
                                const std::vector<datagen::Dataset>& splits,
                                const EvalConfig& cfg);

void write_report(const nlohmann::ordered_json& report,
                  const std::filesystem::path& path);

/// Learned-function tables from a report, one row per (module, u, value).
void export_learned_csv(const nlohmann::ordered_json& report,
                        const std::filesystem::path& path);

}  // namespace finn::eval
