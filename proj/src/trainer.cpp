#include "finn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace finn::train {

namespace {

/// Records one rollout and its scalar loss on `tape`; an invalid Var means
/// the rollout aborted before reaching the end of the time grid.
using LossFn = std::function<ad::Var(ad::Tape& tape)>;

RunRecord run_loop(const model::FinnModel& model, ad::ParamStore& store,
                   const TrainConfig& cfg, const LossFn& loss_fn) {
    if (cfg.epochs < 1 || cfg.steps_per_epoch < 1)
        throw std::invalid_argument("train: epochs and steps_per_epoch must be >= 1");
    if (store.entry_count() == 0) model.init_params(store, cfg.seed);

    RunRecord rec;
    rec.best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = store.flatten_values();
    auto t0 = std::chrono::steady_clock::now();
    auto snapshot = [&] {
        nlohmann::ordered_json meta;
        meta["best_loss"] = rec.best_loss;
        meta["best_epoch"] = rec.best_epoch;
        meta["epochs_run"] = static_cast<int>(rec.epoch_losses.size());
        nn::save_checkpoint(store, cfg.checkpoint_path, meta.dump());
    };
    auto finish = [&](bool aborted, std::string reason) {
        rec.aborted = aborted;
        rec.abort_reason = std::move(reason);
        if (std::isfinite(rec.best_loss)) store.assign_values(best_params);
        if (!cfg.checkpoint_path.empty() && std::isfinite(rec.best_loss))
            snapshot();
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        return rec;
    };

    int adam_steps = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = std::numeric_limits<double>::quiet_NaN();
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            ad::Tape tape(&store);
            ad::Var loss = loss_fn(tape);
            double lv = loss.valid() ? tape.scalar_value(loss)
                                     : std::numeric_limits<double>::quiet_NaN();
            bool diverged = std::isfinite(lv) && lv > cfg.divergence_loss;
            bool bad = !std::isfinite(lv) || diverged;
            if (!bad) epoch_loss = lv;
            if (bad && rec.first_nan_epoch < 0) rec.first_nan_epoch = epoch;
            if (bad) {
                if (cfg.nan_policy == NanPolicy::Abort) {
                    rec.epoch_losses.push_back(epoch_loss);
                    return finish(true, diverged ? "loss diverged"
                                                 : "non-finite rollout");
                }
                continue;
            }
            if (lv < rec.best_loss) {
                rec.best_loss = lv;
                rec.best_epoch = epoch;
                best_params = store.flatten_values();
            }
            store.zero_grad();
            tape.backward(loss, {}, /*free_buffers=*/true);
            if (cfg.grad_clip > 0.0) nn::clip_grad_norm(store, cfg.grad_clip);
            bool applied = nn::adam_step(store, cfg.adam, adam_steps + 1);
            if (applied) {
                ++adam_steps;
            } else {
                if (rec.first_nan_epoch < 0) rec.first_nan_epoch = epoch;
                if (cfg.nan_policy == NanPolicy::Abort) {
                    rec.epoch_losses.push_back(epoch_loss);
                    return finish(true, "non-finite gradient");
                }
            }
        }
        rec.epoch_losses.push_back(epoch_loss);
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            (epoch + 1) % cfg.checkpoint_every == 0 &&
            std::isfinite(rec.best_loss)) {
            // periodic snapshot of the current weights, mid-run safety net
            snapshot();
        }
    }
    return finish(false, "");
}

}  // namespace

RunRecord train(const model::FinnModel& model, ad::ParamStore& store,
                const datagen::Dataset& data, const TrainConfig& cfg) {
    if (data.frame_size() != model.state_size())
        throw std::invalid_argument("train: dataset does not match model grid");
    if (data.spec.nt < 2)
        throw std::invalid_argument("train: dataset needs at least two frames");
    TrainConfig local = cfg;
    local.integ.times = data.times;

    auto first = data.frame(0);
    std::vector<double> u0(first.begin(), first.end());
    double n_total = static_cast<double>(data.data.size());

    auto loss_fn = [&](ad::Tape& tape) -> ad::Var {
        ad::Var u = tape.constant(u0);
        auto rhs = [&model](ad::Tape& t, double, ad::Var x) {
            return model.rhs_recorded(t, x);
        };
        auto traj = integrator::integrate_recorded(rhs, tape, u, local.integ);
        if (!traj.complete) return {};
        ad::Var acc;
        // frame 0 is the initial condition itself; it contributes zero
        for (int j = 1; j < data.spec.nt; ++j) {
            auto target = data.frame(j);
            ad::Var diff = tape.sub(
                traj.states[static_cast<std::size_t>(j)],
                tape.constant(std::vector<double>(target.begin(), target.end())));
            ad::Var sq = tape.sum(tape.mul(diff, diff));
            acc = acc.valid() ? tape.add(acc, sq) : sq;
        }
        return tape.scale(acc, 1.0 / n_total);
    };
    return run_loop(model, store, local, loss_fn);
}

RunRecord train_sparse(const model::FinnModel& model, ad::ParamStore& store,
                       std::span<const double> u0,
                       std::span<const Observation> obs, const TrainConfig& cfg) {
    if (u0.size() != model.state_size())
        throw std::invalid_argument("train_sparse: state size mismatch");
    if (obs.empty())
        throw std::invalid_argument("train_sparse: no observations");
    cfg.integ.validate();
    const auto& times = cfg.integ.times;

    // frame index and flat state offset per observation
    std::vector<std::pair<std::size_t, int>> where(obs.size());
    std::size_t cells = model.cells();
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        if (o.species < 0 || o.species >= model.species_count() ||
            o.cell >= cells)
            throw std::invalid_argument("train_sparse: observation out of range");
        std::size_t k = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < times.size(); ++j) {
            double d = std::abs(times[j] - o.t);
            if (d < best) { best = d; k = j; }
        }
        if (best > 1e-9 * std::max(1.0, std::abs(o.t)))
            throw std::invalid_argument(
                "train_sparse: observation time off the rollout grid");
        where[i] = {k, static_cast<int>(o.species * cells + o.cell)};
    }

    std::vector<double> u0v(u0.begin(), u0.end());
    auto loss_fn = [&](ad::Tape& tape) -> ad::Var {
        ad::Var u = tape.constant(u0v);
        auto rhs = [&model](ad::Tape& t, double, ad::Var x) {
            return model.rhs_recorded(t, x);
        };
        auto traj = integrator::integrate_recorded(rhs, tape, u, cfg.integ);
        if (!traj.complete) return {};
        ad::Var acc;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            ad::Var node = tape.slice(traj.states[where[i].first],
                                      where[i].second, 1);
            ad::Var diff = tape.offset(node, -obs[i].value);
            ad::Var sq = tape.mul(diff, diff);
            acc = acc.valid() ? tape.add(acc, sq) : sq;
        }
        return tape.scale(acc, 1.0 / static_cast<double>(obs.size()));
    };
    return run_loop(model, store, cfg, loss_fn);
}

}  // namespace finn::train
