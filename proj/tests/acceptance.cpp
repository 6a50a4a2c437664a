// Acceptance gate: every shipping requirement as one pass/fail line.
// Slow on purpose; run the unit suites for quick iteration.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "finn/datagen.hpp"
#include "finn/evaluator.hpp"
#include "finn/lab_ingest.hpp"
#include "finn/trainer.hpp"

using namespace finn;
using datagen::Family;
using datagen::Split;

namespace {

int g_failures = 0;

void report(int n, const std::string& what, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", n,
                what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: adjoint gradients against central differences through a short
// closed-loop rollout, every family, every trainable parameter

double rollout_loss(const model::FinnModel& m, ad::ParamStore& store,
                    const std::vector<double>& u0,
                    const integrator::IntegratorConfig& icfg, bool backward) {
    ad::Tape tape(&store);
    auto rhs = [&m](ad::Tape& t, double, ad::Var x) { return m.rhs_recorded(t, x); };
    auto traj = integrator::integrate_recorded(rhs, tape, tape.constant(u0), icfg);
    if (!traj.complete) return std::nan("");
    ad::Var acc;
    for (std::size_t j = 1; j < traj.states.size(); ++j) {
        ad::Var sq = tape.sum(tape.mul(traj.states[j], traj.states[j]));
        acc = acc.valid() ? tape.add(acc, sq) : sq;
    }
    ad::Var loss = tape.scale(acc, 1.0 / static_cast<double>(u0.size()));
    double lv = tape.scalar_value(loss);
    if (backward) {
        store.zero_grad();
        tape.backward(loss, {}, true);
    }
    return lv;
}

void criterion_1() {
    double t0 = now_seconds();
    double worst = 0.0;
    std::string where = "-";
    for (auto fam : {Family::Burgers1D, Family::DiffusionSorption,
                     Family::DiffusionReaction2D, Family::AllenCahn}) {
        auto spec = datagen::registered_spec(fam, Split::Train);
        spec.grid.n[0] = 4;
        if (spec.grid.dim == 2) spec.grid.n[1] = 4;
        auto cfg = datagen::learned_model_config(spec);
        model::FinnModel m(cfg);
        ad::ParamStore store;
        m.init_params(store, 17);

        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> dist(0.15, 0.85);
        std::vector<double> u0(m.state_size());
        for (auto& v : u0) v = dist(rng);

        integrator::IntegratorConfig icfg;
        icfg.scheme = integrator::Scheme::RK4;
        icfg.fixed_steps_per_interval = 3;
        double T = fam == Family::DiffusionSorption ? 1.0 : 0.01;
        icfg.times = {0.0, T};

        rollout_loss(m, store, u0, icfg, true);
        std::vector<std::vector<double>> grads;
        for (std::size_t e = 0; e < store.entry_count(); ++e)
            grads.push_back(store.entry(static_cast<int>(e)).grad);

        double num = 0.0, den = 0.0;
        for (std::size_t e = 0; e < store.entry_count(); ++e) {
            auto& entry = store.entry(static_cast<int>(e));
            if (!entry.trainable) continue;
            for (std::size_t i = 0; i < entry.size(); ++i) {
                double h = 1e-6 * std::max(1.0, std::abs(entry.value[i]));
                double old = entry.value[i];
                entry.value[i] = old + h;
                double lp = rollout_loss(m, store, u0, icfg, false);
                entry.value[i] = old - h;
                double lm = rollout_loss(m, store, u0, icfg, false);
                entry.value[i] = old;
                double fd = (lp - lm) / (2.0 * h);
                double got = grads[e][i];
                num += (got - fd) * (got - fd);
                den += fd * fd;
            }
        }
        double rel = std::sqrt(num / std::max(den, 1e-300));
        if (rel > worst) {
            worst = rel;
            where = datagen::family_name(fam);
        }
    }
    double dt = now_seconds() - t0;
    report(1, "adjoint gradients match finite differences",
           worst < 1e-5 && dt < 60.0,
           fmt("worst rel err %.2e at %s, %.1fs", worst, where.c_str(), dt));
}

// ---------------------------------------------------------------------------
// criteria 2-6 share trained Burgers and Allen-Cahn models

struct Trained {
    model::FinnModel* model = nullptr;
    std::vector<ad::ParamStore> seeds;
    std::vector<train::RunRecord> records;
};

train::TrainConfig standard_training() {
    train::TrainConfig cfg;
    cfg.epochs = 100;
    cfg.steps_per_epoch = 10;
    cfg.adam.lr = 3e-3;
    return cfg;
}

void criterion_2_3(Trained& burgers, const datagen::Dataset& b_train) {
    auto spec = b_train.spec;
    static model::FinnModel m(datagen::learned_model_config(spec));
    burgers.model = &m;

    bool stencil_ok = true;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto cfg = standard_training();
        cfg.seed = seed;
        ad::ParamStore store;
        auto rec = train::train(m, store, b_train, cfg);
        auto w = m.stencil_report(store);
        bool ok = !rec.aborted && std::abs(w[0] + 1.0) < 0.05 &&
                  std::abs(w[1] - 1.0) < 0.05 && rec.wall_seconds < 900.0;
        stencil_ok = stencil_ok && ok;
        detail += fmt("%sseed %llu (%.3f, %.3f) %.0fs", seed ? "; " : "",
                      static_cast<unsigned long long>(seed), w[0], w[1],
                      rec.wall_seconds);
        burgers.seeds.push_back(std::move(store));
        burgers.records.push_back(std::move(rec));
    }
    report(2, "learned stencil converges to (-1, +1) over three seeds",
           stencil_ok, detail);

    double worst_mad = 0.0;
    auto q = eval::query_grid(-1.0, 1.0, 201);
    for (auto& store : burgers.seeds) {
        auto table = m.extract_learned_function(store, "advective_velocity", 0, q);
        double mad = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            mad += std::abs(table[i][1] - q[i]);
        mad /= static_cast<double>(q.size());
        worst_mad = std::max(worst_mad, mad);
    }
    report(3, "learned advective velocity recovers v(u) = u", worst_mad < 0.1,
           fmt("worst mean abs deviation %.4f on [-1, 1]", worst_mad));
}

void criterion_4(Trained& allen, const datagen::Dataset& a_train) {
    static model::FinnModel m(
        datagen::learned_model_config(a_train.spec));
    allen.model = &m;
    auto cfg = standard_training();
    cfg.epochs = 200;   // the reaction roots keep drifting inward past 100
    cfg.adam.lr = 5e-3;
    cfg.seed = 0;
    ad::ParamStore store;
    auto rec = train::train(m, store, a_train, cfg);
    allen.seeds.push_back(std::move(store));
    allen.records.push_back(rec);
    auto& st = allen.seeds[0];

    auto q = eval::query_grid(-1.2, 1.2, 481);
    auto table = m.extract_learned_function(st, "reaction", 0, q);
    // sign changes near each root of 5u(1-u)(1+u) and matching well structure
    auto value_at = [&](double u) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < q.size(); ++i)
            if (std::abs(q[i] - u) < std::abs(q[best] - u)) best = i;
        return table[best][1];
    };
    auto has_root_near = [&](double r) {
        for (std::size_t i = 0; i + 1 < q.size(); ++i)
            if (q[i] >= r - 0.1 && q[i + 1] <= r + 0.1 &&
                table[i][1] * table[i + 1][1] <= 0.0)
                return true;
        return false;
    };
    bool roots = has_root_near(-1.0) && has_root_near(0.0) && has_root_near(1.0);
    bool signs = value_at(-1.15) > 0.0 && value_at(-0.5) < 0.0 &&
                 value_at(0.5) > 0.0 && value_at(1.15) < 0.0;
    report(4, "learned reaction shows the two-well structure of 5u - 5u^3",
           roots && signs && !rec.aborted,
           fmt("roots near -1/0/+1: %d%d%d, signs -+/+-: %d, R(0.5)=%.3f",
               has_root_near(-1.0), has_root_near(0.0), has_root_near(1.0),
               signs, value_at(0.5)));
}

void criterion_5(Trained& burgers, Trained& allen) {
    std::string detail;
    bool ok = true;
    struct Case {
        Family fam;
        Trained* t;
    } cases[] = {{Family::AllenCahn, &allen}, {Family::Burgers1D, &burgers}};
    for (auto& c : cases) {
        auto train_ds = datagen::generate(datagen::registered_spec(c.fam, Split::Train));
        auto out_ds = datagen::generate(datagen::registered_spec(c.fam, Split::OutDisTest));
        eval::EvalConfig ecfg;
        auto rep = eval::evaluate(*c.t->model, c.t->seeds[0], {train_ds, out_ds}, ecfg);
        const auto& entries = rep.at("splits");
        if (!entries[0].contains("rmse") || !entries[1].contains("rmse")) {
            ok = false;
            detail += datagen::family_name(c.fam) + " rollout failed; ";
            continue;
        }
        double r_train = entries[0].at("rmse").get<double>();
        double r_out = entries[1].at("rmse").get<double>();
        ok = ok && r_out < 10.0 * r_train;
        detail += fmt("%s train %.2e out %.2e; ", datagen::family_name(c.fam).c_str(),
                      r_train, r_out);
    }
    report(5, "generalization to unseen initial conditions within one order", ok,
           detail);
}

void criterion_6(Trained& burgers) {
    auto ind = datagen::generate(
        datagen::registered_spec(Family::Burgers1D, Split::InDisTest));
    integrator::IntegratorConfig icfg;
    icfg.times = ind.times;
    auto first = ind.frame(0);
    auto c = eval::conservation_error(
        *burgers.model, burgers.seeds[0],
        std::vector<double>(first.begin(), first.end()), icfg);
    report(6, "trained-model flux budget closes on the forecast window",
           c.error <= 1e-2,
           fmt("error %.2e (mass change %.3e, boundary %.3e)", c.error,
               c.mass_change, c.boundary));
}

void criterion_7() {
    struct Row {
        Family fam;
        double threshold;
    };
    // only the periodic family has second-order boundary treatment; upwind
    // advection and ghost-value edges are first order, hence the lower bars
    Row rows[] = {{Family::AllenCahn, 3.0},
                  {Family::DiffusionSorption, 2.0},
                  {Family::Burgers1D, 1.8},
                  {Family::Burgers2D, 1.8},
                  {Family::DiffusionReaction2D, 1.8}};
    bool ok = true;
    std::string detail;
    for (const auto& r : rows) {
        auto res = datagen::convergence_study(r.fam);
        double ratio = res.ratios.back();
        ok = ok && ratio >= r.threshold;
        detail += fmt("%s %.2f (>= %.1f); ", datagen::family_name(r.fam).c_str(),
                      ratio, r.threshold);
    }
    report(7, "generator error shrinks under grid refinement", ok, detail);
}

// ---------------------------------------------------------------------------
// criteria 8 and 9: sorption training under both integrators

void criterion_8_9() {
    auto spec = datagen::registered_spec(Family::DiffusionSorption, Split::Train);
    auto train_ds = datagen::generate(spec);
    model::FinnModel m(datagen::learned_model_config(spec));

    auto cfg = standard_training();
    cfg.steps_per_epoch = 1;  // one full-trajectory update per epoch
    cfg.adam.lr = 2e-3;
    cfg.seed = 0;
    ad::ParamStore adaptive_store;
    auto adaptive = train::train(m, adaptive_store, train_ds, cfg);

    auto euler_cfg = cfg;
    euler_cfg.integ.scheme = integrator::Scheme::Euler;
    euler_cfg.integ.fixed_steps_per_interval = 1;  // dt = 5 days, unstable
    ad::ParamStore euler_store;
    auto euler = train::train(m, euler_store, train_ds, euler_cfg);

    // criterion 8: the changed inflow condition is tracked at the surface
    auto out_ds = datagen::generate(
        datagen::registered_spec(Family::DiffusionSorption, Split::OutDisTest));
    // same learned parameters, the changed inflow boundary of the test split
    model::FinnModel out_model(datagen::learned_model_config(out_ds.spec));
    integrator::IntegratorConfig icfg;
    auto traj = eval::rollout(out_model, adaptive_store, out_ds, icfg);
    bool ok8 = traj.complete && !adaptive.aborted;
    double worst = 0.0;
    if (traj.complete) {
        for (int j = out_ds.spec.nt * 3 / 4; j < out_ds.spec.nt; j += 25) {
            double pred = traj.states[static_cast<std::size_t>(j)][0];
            worst = std::max(worst, std::abs(pred - 0.7));
        }
        ok8 = ok8 && worst < 0.05;
    }
    report(8, "changed inflow concentration is tracked at the surface", ok8,
           fmt("worst late-time gap to 0.7 at x=0: %.4f (loss %.2e)", worst,
               adaptive.best_loss));

    bool ok9 = adaptive.first_nan_epoch == -1 && !adaptive.aborted &&
               adaptive.epoch_losses.size() == 100 && euler.aborted &&
               euler.first_nan_epoch >= 0;
    report(9, "adaptive stepping survives where fixed-step Euler overflows", ok9,
           fmt("adaptive: 100 epochs, nan epoch %d; euler: aborted=%d at epoch %d",
               adaptive.first_nan_epoch, euler.aborted, euler.first_nan_epoch));
}

void criterion_10(const datagen::Dataset& b_train) {
    auto noisy = datagen::add_noise(b_train, 0.05, 77);
    model::FinnModel m(datagen::learned_model_config(noisy.spec));
    auto cfg = standard_training();
    cfg.seed = 0;
    ad::ParamStore store;
    auto rec = train::train(m, store, noisy, cfg);
    auto q = eval::query_grid(-1.0, 1.0, 201);
    auto table = m.extract_learned_function(store, "advective_velocity", 0, q);
    double mad = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        mad += std::abs(table[i][1] - q[i]);
    mad /= static_cast<double>(q.size());
    report(10, "velocity recovery survives 5% measurement noise",
           mad < 0.2 && !rec.aborted,
           fmt("mean abs deviation %.4f (tolerance doubled to 0.2)", mad));
}

void criterion_11() {
    const auto& fit_core = lab::core_sample("2");
    const auto& transfer_core = lab::core_sample("1");
    auto fit_ms = lab::synthetic_breakthrough(fit_core, 55);
    auto transfer_ms = lab::synthetic_breakthrough(transfer_core, 55);

    model::FinnModel fit_model(lab::core_model_config(fit_core));
    std::vector<double> times;
    auto obs = lab::observations(fit_core, fit_ms,
                                 lab::MeasurementKind::Breakthrough, 26, times);
    train::TrainConfig cfg;
    cfg.epochs = 50;
    cfg.steps_per_epoch = 4;
    cfg.adam.lr = 3e-3;
    cfg.seed = 1;
    cfg.integ.times = times;
    ad::ParamStore store;
    std::vector<double> u0(fit_model.state_size(), 0.0);
    auto rec = train::train_sparse(fit_model, store, u0, obs, cfg);

    integrator::IntegratorConfig icfg;
    double fit_rmse = lab::measurement_rmse(
        fit_model, store, fit_core, fit_ms, lab::MeasurementKind::Breakthrough, icfg);
    // same learned storage weights, different column geometry
    model::FinnModel transfer_model(lab::core_model_config(transfer_core));
    ad::ParamStore transfer_store;
    transfer_model.init_params(transfer_store, 1);
    transfer_store.assign_values(store.flatten_values());
    double transfer_rmse = lab::measurement_rmse(
        transfer_model, transfer_store, transfer_core, transfer_ms,
        lab::MeasurementKind::Breakthrough, icfg);
    report(11, "storage function learned on one column transfers to another",
           !rec.aborted && transfer_rmse < 2.0 * fit_rmse,
           fmt("fit %.3e transfer %.3e", fit_rmse, transfer_rmse));
}

void criterion_12() {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> dist;
    std::uniform_real_distribution<double> scale(0.05, 100.0);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    bool mean_ok = true, invariant_ok = true;
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        std::size_t n = 8 + static_cast<std::size_t>(rng() % 120);
        std::vector<double> target(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            target[i] = 3.0 * dist(rng);
            pred[i] = target[i] + 0.5 * dist(rng);
        }
        double mean = 0.0;
        for (double v : target) mean += v;
        mean /= static_cast<double>(n);
        mean_ok = mean_ok &&
                  eval::rmse(std::vector<double>(n, mean), target) == 1.0;
        double base = eval::rmse(pred, target);
        double a = scale(rng), b = shift(rng);
        std::vector<double> ps(n), ts(n);
        for (std::size_t i = 0; i < n; ++i) {
            ps[i] = a * pred[i] + b;
            ts[i] = a * target[i] + b;
        }
        double rel = std::abs(eval::rmse(ps, ts) - base) / base;
        worst = std::max(worst, rel);
        invariant_ok = invariant_ok && rel < 1e-9;
    }
    report(12, "normalized error: exact mean-predictor unit score, scale/shift invariant",
           mean_ok && invariant_ok,
           fmt("mean predictor exact: %d, worst invariance drift %.1e", mean_ok,
               worst));
}

}  // namespace

int main() {
    std::printf("acceptance gate\n");
    criterion_1();

    auto b_train = datagen::generate(
        datagen::registered_spec(Family::Burgers1D, Split::Train));
    auto a_train = datagen::generate(
        datagen::registered_spec(Family::AllenCahn, Split::Train));

    Trained burgers, allen;
    criterion_2_3(burgers, b_train);
    criterion_4(allen, a_train);
    criterion_5(burgers, allen);
    criterion_6(burgers);
    criterion_7();
    criterion_8_9();
    criterion_10(b_train);
    criterion_11();
    criterion_12();

    std::printf("%d of 12 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
