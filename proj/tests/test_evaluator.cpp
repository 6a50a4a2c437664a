#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "finn/evaluator.hpp"

using namespace finn;

TEST_CASE("normalized error of the mean predictor is exactly one") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> dist(0.3, 1.7);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> target(97);
        for (auto& v : target) v = dist(rng);
        double mean = 0.0;
        for (double v : target) mean += v;
        mean /= static_cast<double>(target.size());
        std::vector<double> pred(target.size(), mean);
        CHECK(eval::rmse(pred, target) == 1.0);
    }
}

TEST_CASE("normalized error is scale and shift invariant") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> dist;
    std::uniform_real_distribution<double> scale(0.1, 50.0);
    std::uniform_real_distribution<double> shift(-30.0, 30.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> target(64), pred(64);
        for (std::size_t i = 0; i < 64; ++i) {
            target[i] = dist(rng);
            pred[i] = target[i] + 0.3 * dist(rng);
        }
        double base = eval::rmse(pred, target);
        double a = scale(rng), b = shift(rng);
        auto ps = pred, ts = target;
        for (std::size_t i = 0; i < 64; ++i) {
            ps[i] = a * pred[i] + b;
            ts[i] = a * target[i] + b;
        }
        CHECK(eval::rmse(ps, ts) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("normalized error oracle values") {
    std::vector<double> target{1.0, 2.0, 3.0, 4.0};  // variance 1.25
    CHECK(eval::rmse(target, target) == 0.0);
    std::vector<double> off{1.5, 2.5, 3.5, 4.5};  // constant offset 0.5
    CHECK(eval::rmse(off, target) == doctest::Approx(0.25 / 1.25));
    std::vector<double> flat(4, 7.0);
    CHECK_THROWS(eval::rmse(target, flat));
    CHECK_THROWS(eval::rmse(target, std::vector<double>{1.0}));
}

TEST_CASE("conservation budget closes for the exact models") {
    auto spec = datagen::registered_spec(datagen::Family::Burgers1D,
                                         datagen::Split::Train);
    model::FinnModel m(datagen::true_model_config(spec));
    ad::ParamStore store;
    m.init_params(store, 0);
    auto ds = datagen::generate(spec);
    integrator::IntegratorConfig icfg;
    icfg.atol = 1e-8;
    icfg.rtol = 1e-8;
    icfg.times = ds.times;
    auto first = ds.frame(0);
    auto c = eval::conservation_error(
        m, store, std::vector<double>(first.begin(), first.end()), icfg);
    CHECK(c.error < 1e-4);
    CHECK(c.source == 0.0);  // no reaction module
}

TEST_CASE("conservation is trivial on a periodic diffusion-only grid") {
    model::ModelConfig cfg;
    cfg.grid = {1, {0.0, 0.0}, {1.0, 1.0}, {16, 1}};
    cfg.train_stencil = false;
    model::SpeciesSpec sp;
    sp.name = "u";
    sp.diffusion.kind = model::ModuleKind::Scalar;
    sp.diffusion.value = 0.05;
    sp.diffusion.trainable = false;
    sp.bcs = {{pde::BcKind::Periodic, 0.0, 0.0}, {pde::BcKind::Periodic, 0.0, 0.0}};
    cfg.species.push_back(sp);
    model::FinnModel m(cfg);
    ad::ParamStore store;
    m.init_params(store, 0);
    std::vector<double> u0(16);
    for (int i = 0; i < 16; ++i) u0[static_cast<std::size_t>(i)] = 1.0 + std::sin(2 * M_PI * i / 16.0);
    integrator::IntegratorConfig icfg;
    icfg.times = {0.0, 0.5, 1.0};
    auto c = eval::conservation_error(m, store, u0, icfg);
    CHECK(c.boundary == 0.0);
    CHECK(c.error < 1e-10);
}

TEST_CASE("evaluation report structure and determinism") {
    auto spec = datagen::registered_spec(datagen::Family::AllenCahn,
                                         datagen::Split::Train);
    auto ds = datagen::generate(spec);
    model::FinnModel m(datagen::true_model_config(spec));
    ad::ParamStore store;
    m.init_params(store, 0);
    eval::EvalConfig ecfg;
    auto report = eval::evaluate(m, store, {ds}, ecfg);

    CHECK(report.at("parameters").get<int>() == 7);  // stencil + D + 4 coeffs
    REQUIRE(report.at("splits").size() == 1);
    const auto& entry = report.at("splits")[0];
    CHECK(entry.at("family") == "allen_cahn");
    // the exact-module rollout reproduces the generator closely
    CHECK(entry.at("rmse").get<double>() < 1e-6);
    CHECK(entry.contains("conservation"));
    REQUIRE(report.at("learned").contains("reaction"));
    const auto& reaction = report.at("learned").at("reaction");
    CHECK(reaction.size() == 201);
    // rows carry the closed-form comparison: [u, learned, true, abs error],
    // and the exact polynomial matches its own closed form
    REQUIRE(reaction[0].size() == 4);
    for (const auto& row : reaction)
        CHECK(row[3].get<double>() < 1e-12);
    CHECK(report.at("parameters_hash").get<std::string>().starts_with("fnv1a64:"));

    auto again = eval::evaluate(m, store, {ds}, ecfg);
    CHECK(report.dump(2) == again.dump(2));  // byte-identical
}

TEST_CASE("aborting rollouts become error entries") {
    auto spec = datagen::registered_spec(datagen::Family::AllenCahn,
                                         datagen::Split::Train);
    auto ds = datagen::generate(spec);
    model::FinnModel m(datagen::true_model_config(spec));
    ad::ParamStore store;
    m.init_params(store, 0);
    eval::EvalConfig ecfg;
    ecfg.integ.max_steps_per_interval = 1;  // cannot possibly finish
    auto report = eval::evaluate(m, store, {ds}, ecfg);
    const auto& entry = report.at("splits")[0];
    CHECK(entry.contains("error"));
    CHECK_FALSE(entry.contains("rmse"));
}

TEST_CASE("query grid") {
    auto q = eval::query_grid(-1.0, 1.0, 201);
    CHECK(q.size() == 201);
    CHECK(q.front() == -1.0);
    CHECK(q.back() == 1.0);
    CHECK(q[100] == doctest::Approx(0.0));
    CHECK_THROWS(eval::query_grid(0.0, 1.0, 1));
}
