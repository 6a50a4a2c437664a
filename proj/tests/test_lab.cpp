#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "finn/lab_ingest.hpp"

using namespace finn;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    auto p = fs::temp_directory_path() / name;
    std::ofstream(p) << content;
    return p;
}

}  // namespace

TEST_CASE("core sample registry") {
    CHECK(lab::core_samples().size() == 3);
    const auto& c1 = lab::core_sample("1");
    CHECK(c1.diffusion == doctest::Approx(2.00e-5));
    CHECK(c1.length == doctest::Approx(0.0254));
    CHECK(c1.t_end == doctest::Approx(38.81));
    CHECK(c1.solubility == doctest::Approx(1.4));
    CHECK_FALSE(c1.no_flow_bottom);
    const auto& c2 = lab::core_sample("2");
    CHECK(c2.length == doctest::Approx(0.02604));
    CHECK(c2.solubility == doctest::Approx(1.6));
    const auto& c2b = lab::core_sample("2B");
    CHECK(c2b.no_flow_bottom);
    CHECK(c2b.diffusion == doctest::Approx(2.78e-5));
    CHECK(c2b.length == doctest::Approx(0.105));
    CHECK(c2b.porosity == doctest::Approx(0.288));
    CHECK(c2b.bulk_density == doctest::Approx(1957.0));
    CHECK_THROWS(lab::core_sample("3"));
}

TEST_CASE("csv ingestion validates row by row") {
    const auto& core = lab::core_sample("1");

    auto good = write_temp("finn_lab_good.csv",
                           "time,location,value\n"
                           "1.0,0.0254,0.02\n"
                           "2.5,0.0254,0.05\n");
    auto ms = lab::ingest_csv(good, core);
    REQUIRE(ms.size() == 2);
    CHECK(ms[1].t == 2.5);
    CHECK(ms[1].value == 0.05);

    auto empty = write_temp("finn_lab_empty.csv", "time,location,value\n");
    CHECK_THROWS_WITH_AS(lab::ingest_csv(empty, core),
                         doctest::Contains("no measurements"),
                         std::runtime_error);

    auto late = write_temp("finn_lab_late.csv", "50.0,0.0254,0.1\n");
    CHECK_THROWS_WITH_AS(lab::ingest_csv(late, core), doctest::Contains("row 1"),
                         std::runtime_error);

    auto neg = write_temp("finn_lab_neg.csv",
                          "1.0,0.0254,0.02\n2.0,0.0254,-0.01\n");
    CHECK_THROWS_WITH_AS(lab::ingest_csv(neg, core), doctest::Contains("row 2"),
                         std::runtime_error);

    auto malformed = write_temp("finn_lab_bad.csv", "1.0;0.0254;0.2\n");
    CHECK_THROWS(lab::ingest_csv(malformed, core));

    auto off = write_temp("finn_lab_off.csv", "1.0,0.2,0.02\n");
    CHECK_THROWS_WITH_AS(lab::ingest_csv(off, core),
                         doctest::Contains("location"), std::runtime_error);
}

TEST_CASE("measurement classification") {
    const auto& core = lab::core_sample("1");
    std::vector<lab::Measurement> bt{{1.0, core.length, 0.1},
                                     {2.0, core.length, 0.2}};
    CHECK(lab::classify(bt, core) == lab::MeasurementKind::Breakthrough);
    std::vector<lab::Measurement> prof{{core.t_end, 0.01, 0.3},
                                       {core.t_end, 0.02, 0.1}};
    CHECK(lab::classify(prof, core) == lab::MeasurementKind::Profile);
    std::vector<lab::Measurement> mixed{{1.0, 0.01, 0.3}, {2.0, core.length, 0.1}};
    CHECK_THROWS(lab::classify(mixed, core));
}

TEST_CASE("core model configuration") {
    auto cfg = lab::core_model_config(lab::core_sample("2"));
    REQUIRE(cfg.species.size() == 2);
    CHECK(cfg.grid.max[0] == doctest::Approx(0.02604));
    CHECK(cfg.species[0].bcs[0].kind == pde::BcKind::Dirichlet);
    CHECK(cfg.species[0].bcs[0].value == doctest::Approx(1.6));
    CHECK(cfg.species[0].bcs[1].kind == pde::BcKind::Cauchy);
    CHECK(cfg.species[0].bcs[1].coefficient == doctest::Approx(2.00e-5));
    CHECK(cfg.species[1].flux_source == 0);
    CHECK_FALSE(cfg.species[0].diffusion.trainable);
    CHECK(cfg.species[0].storage.kind == model::ModuleKind::Network);

    auto sealed = lab::core_model_config(lab::core_sample("2B"));
    CHECK(sealed.species[0].bcs[1].kind == pde::BcKind::Neumann);
    CHECK(sealed.species[0].bcs[1].value == 0.0);

    CHECK_NOTHROW(model::FinnModel{cfg});
    CHECK_NOTHROW(model::FinnModel{sealed});
}

TEST_CASE("synthetic breakthrough series") {
    auto ms = lab::synthetic_breakthrough(lab::core_sample("2"), 55);
    REQUIRE(ms.size() == 55);
    double prev = -1.0;
    for (const auto& m : ms) {
        CHECK(m.x == doctest::Approx(0.02604));
        CHECK(m.value >= prev - 1e-12);  // monotone breakthrough
        CHECK(m.value < 1.6);            // below the inflow solubility
        prev = m.value;
    }
    CHECK(ms.back().t == doctest::Approx(39.82));
    CHECK(ms.back().value > 0.01);  // the front actually arrives

    CHECK_THROWS(lab::synthetic_breakthrough(lab::core_sample("2B"), 10));
}

TEST_CASE("observation mapping and sealed-outlet rejection") {
    const auto& core = lab::core_sample("2");
    auto ms = lab::synthetic_breakthrough(core, 10);
    std::vector<double> times;
    auto obs = lab::observations(core, ms, lab::MeasurementKind::Breakthrough,
                                 26, times);
    REQUIRE(obs.size() == 10);
    CHECK(times.size() == 11);
    CHECK(times.front() == 0.0);
    for (const auto& o : obs) {
        CHECK(o.cell == 25);
        CHECK(o.species == 0);
    }
    CHECK_THROWS(lab::observations(lab::core_sample("2B"), ms,
                                   lab::MeasurementKind::Breakthrough, 26, times));
}

TEST_CASE("prediction at measurement points") {
    const auto& core = lab::core_sample("2");
    auto ms = lab::synthetic_breakthrough(core, 8);
    model::FinnModel m(lab::core_model_config(core));
    ad::ParamStore store;
    m.init_params(store, 3);
    integrator::IntegratorConfig icfg;
    auto pred = lab::predict(m, store, core, ms, lab::MeasurementKind::Breakthrough,
                             icfg);
    REQUIRE(pred.size() == 8);
    for (double v : pred) CHECK(std::isfinite(v));
    double r = lab::measurement_rmse(m, store, core, ms,
                                     lab::MeasurementKind::Breakthrough, icfg);
    CHECK(std::isfinite(r));
}

TEST_CASE("transfer scoring rebuilds the model on the target core") {
    const auto& fit = lab::core_sample("2");
    const auto& target = lab::core_sample("1");
    model::FinnModel m(lab::core_model_config(fit));
    ad::ParamStore store;
    m.init_params(store, 5);
    integrator::IntegratorConfig icfg;
    auto ms = lab::synthetic_breakthrough(target, 6);
    auto res = lab::transfer_evaluate(store, target, ms,
                                      lab::MeasurementKind::Breakthrough, icfg);
    REQUIRE(res.predicted.size() == 6);
    for (double v : res.predicted) CHECK(std::isfinite(v));

    // same weights scored directly on the target core give the same number
    model::FinnModel tm(lab::core_model_config(target));
    ad::ParamStore ts;
    tm.init_params(ts, 0);
    ts.assign_values(store.flatten_values());
    double direct = lab::measurement_rmse(tm, ts, target, ms,
                                          lab::MeasurementKind::Breakthrough,
                                          icfg);
    CHECK(res.rmse == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("measurement export round trip") {
    auto ms = lab::synthetic_breakthrough(lab::core_sample("1"), 5);
    auto p = fs::temp_directory_path() / "finn_lab_export.csv";
    lab::export_measurements_csv(ms, p);
    auto back = lab::ingest_csv(p, lab::core_sample("1"));
    REQUIRE(back.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back[i].t == ms[i].t);
        CHECK(back[i].value == ms[i].value);
    }
    fs::remove(p);
}
