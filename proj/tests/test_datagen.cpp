#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "finn/datagen.hpp"

using namespace finn;
using namespace finn::datagen;

TEST_CASE("registry round trips names") {
    for (auto f : {Family::Burgers1D, Family::Burgers2D, Family::DiffusionSorption,
                   Family::DiffusionReaction2D, Family::AllenCahn})
        CHECK(family_from(family_name(f)) == f);
    for (auto s : {Split::Train, Split::InDisTest, Split::OutDisTest})
        CHECK(split_from(split_name(s)) == s);
    CHECK_THROWS(family_from("heat"));
}

TEST_CASE("registered specs") {
    auto b = registered_spec(Family::Burgers1D, Split::Train);
    CHECK(b.grid.n[0] == 49);
    CHECK(b.grid.min[0] == -1.0);
    CHECK(b.nt == 201);
    CHECK(b.t_end == 1.0);
    auto bi = registered_spec(Family::Burgers1D, Split::InDisTest);
    CHECK(bi.t_begin == 1.0);
    CHECK(bi.t_end == 2.0);

    auto s = registered_spec(Family::DiffusionSorption, Split::Train);
    CHECK(s.grid.n[0] == 26);
    CHECK(s.species == 2);
    CHECK(s.t_end == 2500.0);
    auto si = registered_spec(Family::DiffusionSorption, Split::InDisTest);
    CHECK(si.t_end == 10000.0);
    CHECK(si.nt == 1501);

    auto r = registered_spec(Family::DiffusionReaction2D, Split::InDisTest);
    CHECK(r.t_begin == 10.0);
    CHECK(r.t_end == 50.0);
    CHECK(r.grid.dim == 2);

    auto times = b.times();
    CHECK(times.front() == 0.0);
    CHECK(times.back() == 1.0);
    CHECK(times[1] == doctest::Approx(0.005));
}

TEST_CASE("closed-form constitutive functions") {
    CHECK(true_constitutive(Family::Burgers1D, "diffusion", 0.0) ==
          doctest::Approx(0.01 / M_PI));
    CHECK(true_constitutive(Family::Burgers1D, "advective_velocity", 0.37) ==
          doctest::Approx(0.37));
    // independent evaluation of the Freundlich retardation at u = 1
    CHECK(true_constitutive(Family::DiffusionSorption, "retardation", 1.0) ==
          doctest::Approx(3.1569114483).epsilon(1e-9));
    CHECK(std::isinf(
        true_constitutive(Family::DiffusionSorption, "retardation", 0.0)));
    CHECK(true_constitutive(Family::DiffusionReaction2D, "reaction2", 0.3, 0.1) ==
          doctest::Approx(0.2));
    CHECK(true_constitutive(Family::AllenCahn, "reaction", -1.0) ==
          doctest::Approx(0.0));
    CHECK_THROWS(true_constitutive(Family::AllenCahn, "advective_velocity", 0.0));
}

TEST_CASE("test splits chain bit-exactly from the train split") {
    for (auto fam : {Family::Burgers1D, Family::AllenCahn}) {
        auto train = generate(registered_spec(fam, Split::Train));
        auto ind = generate(registered_spec(fam, Split::InDisTest));
        auto last = train.frame(train.spec.nt - 1);
        auto first = ind.frame(0);
        REQUIRE(last.size() == first.size());
        for (std::size_t i = 0; i < last.size(); ++i) CHECK(last[i] == first[i]);
    }
    // the sorption out-dis split changes only the inflow, not the start state
    auto train = generate(registered_spec(Family::DiffusionSorption, Split::Train));
    auto out = generate(registered_spec(Family::DiffusionSorption, Split::OutDisTest));
    auto last = train.frame(train.spec.nt - 1);
    auto first = out.frame(0);
    for (std::size_t i = 0; i < last.size(); ++i) CHECK(last[i] == first[i]);
}

TEST_CASE("sorption solution is a monotone breakthrough") {
    auto ds = generate(registered_spec(Family::DiffusionSorption, Split::Train));
    auto final_frame = ds.frame(ds.spec.nt - 1);
    // dissolved concentration decreases with depth and stays in [0, 1]
    for (int i = 0; i + 1 < 26; ++i) {
        CHECK(final_frame[i] >= final_frame[i + 1]);
        CHECK(final_frame[i] <= 1.0 + 1e-9);
        CHECK(final_frame[i] >= 0.0);
    }
    // concentration at a fixed depth grows over time
    std::size_t mid = 12;
    double prev = -1.0;
    for (int t = 0; t < ds.spec.nt; t += 50) {
        double v = ds.frame(t)[mid];
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("allen-cahn stays within the stable wells") {
    auto ds = generate(registered_spec(Family::AllenCahn, Split::Train));
    for (double v : ds.data) CHECK(std::abs(v) <= 1.0 + 1e-6);
}

TEST_CASE("burgers boundary values decay toward the pinned edges") {
    auto ds = generate(registered_spec(Family::Burgers1D, Split::Train));
    auto f = ds.frame(ds.spec.nt - 1);
    CHECK(std::abs(f[0]) < 0.05);
    CHECK(std::abs(f[48]) < 0.05);
}

TEST_CASE("additive noise statistics and determinism") {
    auto ds = generate(registered_spec(Family::Burgers1D, Split::Train));
    auto noisy = add_noise(ds, 0.05, 42);
    REQUIRE(noisy.data.size() == ds.data.size());
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < ds.data.size(); ++i)
        mean += noisy.data[i] - ds.data[i];
    mean /= static_cast<double>(ds.data.size());
    for (std::size_t i = 0; i < ds.data.size(); ++i) {
        double d = noisy.data[i] - ds.data[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(ds.data.size());
    CHECK(mean == doctest::Approx(0.0).epsilon(0.01));
    CHECK(std::sqrt(var) == doctest::Approx(0.05).epsilon(0.05));

    auto again = add_noise(ds, 0.05, 42);
    CHECK(again.data == noisy.data);
    auto other = add_noise(ds, 0.05, 43);
    CHECK(other.data != noisy.data);
    CHECK(add_noise(ds, 0.0, 1).data == ds.data);
    CHECK_THROWS(add_noise(ds, -0.1, 1));
}

TEST_CASE("dataset save, load, and tamper detection") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "finn_test_ds";
    fs::remove_all(dir);
    auto ds = generate(registered_spec(Family::AllenCahn, Split::Train));
    save_dataset(ds, dir);
    auto back = load_dataset(dir);
    CHECK(back.data == ds.data);
    CHECK(back.spec.family == ds.spec.family);
    CHECK(back.spec.nt == ds.spec.nt);
    CHECK(back.times == ds.times);

    // flip one byte in the payload: the content hash must catch it
    {
        std::fstream f(dir / "data.bin",
                       std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-5, std::ios::end);
        char c;
        f.seekg(-5, std::ios::end);
        f.get(c);
        f.seekp(-5, std::ios::end);
        c = static_cast<char>(c ^ 0x40);
        f.put(c);
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("hash"),
                         std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("csv export shape") {
    namespace fs = std::filesystem;
    auto spec = registered_spec(Family::AllenCahn, Split::Train);
    spec.nt = 3;
    auto ds = generate(spec);
    auto file = fs::temp_directory_path() / "finn_test.csv";
    export_csv(ds, file);
    std::ifstream is(file);
    std::string line;
    int rows = 0;
    std::getline(is, line);
    CHECK(line == "t,x,species,value");
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3 * 49);
    fs::remove(file);
}

TEST_CASE("content hash is order sensitive") {
    std::vector<double> a{1.0, 2.0, 3.0};
    std::vector<double> b{3.0, 2.0, 1.0};
    CHECK(content_hash_hex(a) != content_hash_hex(b));
    CHECK(content_hash_hex(a) == content_hash_hex(a));
    CHECK(content_hash_hex(a).size() == 16);
}

TEST_CASE("boundary descriptors per family and split") {
    auto bc = boundary_conditions(registered_spec(Family::AllenCahn, Split::Train), 0);
    CHECK(bc[0].kind == pde::BcKind::Periodic);

    auto s_train = boundary_conditions(
        registered_spec(Family::DiffusionSorption, Split::Train), 0);
    CHECK(s_train[0].kind == pde::BcKind::Dirichlet);
    CHECK(s_train[0].value == 1.0);
    CHECK(s_train[1].kind == pde::BcKind::Cauchy);
    CHECK(s_train[1].coefficient == doctest::Approx(5e-4));
    auto s_out = boundary_conditions(
        registered_spec(Family::DiffusionSorption, Split::OutDisTest), 0);
    CHECK(s_out[0].value == doctest::Approx(0.7));

    auto r = boundary_conditions(
        registered_spec(Family::DiffusionReaction2D, Split::Train), 1);
    CHECK(r.size() == 4);
    for (const auto& b : r) CHECK(b.kind == pde::BcKind::Neumann);
}

TEST_CASE("model configuration factories") {
    auto spec = registered_spec(Family::DiffusionSorption, Split::Train);
    auto cfg = learned_model_config(spec);
    REQUIRE(cfg.species.size() == 2);
    CHECK(cfg.species[1].flux_source == 0);
    CHECK(cfg.species[0].storage.kind == model::ModuleKind::Network);
    CHECK_FALSE(cfg.species[0].diffusion.trainable);
    CHECK(cfg.species[1].diffusion.value == doctest::Approx(5e-4 * 0.29));

    CHECK_THROWS(true_model_config(spec));

    auto ac = true_model_config(registered_spec(Family::AllenCahn, Split::Train));
    CHECK(ac.reaction.kind == model::ModuleKind::Polynomial);
    CHECK(ac.reaction.coeffs == std::vector<double>{0.0, 5.0, 0.0, -5.0});
    CHECK_FALSE(ac.train_stencil);
}

TEST_CASE("generator self-convergence under grid refinement") {
    auto r = convergence_study(Family::AllenCahn);
    REQUIRE(r.ratios.size() == 2);
    CHECK(r.ratios.back() >= 3.0);  // second-order interior, periodic edges
    for (double e : r.errors) CHECK(std::isfinite(e));
    CHECK(r.errors[0] > r.errors[1]);
    CHECK(r.errors[1] > r.errors[2]);
}
