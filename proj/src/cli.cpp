#include "finn/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"

#include "finn/datagen.hpp"
#include "finn/evaluator.hpp"
#include "finn/lab_ingest.hpp"
#include "finn/trainer.hpp"

namespace finn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

/// Removes `dir` again if this run created it; disarm() keeps the output.
class OutputGuard {
public:
    explicit OutputGuard(const fs::path& dir)
        : dir_(dir), created_(!fs::exists(dir)) {
        fs::create_directories(dir);
    }
    ~OutputGuard() {
        if (armed_) {
            std::error_code ec;
            if (created_)
                fs::remove_all(dir_, ec);
            else
                for (const auto& p : tracked_) fs::remove(p, ec);
        }
    }
    void track(const fs::path& p) { tracked_.push_back(p); }
    void disarm() { armed_ = false; }

private:
    fs::path dir_;
    bool created_;
    bool armed_ = true;
    std::vector<fs::path> tracked_;
};

// ---------------------------------------------------------------------------
// Training option resolution: defaults, then the config file, then --set
// overrides (dotted keys), with unknown keys rejected.

/// Dataset directories resolve against $FINN_DATA_ROOT when relative.
std::string data_path(const std::string& p) {
    const char* root = std::getenv("FINN_DATA_ROOT");
    if (root && *root && fs::path(p).is_relative())
        return (fs::path(root) / p).string();
    return p;
}

ordered_json default_train_options() {
    ordered_json o;
    o["epochs"] = 100;
    o["steps_per_epoch"] = 10;
    o["lr"] = 1e-3;
    o["grad_clip"] = 10.0;
    o["nan_policy"] = "abort";
    o["scheme"] = "dp45";
    o["atol"] = 1e-6;
    o["rtol"] = 1e-4;
    o["fixed_steps_per_interval"] = 1;
    o["divergence_loss"] = 1e6;
    o["checkpoint_every"] = 0;  // mid-run snapshot cadence, 0 = final only
    o["ablation"] = "none";
    o["poly_degree"] = 3;
    o["model"] = nullptr;  // defaults to the family's learnable configuration
    return o;
}

void merge_options(ordered_json& base, const json& layer,
                   const std::string& where) {
    for (const auto& [key, value] : layer.items()) {
        if (!base.contains(key))
            throw std::invalid_argument("unknown key '" + key + "' in " + where);
        base[key] = value;
    }
}

json parse_set_value(const std::string& text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) return json(text);  // bare string
    return v;
}

void apply_overrides(ordered_json& opts, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        std::string key = s.substr(0, eq);
        json value = parse_set_value(s.substr(eq + 1));
        ordered_json* node = &opts;
        std::size_t pos = 0;
        while (true) {
            auto dot = key.find('.', pos);
            std::string part = key.substr(pos, dot - pos);
            bool leaf = dot == std::string::npos;
            if (node == &opts && !opts.contains(part))
                throw std::invalid_argument("unknown key '" + part + "' in --set");
            if (leaf) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            pos = dot + 1;
        }
    }
}

integrator::Scheme scheme_from(const std::string& s) {
    if (s == "euler") return integrator::Scheme::Euler;
    if (s == "rk4") return integrator::Scheme::RK4;
    if (s == "dp45") return integrator::Scheme::DormandPrince45;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

train::TrainConfig train_config_from(const ordered_json& o) {
    train::TrainConfig c;
    c.epochs = o.at("epochs").get<int>();
    c.steps_per_epoch = o.at("steps_per_epoch").get<int>();
    c.adam.lr = o.at("lr").get<double>();
    c.grad_clip = o.at("grad_clip").get<double>();
    std::string np = o.at("nan_policy").get<std::string>();
    if (np == "abort")
        c.nan_policy = train::NanPolicy::Abort;
    else if (np == "skip")
        c.nan_policy = train::NanPolicy::SkipStep;
    else
        throw std::invalid_argument("unknown nan_policy '" + np + "'");
    c.integ.scheme = scheme_from(o.at("scheme").get<std::string>());
    c.integ.atol = o.at("atol").get<double>();
    c.integ.rtol = o.at("rtol").get<double>();
    c.integ.fixed_steps_per_interval =
        o.at("fixed_steps_per_interval").get<int>();
    c.divergence_loss = o.at("divergence_loss").get<double>();
    c.checkpoint_every = o.at("checkpoint_every").get<int>();
    return c;
}

/// Swaps every Network module for a trainable polynomial of the given degree
/// (the function-space ablation).
void polynomial_ablation(model::ModelConfig& cfg, int degree) {
    auto swap = [&](model::ModuleSpec& m, bool bivariate) {
        if (m.kind != model::ModuleKind::Network) return;
        model::ModuleSpec p;
        p.kind = model::ModuleKind::Polynomial;
        p.degree = degree;
        p.output = m.output;
        p.output_scale = m.output_scale;
        p.trainable = true;
        std::size_t n = bivariate
                            ? 2 * static_cast<std::size_t>(
                                      model::bivariate_term_count(degree))
                            : static_cast<std::size_t>(degree) + 1;
        p.coeffs.assign(n, 0.0);
        m = p;
    };
    for (auto& sp : cfg.species) {
        swap(sp.diffusion, false);
        swap(sp.advection, false);
        swap(sp.storage, false);
    }
    swap(cfg.reaction, cfg.species.size() == 2);
}

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    std::string config_file;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    int seeds = 0;  // fan-out count; 0 means single run with `seed`
    double sigma = -1.0;
    std::uint64_t noise_seed = 0;
};

int run_training(const TrainArgs& a) {
    auto data = datagen::load_dataset(data_path(a.data_dir));
    if (a.sigma >= 0.0) data = datagen::add_noise(data, a.sigma, a.noise_seed);

    ordered_json opts = default_train_options();
    if (!a.config_file.empty()) {
        std::ifstream is(a.config_file);
        if (!is) throw std::runtime_error("cannot read " + a.config_file);
        merge_options(opts, json::parse(is), a.config_file);
    }
    apply_overrides(opts, a.sets);

    model::ModelConfig mcfg;
    if (opts.at("model").is_null()) {
        mcfg = datagen::learned_model_config(data.spec);
        mcfg.grid = data.spec.grid;
    } else {
        mcfg = model::config_from_json(opts.at("model"));
    }
    std::string ablation = opts.at("ablation").get<std::string>();
    if (ablation == "polynomial")
        polynomial_ablation(mcfg, opts.at("poly_degree").get<int>());
    else if (ablation != "none")
        throw std::invalid_argument("unknown ablation '" + ablation + "'");
    opts["model"] = model::to_json(mcfg);

    train::TrainConfig base_cfg = train_config_from(opts);

    std::mutex print_mtx;
    auto run_one = [&](std::uint64_t seed, const fs::path& dir) {
        OutputGuard guard(dir);
        guard.track(dir / "manifest.json");
        guard.track(dir / "record.json");
        guard.track(dir / "checkpoint.bin");
        guard.track(dir / "checkpoint.bin.json");
        model::FinnModel model(mcfg);
        train::TrainConfig tcfg = base_cfg;
        tcfg.seed = seed;
        tcfg.checkpoint_path = dir / "checkpoint.bin";
        ad::ParamStore store;
        auto rec = train::train(model, store, data, tcfg);

        ordered_json manifest;
        manifest["options"] = opts;
        manifest["seed"] = seed;
        manifest["dataset"] = {
            {"family", datagen::family_name(data.spec.family)},
            {"split", datagen::split_name(data.spec.split)},
            {"hash", "fnv1a64:" + datagen::content_hash_hex(data.data)}};
        if (a.sigma >= 0.0)
            manifest["noise"] = {{"sigma", a.sigma}, {"seed", a.noise_seed}};
        manifest["checkpoint"] = "checkpoint.bin";
        std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";

        ordered_json record;
        record["epoch_losses"] = rec.epoch_losses;
        record["first_nan_epoch"] = rec.first_nan_epoch;
        record["best_epoch"] = rec.best_epoch;
        record["best_loss"] = rec.best_loss;
        record["wall_seconds"] = rec.wall_seconds;
        record["aborted"] = rec.aborted;
        record["abort_reason"] = rec.abort_reason;
        std::ofstream(dir / "record.json") << record.dump(2) << "\n";

        nn::save_checkpoint(store, dir / "checkpoint.bin", manifest.dump());
        guard.disarm();
        std::lock_guard<std::mutex> lk(print_mtx);
        std::printf("seed %llu: best loss %.6e at epoch %d (%.1fs)%s\n",
                    static_cast<unsigned long long>(seed), rec.best_loss,
                    rec.best_epoch, rec.wall_seconds,
                    rec.aborted ? (" [aborted: " + rec.abort_reason + "]").c_str()
                                : "");
    };

    if (a.seeds <= 0) {
        run_one(a.seed, a.out_dir);
        return 0;
    }
    // independent fan-out jobs; each seed trains its own model in a worker
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(a.seeds));
    for (int k = 0; k < a.seeds; ++k)
        workers.emplace_back([&, k] {
            try {
                run_one(static_cast<std::uint64_t>(k),
                        fs::path(a.out_dir) / ("seed" + std::to_string(k)));
            } catch (...) {
                errors[static_cast<std::size_t>(k)] = std::current_exception();
            }
        });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return 0;
}

model::ModelConfig config_from_checkpoint(const fs::path& ckpt) {
    std::ifstream is(ckpt.string() + ".json");
    if (!is)
        throw std::runtime_error("missing checkpoint manifest " + ckpt.string() +
                                 ".json");
    json manifest = json::parse(is);
    return model::config_from_json(
        manifest.at("config").at("options").at("model"));
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"finite-volume network toolkit"};
    app.require_subcommand(1);

    // generate
    std::string g_family, g_split = "train", g_out;
    double g_sigma = -1.0;
    std::uint64_t g_noise_seed = 0;
    bool g_csv = false;
    auto* gen = app.add_subcommand("generate", "write a benchmark dataset");
    gen->add_option("--family", g_family, "equation family")->required();
    gen->add_option("--split", g_split, "train | in_dis_test | out_dis_test");
    gen->add_option("--out", g_out, "output directory")->required();
    gen->add_option("--sigma", g_sigma, "additive Gaussian noise level");
    gen->add_option("--noise-seed", g_noise_seed, "noise generator seed");
    gen->add_flag("--csv", g_csv, "also write data.csv");

    // train / ablate
    TrainArgs t;
    auto add_train_options = [&](CLI::App* cmd) {
        cmd->add_option("--data", t.data_dir, "dataset directory")->required();
        cmd->add_option("--out", t.out_dir, "output directory")->required();
        cmd->add_option("--config", t.config_file, "training options (JSON)");
        cmd->add_option("--set", t.sets, "dotted-key override, key=value");
        cmd->add_option("--seed", t.seed, "parameter init seed");
        cmd->add_option("--seeds", t.seeds, "fan out over seeds 0..N-1");
    };
    auto* tr = app.add_subcommand("train", "fit a model to a dataset");
    add_train_options(tr);

    auto* ab = app.add_subcommand("ablate", "preconfigured ablation runs");
    ab->require_subcommand(1);
    auto* ab_poly = ab->add_subcommand(
        "polynomial", "networks replaced by trainable polynomials");
    add_train_options(ab_poly);
    int ab_degree = 3;
    ab_poly->add_option("--degree", ab_degree, "polynomial degree");
    auto* ab_noise = ab->add_subcommand("noise", "train against noisy data");
    add_train_options(ab_noise);
    double ab_sigma = 0.05;
    std::uint64_t ab_noise_seed = 0;
    ab_noise->add_option("--sigma", ab_sigma, "noise level")->required();
    ab_noise->add_option("--noise-seed", ab_noise_seed, "noise generator seed");
    auto* ab_euler = ab->add_subcommand("euler", "fixed-step Euler integration");
    add_train_options(ab_euler);
    int ab_substeps = 1;
    ab_euler->add_option("--substeps", ab_substeps, "Euler steps per interval");

    // evaluate
    std::string e_ckpt, e_out, e_csv;
    std::vector<std::string> e_data;
    double e_qmin = -1.0, e_qmax = 1.0;
    auto* ev = app.add_subcommand("evaluate", "report errors and learned functions");
    ev->add_option("--checkpoint", e_ckpt, "checkpoint file")->required();
    ev->add_option("--data", e_data, "dataset directories")->required();
    ev->add_option("--out", e_out, "report JSON path")->required();
    ev->add_option("--learned-csv", e_csv, "also export learned tables as CSV");
    ev->add_option("--query-min", e_qmin, "learned-function range start");
    ev->add_option("--query-max", e_qmax, "learned-function range end");

    // extract
    std::string x_ckpt, x_module, x_out;
    int x_species = 0, x_points = 201;
    double x_qmin = -1.0, x_qmax = 1.0;
    auto* ex = app.add_subcommand("extract", "tabulate one learned module");
    ex->add_option("--checkpoint", x_ckpt, "checkpoint file")->required();
    ex->add_option("--module", x_module,
                   "diffusion | advective_velocity | retardation | reaction")
        ->required();
    ex->add_option("--species", x_species, "species index");
    ex->add_option("--out", x_out, "CSV path")->required();
    ex->add_option("--points", x_points, "number of query points");
    ex->add_option("--query-min", x_qmin, "range start");
    ex->add_option("--query-max", x_qmax, "range end");

    // ingest
    std::string i_core, i_csv, i_out;
    auto* in = app.add_subcommand("ingest", "validate laboratory measurements");
    in->add_option("--core", i_core, "core sample id (1, 2, 2B)")->required();
    in->add_option("--csv", i_csv, "measurement file, time,location,value")
        ->required();
    in->add_option("--out", i_out, "normalized CSV output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            auto spec = datagen::registered_spec(datagen::family_from(g_family),
                                                 datagen::split_from(g_split));
            auto ds = datagen::generate(spec);
            if (g_sigma >= 0.0) ds = datagen::add_noise(ds, g_sigma, g_noise_seed);
            fs::path out_dir = data_path(g_out);
            OutputGuard guard(out_dir);
            guard.track(out_dir / "data.bin");
            guard.track(out_dir / "meta.json");
            datagen::save_dataset(ds, out_dir.string());
            if (g_csv) {
                guard.track(out_dir / "data.csv");
                datagen::export_csv(ds, out_dir / "data.csv");
            }
            guard.disarm();
            std::printf("%s/%s: %d frames, %zu values\n", g_family.c_str(),
                        g_split.c_str(), ds.spec.nt, ds.data.size());
            return 0;
        }
        if (tr->parsed()) return run_training(t);
        if (ab_poly->parsed()) {
            t.sets.push_back("ablation=polynomial");
            t.sets.push_back("poly_degree=" + std::to_string(ab_degree));
            return run_training(t);
        }
        if (ab_noise->parsed()) {
            t.sigma = ab_sigma;
            t.noise_seed = ab_noise_seed;
            return run_training(t);
        }
        if (ab_euler->parsed()) {
            t.sets.push_back("scheme=euler");
            t.sets.push_back("fixed_steps_per_interval=" +
                             std::to_string(ab_substeps));
            return run_training(t);
        }
        if (ev->parsed()) {
            model::FinnModel model(config_from_checkpoint(e_ckpt));
            ad::ParamStore store;
            nn::load_checkpoint(store, e_ckpt);
            std::vector<datagen::Dataset> splits;
            for (const auto& d : e_data)
                splits.push_back(datagen::load_dataset(data_path(d)));
            eval::EvalConfig ecfg;
            ecfg.query_min = e_qmin;
            ecfg.query_max = e_qmax;
            auto report = eval::evaluate(model, store, splits, ecfg);
            eval::write_report(report, e_out);
            if (!e_csv.empty()) eval::export_learned_csv(report, e_csv);
            for (const auto& entry : report.at("splits"))
                if (entry.contains("rmse"))
                    std::printf("%s/%s rmse %.6e\n",
                                entry.at("family").get<std::string>().c_str(),
                                entry.at("split").get<std::string>().c_str(),
                                entry.at("rmse").get<double>());
                else
                    std::printf("%s/%s failed: %s\n",
                                entry.at("family").get<std::string>().c_str(),
                                entry.at("split").get<std::string>().c_str(),
                                entry.at("error").get<std::string>().c_str());
            return 0;
        }
        if (ex->parsed()) {
            model::FinnModel model(config_from_checkpoint(x_ckpt));
            ad::ParamStore store;
            nn::load_checkpoint(store, x_ckpt);
            auto q = eval::query_grid(x_qmin, x_qmax, x_points);
            auto table =
                model.extract_learned_function(store, x_module, x_species, q);
            std::ofstream os(x_out);
            if (!os) throw std::runtime_error("cannot write " + x_out);
            os << "u,value\n";
            char line[80];
            for (const auto& row : table) {
                std::snprintf(line, sizeof(line), "%.17g,%.17g\n", row[0], row[1]);
                os << line;
            }
            std::printf("wrote %zu points to %s\n", table.size(), x_out.c_str());
            return 0;
        }
        if (in->parsed()) {
            const auto& core = lab::core_sample(i_core);
            auto ms = lab::ingest_csv(i_csv, core);
            auto kind = lab::classify(ms, core);
            if (!i_out.empty()) lab::export_measurements_csv(ms, i_out);
            std::printf("core %s: %zu %s measurements\n", core.id.c_str(),
                        ms.size(),
                        kind == lab::MeasurementKind::Breakthrough
                            ? "breakthrough" : "profile");
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace finn::cli
