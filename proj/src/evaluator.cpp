#include "finn/evaluator.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>

namespace finn::eval {

double rmse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("rmse: size mismatch");
    if (target.empty()) throw std::invalid_argument("rmse: empty input");
    double n = static_cast<double>(target.size());
    double mean = 0.0;
    for (double v : target) mean += v;
    mean /= n;
    double var = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        double c = target[i] - mean;
        var += c * c;
        double d = pred[i] - target[i];
        mse += d * d;
    }
    if (var == 0.0)
        throw std::invalid_argument("rmse: target has zero variance");
    return mse / var;
}

ConservationResult conservation_error(const model::FinnModel& model,
                                      ad::ParamStore& store,
                                      std::span<const double> u0,
                                      const integrator::IntegratorConfig& integ) {
    std::size_t n = model.state_size();
    if (u0.size() != n)
        throw std::invalid_argument("conservation_error: state size mismatch");
    double vol = model.cell_volume();
    std::size_t cells = model.cells();
    auto mass = [&](std::span<const double> u) {
        double m = 0.0;
        for (int s = 0; s < model.species_count(); ++s) {
            if (model.config().species[s].flux_source >= 0) continue;
            for (std::size_t i = 0; i < cells; ++i) m += u[s * cells + i] * vol;
        }
        return m;
    };

    auto rhs = [&](double, std::span<const double> u, std::span<double> d) {
        model::FlowTotals totals;
        model.rhs_plain(store, u.subspan(0, n), d.subspan(0, n), &totals);
        d[n] = totals.boundary;
        d[n + 1] = totals.source;
    };
    std::vector<double> aug(u0.begin(), u0.end());
    aug.push_back(0.0);
    aug.push_back(0.0);
    auto traj = integrator::integrate(rhs, aug, integ);
    if (!traj.complete)
        throw std::runtime_error("conservation_error: rollout aborted at t=" +
                                 std::to_string(traj.abort.time));
    const auto& last = traj.states.back();
    ConservationResult r;
    r.mass_change = mass(last) - mass(u0);
    r.boundary = last[n];
    r.source = last[n + 1];
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += std::abs(u0[i]) * vol;
    if (norm == 0.0) norm = 1.0;
    r.error = std::abs(r.mass_change - r.boundary - r.source) / norm;
    return r;
}

integrator::Trajectory rollout(const model::FinnModel& model,
                               ad::ParamStore& store,
                               const datagen::Dataset& data,
                               const integrator::IntegratorConfig& integ) {
    if (data.frame_size() != model.state_size())
        throw std::invalid_argument("rollout: dataset does not match model grid");
    integrator::IntegratorConfig cfg = integ;
    cfg.times = data.times;
    auto rhs = [&](double, std::span<const double> u, std::span<double> d) {
        model.rhs_plain(store, u, d);
    };
    auto first = data.frame(0);
    return integrator::integrate(rhs, std::vector<double>(first.begin(), first.end()), cfg);
}

std::vector<double> query_grid(double lo, double hi, int n) {
    if (n < 2) throw std::invalid_argument("query_grid: need at least 2 points");
    std::vector<double> q(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        q[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return q;
}

namespace {

/// Rows are [u, learned] or, when the ground truth is known for the family,
/// [u, learned, true, abs error].
nlohmann::ordered_json table_json(std::span<const double> u,
                                  std::span<const double> f,
                                  std::optional<datagen::Family> family,
                                  const std::string& true_name) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (family) {
            try {
                double t = datagen::true_constitutive(*family, true_name, u[i],
                                                      u[i]);
                if (std::isfinite(t)) {
                    rows.push_back({u[i], f[i], t, std::abs(f[i] - t)});
                    continue;
                }
            } catch (const std::exception&) {
                // family has no closed form under this name
            }
        }
        rows.push_back({u[i], f[i]});
    }
    return rows;
}

}  // namespace

nlohmann::ordered_json evaluate(const model::FinnModel& model,
                                ad::ParamStore& store,
                                const std::vector<datagen::Dataset>& splits,
                                const EvalConfig& cfg) {
    nlohmann::ordered_json report;
    report["parameters"] = store.total_size();
    report["parameters_hash"] =
        "fnv1a64:" + datagen::content_hash_hex(store.flatten_values());

    nlohmann::ordered_json stencils;
    int axes = (model.config().grid.dim == 1 || model.config().share_axis_stencil)
                   ? 1 : 2;
    for (int a = 0; a < axes; ++a) {
        auto w = model.stencil_report(store, a);
        stencils[model.stencil_param_name(a)] = {w[0], w[1]};
    }
    report["stencil"] = stencils;

    nlohmann::ordered_json split_entries = nlohmann::ordered_json::array();
    for (const auto& ds : splits) {
        nlohmann::ordered_json e;
        e["family"] = datagen::family_name(ds.spec.family);
        e["split"] = datagen::split_name(ds.spec.split);
        e["data_hash"] = "fnv1a64:" + datagen::content_hash_hex(ds.data);
        try {
            // each split carries its own registered boundary conditions (the
            // out-distribution sorption split changes the inflow value)
            model::ModelConfig mc = model.config();
            for (std::size_t s = 0; s < mc.species.size(); ++s)
                mc.species[s].bcs =
                    datagen::boundary_conditions(ds.spec, static_cast<int>(s));
            model::FinnModel split_model(mc);
            auto traj = rollout(split_model, store, ds, cfg.integ);
            if (!traj.complete) {
                e["error"] = "rollout aborted at t=" +
                             std::to_string(traj.abort.time) + ": " +
                             traj.abort.message;
            } else {
                std::vector<double> pred;
                pred.reserve(ds.data.size());
                for (const auto& s : traj.states)
                    pred.insert(pred.end(), s.begin(), s.end());
                e["rmse"] = rmse(pred, ds.data);
                integrator::IntegratorConfig ic = cfg.integ;
                ic.times = ds.times;
                auto c = conservation_error(split_model, store, ds.frame(0), ic);
                e["conservation"] = {{"error", c.error},
                                     {"mass_change", c.mass_change},
                                     {"boundary", c.boundary},
                                     {"source", c.source}};
            }
        } catch (const std::exception& ex) {
            e["error"] = ex.what();
        }
        split_entries.push_back(e);
    }
    report["splits"] = split_entries;

    nlohmann::ordered_json learned;
    std::optional<datagen::Family> family;
    if (!splits.empty()) family = splits.front().spec.family;
    auto q = query_grid(cfg.query_min, cfg.query_max, cfg.query_points);
    auto try_table = [&](const std::string& which, int species,
                         const std::string& label) {
        try {
            auto tab = model.extract_learned_function(store, which, species, q);
            std::vector<double> f(tab.size());
            for (std::size_t i = 0; i < tab.size(); ++i) f[i] = tab[i][1];
            learned[label] = table_json(q, f, family, which);
        } catch (const std::invalid_argument&) {
            // module absent or not a learned function
        }
    };
    for (int s = 0; s < model.species_count(); ++s) {
        const auto& sp = model.config().species[s];
        try_table("diffusion", s, sp.name + ".diffusion");
        try_table("advective_velocity", s, sp.name + ".advective_velocity");
        try_table("retardation", s, sp.name + ".retardation");
    }
    if (model.config().reaction.present()) {
        if (model.species_count() == 1) {
            try_table("reaction", 0, "reaction");
        } else {
            // two-species reaction tabulated along the u1 = u2 diagonal
            for (int out = 0; out < 2; ++out) {
                auto f = model.eval_reaction2(store, q, q, out);
                learned["reaction.u" + std::to_string(out + 1)] =
                    table_json(q, f, family, "reaction" + std::to_string(out + 1));
            }
        }
    }
    report["learned"] = learned;
    return report;
}

void write_report(const nlohmann::ordered_json& report,
                  const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << report.dump(2) << "\n";
}

void export_learned_csv(const nlohmann::ordered_json& report,
                        const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "module,u,learned,true,abs_error\n";
    char line[192];
    for (const auto& [name, rows] : report.at("learned").items())
        for (const auto& row : rows) {
            if (row.size() >= 4)
                std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%.17g,%.17g\n",
                              name.c_str(), row[0].get<double>(),
                              row[1].get<double>(), row[2].get<double>(),
                              row[3].get<double>());
            else
                std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,,\n",
                              name.c_str(), row[0].get<double>(),
                              row[1].get<double>());
            os << line;
        }
}

}  // namespace finn::eval
