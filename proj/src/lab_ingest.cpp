#include "finn/lab_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace finn::lab {

namespace {

constexpr double kFreundlichK = 3.5e-4;
constexpr double kFreundlichNf = 0.874;

double retardation(const CoreSample& core, double u) {
    u = std::max(u, datagen::kFreundlichClamp);
    return 1.0 + (1.0 - core.porosity) / core.porosity * core.bulk_density *
                     kFreundlichK * kFreundlichNf *
                     std::pow(u, kFreundlichNf - 1.0);
}

// the sample registry ships as a versioned JSON resource; geometry in meters,
// durations in days, concentrations in kg/m^3
constexpr const char* kCoreRegistry = R"json({
  "version": 1,
  "cores": [
    {"id": "1",  "diffusion": 2.00e-5, "length": 0.0254,  "radius": 0.02375,
     "t_end": 38.81, "flow_rate": 1.01e-4, "solubility": 1.4},
    {"id": "2",  "diffusion": 2.00e-5, "length": 0.02604, "radius": 0.02375,
     "t_end": 39.82, "flow_rate": 1.04e-4, "solubility": 1.6},
    {"id": "2B", "diffusion": 2.78e-5, "length": 0.105,   "radius": 0.02375,
     "t_end": 48.88, "flow_rate": 0.0,    "solubility": 1.4,
     "no_flow_bottom": true}
  ]
})json";

}  // namespace

const std::vector<CoreSample>& core_samples() {
    static const std::vector<CoreSample> cores = [] {
        auto j = nlohmann::json::parse(kCoreRegistry);
        if (j.at("version").get<int>() != 1)
            throw std::runtime_error("unsupported core registry version");
        std::vector<CoreSample> c;
        for (const auto& e : j.at("cores")) {
            CoreSample s;
            s.id = e.at("id").get<std::string>();
            s.diffusion = e.at("diffusion").get<double>();
            s.length = e.at("length").get<double>();
            s.radius = e.at("radius").get<double>();
            s.t_end = e.at("t_end").get<double>();
            s.flow_rate = e.at("flow_rate").get<double>();
            s.solubility = e.at("solubility").get<double>();
            s.porosity = e.value("porosity", 0.288);
            s.bulk_density = e.value("bulk_density", 1957.0);
            s.no_flow_bottom = e.value("no_flow_bottom", false);
            s.cauchy_coefficient = e.value("cauchy_coefficient", 0.0);
            c.push_back(std::move(s));
        }
        return c;
    }();
    return cores;
}

const CoreSample& core_sample(const std::string& id) {
    for (const auto& c : core_samples())
        if (c.id == id) return c;
    throw std::invalid_argument("unknown core sample '" + id + "'");
}

std::vector<Measurement> ingest_csv(const std::filesystem::path& path,
                                    const CoreSample& core) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::vector<Measurement> out;
    std::string line;
    int row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        if (row == 1 && line.find_first_of("0123456789") == std::string::npos)
            continue;  // header
        std::istringstream ss(line);
        Measurement m;
        char c1 = 0, c2 = 0;
        if (!(ss >> m.t >> c1 >> m.x >> c2 >> m.value) || c1 != ',' || c2 != ',')
            throw std::runtime_error(path.string() + " row " +
                                     std::to_string(row) + ": malformed line");
        auto bad = [&](const std::string& why) {
            throw std::runtime_error(path.string() + " row " +
                                     std::to_string(row) + ": " + why);
        };
        if (!std::isfinite(m.t) || !std::isfinite(m.x) || !std::isfinite(m.value))
            bad("non-finite entry");
        if (m.t < 0.0 || m.t > core.t_end * (1.0 + 1e-9))
            bad("time outside the experiment duration");
        if (m.x < 0.0 || m.x > core.length * (1.0 + 1e-9))
            bad("location off the column");
        if (m.value < 0.0) bad("negative concentration");
        out.push_back(m);
    }
    if (out.empty())
        throw std::runtime_error(path.string() + ": no measurements");
    return out;
}

MeasurementKind classify(const std::vector<Measurement>& ms,
                         const CoreSample& core) {
    bool at_outlet = true, at_end = true;
    for (const auto& m : ms) {
        if (std::abs(m.x - core.length) > 1e-3 * core.length) at_outlet = false;
        if (std::abs(m.t - core.t_end) > 1e-6 * core.t_end) at_end = false;
    }
    if (at_outlet && !at_end) return MeasurementKind::Breakthrough;
    if (at_end) return MeasurementKind::Profile;
    throw std::invalid_argument(
        "measurements are neither an outlet series nor a final-time profile");
}

model::ModelConfig core_model_config(const CoreSample& core, int nx) {
    model::ModelConfig cfg;
    cfg.grid = {1, {0.0, 0.0}, {core.length, 1.0}, {nx, 1}};

    pde::BoundaryCondition top{pde::BcKind::Dirichlet, core.solubility, 0.0};
    pde::BoundaryCondition bottom;
    if (core.no_flow_bottom) {
        bottom = {pde::BcKind::Neumann, 0.0, 0.0};
    } else {
        double c = core.cauchy_coefficient > 0.0 ? core.cauchy_coefficient
                                                 : core.diffusion;
        bottom = {pde::BcKind::Cauchy, 0.0, c};
    }

    model::SpeciesSpec u;
    u.name = "u";
    u.diffusion.kind = model::ModuleKind::Scalar;
    u.diffusion.value = core.diffusion;
    u.diffusion.trainable = false;
    u.storage.kind = model::ModuleKind::Network;
    u.storage.widths = {1, 10, 20, 10, 1};
    u.storage.output = nn::OutputTransform::Positive;
    u.bcs = {top, bottom};
    cfg.species.push_back(std::move(u));

    model::SpeciesSpec ut;
    ut.name = "u_t";
    ut.diffusion.kind = model::ModuleKind::Scalar;
    ut.diffusion.value = core.diffusion * core.porosity;
    ut.diffusion.trainable = false;
    ut.flux_source = 0;
    cfg.species.push_back(std::move(ut));
    return cfg;
}

std::vector<train::Observation> observations(const CoreSample& core,
                                             const std::vector<Measurement>& ms,
                                             MeasurementKind kind, int nx,
                                             std::vector<double>& times) {
    if (kind == MeasurementKind::Breakthrough && core.no_flow_bottom)
        throw std::invalid_argument(
            "core '" + core.id + "' has a sealed outlet; no breakthrough exists");
    times.clear();
    times.push_back(0.0);
    for (const auto& m : ms) times.push_back(m.t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.size() < 2)
        throw std::invalid_argument("observations: need at least one time > 0");

    double dx = core.length / (nx - 1);
    std::vector<train::Observation> obs;
    obs.reserve(ms.size());
    for (const auto& m : ms) {
        train::Observation o;
        o.t = m.t;
        o.cell = static_cast<std::size_t>(
            std::clamp(static_cast<int>(std::lround(m.x / dx)), 0, nx - 1));
        o.species = kind == MeasurementKind::Breakthrough ? 0 : 1;
        o.value = m.value;
        obs.push_back(o);
    }
    return obs;
}

std::vector<double> predict(const model::FinnModel& model, ad::ParamStore& store,
                            const CoreSample& core,
                            const std::vector<Measurement>& ms,
                            MeasurementKind kind,
                            const integrator::IntegratorConfig& integ) {
    int nx = model.config().grid.n[0];
    std::vector<double> times;
    auto obs = observations(core, ms, kind, nx, times);
    integrator::IntegratorConfig cfg = integ;
    cfg.times = times;
    std::vector<double> u0(model.state_size(), 0.0);
    auto rhs = [&](double, std::span<const double> u, std::span<double> d) {
        model.rhs_plain(store, u, d);
    };
    auto traj = integrator::integrate(rhs, u0, cfg);
    if (!traj.complete)
        throw std::runtime_error("predict: rollout aborted at t=" +
                                 std::to_string(traj.abort.time));
    std::vector<double> out;
    out.reserve(obs.size());
    std::size_t cells = model.cells();
    for (const auto& o : obs) {
        auto it = std::lower_bound(times.begin(), times.end(), o.t);
        std::size_t frame = static_cast<std::size_t>(it - times.begin());
        out.push_back(traj.states[frame][o.species * cells + o.cell]);
    }
    return out;
}

double measurement_rmse(const model::FinnModel& model, ad::ParamStore& store,
                        const CoreSample& core,
                        const std::vector<Measurement>& ms,
                        MeasurementKind kind,
                        const integrator::IntegratorConfig& integ) {
    auto pred = predict(model, store, core, ms, kind, integ);
    std::vector<double> target(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) target[i] = ms[i].value;
    return eval::rmse(pred, target);
}

TransferResult transfer_evaluate(const ad::ParamStore& trained,
                                 const CoreSample& target,
                                 const std::vector<Measurement>& ms,
                                 MeasurementKind kind,
                                 const integrator::IntegratorConfig& integ) {
    model::FinnModel model(core_model_config(target));
    ad::ParamStore store;
    model.init_params(store, 0);
    store.assign_values(trained.flatten_values());
    TransferResult r;
    r.predicted = predict(model, store, target, ms, kind, integ);
    std::vector<double> values(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) values[i] = ms[i].value;
    r.rmse = eval::rmse(r.predicted, values);
    return r;
}

std::vector<Measurement> synthetic_breakthrough(const CoreSample& core, int n,
                                                int nx) {
    if (core.no_flow_bottom)
        throw std::invalid_argument(
            "core '" + core.id + "' has a sealed outlet; no breakthrough exists");
    if (n < 1) throw std::invalid_argument("synthetic_breakthrough: n < 1");
    double dx = core.length / (nx - 1);
    double D = core.diffusion;
    pde::BoundaryCondition top{pde::BcKind::Dirichlet, core.solubility, 0.0};
    double cc = core.cauchy_coefficient > 0.0 ? core.cauchy_coefficient : D;
    pde::BoundaryCondition bottom{pde::BcKind::Cauchy, 0.0, cc};

    auto rhs = [&](double, std::span<const double> u, std::span<double> d) {
        for (int i = 0; i < nx; ++i) {
            double uc = u[static_cast<std::size_t>(i)];
            double ul = i > 0 ? u[static_cast<std::size_t>(i - 1)]
                              : pde::ghost_value(top, uc, dx).value;
            double ur = i < nx - 1 ? u[static_cast<std::size_t>(i + 1)]
                                   : pde::ghost_value(bottom, uc, dx).value;
            double lap = (ul - uc) + (ur - uc);
            d[static_cast<std::size_t>(i)] =
                D * lap / (dx * dx) / retardation(core, uc);
        }
    };

    integrator::IntegratorConfig cfg;
    cfg.scheme = integrator::Scheme::DormandPrince45;
    cfg.atol = 1e-8;
    cfg.rtol = 1e-8;
    cfg.max_steps_per_interval = 2000000;
    cfg.times.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        cfg.times[static_cast<std::size_t>(k)] = core.t_end * k / n;
    std::vector<double> u0(static_cast<std::size_t>(nx), 0.0);
    auto traj = integrator::integrate(rhs, u0, cfg);
    if (!traj.complete)
        throw std::runtime_error("synthetic_breakthrough: solver aborted at t=" +
                                 std::to_string(traj.abort.time));
    std::vector<Measurement> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k)
        out.push_back({cfg.times[static_cast<std::size_t>(k)], core.length,
                       traj.states[static_cast<std::size_t>(k)]
                                  [static_cast<std::size_t>(nx - 1)]});
    return out;
}

void export_measurements_csv(const std::vector<Measurement>& ms,
                             const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "time,location,value\n";
    char line[96];
    for (const auto& m : ms) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", m.t, m.x,
                      m.value);
        os << line;
    }
}

}  // namespace finn::lab
