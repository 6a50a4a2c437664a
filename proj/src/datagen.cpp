#include "finn/datagen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace finn::datagen {

namespace {

constexpr double kPi = std::numbers::pi;

constexpr double kBurgersD = 0.01 / kPi;

constexpr double kSorpD = 5e-4;
constexpr double kSorpPhi = 0.29;
constexpr double kSorpRhoS = 2880.0;
constexpr double kSorpK = 3.5e-4;
constexpr double kSorpNf = 0.874;

constexpr double kReactD1 = 1e-3;
constexpr double kReactD2 = 5e-3;
constexpr double kReactK = 5e-3;

constexpr double kAllenCahnD = 1e-4;

double freundlich(double u) {
    return 1.0 + (1.0 - kSorpPhi) / kSorpPhi * kSorpRhoS * kSorpK * kSorpNf *
                     std::pow(u, kSorpNf - 1.0);
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::Burgers1D: return "burgers_1d";
        case Family::Burgers2D: return "burgers_2d";
        case Family::DiffusionSorption: return "diffusion_sorption";
        case Family::DiffusionReaction2D: return "diffusion_reaction_2d";
        case Family::AllenCahn: return "allen_cahn";
    }
    return "?";
}

Family family_from(const std::string& s) {
    if (s == "burgers_1d") return Family::Burgers1D;
    if (s == "burgers_2d") return Family::Burgers2D;
    if (s == "diffusion_sorption") return Family::DiffusionSorption;
    if (s == "diffusion_reaction_2d") return Family::DiffusionReaction2D;
    if (s == "allen_cahn") return Family::AllenCahn;
    throw std::invalid_argument("unknown family '" + s + "'");
}

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::InDisTest: return "in_dis_test";
        case Split::OutDisTest: return "out_dis_test";
    }
    return "?";
}

Split split_from(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "in_dis_test") return Split::InDisTest;
    if (s == "out_dis_test") return Split::OutDisTest;
    throw std::invalid_argument("unknown split '" + s + "'");
}

std::vector<double> EquationSpec::times() const {
    std::vector<double> t(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i)
        t[static_cast<std::size_t>(i)] =
            t_begin + (t_end - t_begin) * i / (nt - 1);
    return t;
}

EquationSpec registered_spec(Family family, Split split) {
    EquationSpec s;
    s.family = family;
    s.split = split;
    switch (family) {
        case Family::Burgers1D:
            s.grid = {1, {-1.0, 0.0}, {1.0, 1.0}, {49, 1}};
            s.species = 1;
            s.nt = 201;
            s.t_begin = split == Split::InDisTest ? 1.0 : 0.0;
            s.t_end = split == Split::InDisTest ? 2.0 : 1.0;
            break;
        case Family::Burgers2D:
            s.grid = {2, {-1.0, -1.0}, {1.0, 1.0}, {49, 49}};
            s.species = 1;
            s.nt = 201;
            s.t_begin = split == Split::InDisTest ? 1.0 : 0.0;
            s.t_end = split == Split::InDisTest ? 2.0 : 1.0;
            break;
        case Family::DiffusionSorption:
            s.grid = {1, {0.0, 0.0}, {1.0, 1.0}, {26, 1}};
            s.species = 2;
            if (split == Split::Train) {
                s.t_begin = 0.0;
                s.t_end = 2500.0;
                s.nt = 501;
            } else {
                // out-dis matches in-dis except for the inflow value
                s.t_begin = 2500.0;
                s.t_end = 10000.0;
                s.nt = 1501;
            }
            break;
        case Family::DiffusionReaction2D:
            s.grid = {2, {-1.0, -1.0}, {1.0, 1.0}, {49, 49}};
            s.species = 2;
            if (split == Split::InDisTest) {
                s.t_begin = 10.0;
                s.t_end = 50.0;
                s.nt = 401;
            } else {
                s.t_begin = 0.0;
                s.t_end = 10.0;
                s.nt = 101;
            }
            break;
        case Family::AllenCahn:
            s.grid = {1, {-1.0, 0.0}, {1.0, 1.0}, {49, 1}};
            s.species = 1;
            s.nt = 201;
            s.t_begin = split == Split::InDisTest ? 0.5 : 0.0;
            s.t_end = split == Split::InDisTest ? 1.0 : 0.5;
            break;
    }
    return s;
}

double true_constitutive(Family family, const std::string& name, double u,
                         double u2) {
    switch (family) {
        case Family::Burgers1D:
        case Family::Burgers2D:
            if (name == "diffusion") return kBurgersD;
            if (name == "advective_velocity") return u;
            break;
        case Family::DiffusionSorption:
            if (name == "diffusion") return kSorpD;
            if (name == "porosity") return kSorpPhi;
            if (name == "retardation")
                return u <= 0.0 ? std::numeric_limits<double>::infinity()
                                : freundlich(u);
            break;
        case Family::DiffusionReaction2D:
            if (name == "diffusion1") return kReactD1;
            if (name == "diffusion2") return kReactD2;
            if (name == "k") return kReactK;
            if (name == "reaction1") return u - u * u * u - kReactK - u2;
            if (name == "reaction2") return u - u2;
            break;
        case Family::AllenCahn:
            if (name == "diffusion") return kAllenCahnD;
            if (name == "reaction") return 5.0 * u - 5.0 * u * u * u;
            break;
    }
    throw std::invalid_argument("no constitutive '" + name + "' for " +
                                family_name(family));
}

std::vector<pde::BoundaryCondition> boundary_conditions(const EquationSpec& spec,
                                                        int species) {
    using pde::BcKind;
    using pde::BoundaryCondition;
    (void)species;
    switch (spec.family) {
        case Family::Burgers1D:
            return {{BcKind::Dirichlet, 0.0, 0.0}, {BcKind::Dirichlet, 0.0, 0.0}};
        case Family::Burgers2D:
            return std::vector<BoundaryCondition>(4, {BcKind::Dirichlet, 0.0, 0.0});
        case Family::DiffusionSorption: {
            double us = spec.split == Split::OutDisTest ? 0.7 : 1.0;
            return {{BcKind::Dirichlet, us, 0.0}, {BcKind::Cauchy, 0.0, kSorpD}};
        }
        case Family::DiffusionReaction2D:
            return std::vector<BoundaryCondition>(4, {BcKind::Neumann, 0.0, 0.0});
        case Family::AllenCahn:
            return {{BcKind::Periodic, 0.0, 0.0}, {BcKind::Periodic, 0.0, 0.0}};
    }
    throw std::logic_error("unknown family");
}

namespace {

/// Sum of face exchange terms per cell: (u_nb - u_c) * D(u_c)/dx^2 plus the
/// upwind-gated (u_nb - u_c) * v/dx contribution; Neumann faces contribute
/// the prescribed flux directly.
void face_sum(const pde::Grid& grid, std::span<const double> u,
              const std::vector<pde::BoundaryCondition>& bcs,
              const std::function<double(double)>& dcoef,
              const std::function<double(double)>& vel,
              std::span<double> out) {
    int nx = grid.n[0];
    int ny = grid.dim == 2 ? grid.n[1] : 1;
    int faces = pde::face_count(grid.dim);
    std::fill(out.begin(), out.end(), 0.0);
    for (int f = 0; f < faces; ++f) {
        int axis = f < 2 ? 0 : 1;
        bool min_side = (f % 2 == 0);
        double dx = grid.spacing(axis);
        const auto& bc = bcs[static_cast<std::size_t>(f)];
        for (int iy = 0; iy < ny; ++iy) {
            for (int ix = 0; ix < nx; ++ix) {
                int idx = iy * nx + ix;
                double uc = u[static_cast<std::size_t>(idx)];
                int jx = ix, jy = iy;
                int& jt = axis == 0 ? jx : jy;
                int nt = axis == 0 ? nx : ny;
                jt += min_side ? -1 : 1;
                double un;
                if (jt >= 0 && jt < nt) {
                    un = u[static_cast<std::size_t>(jy * nx + jx)];
                } else if (bc.kind == pde::BcKind::Neumann) {
                    out[static_cast<std::size_t>(idx)] += bc.value;
                    continue;
                } else {
                    jt = min_side ? nt - 1 : 0;
                    pde::GhostResult g = pde::ghost_value(
                        bc, uc, dx, u[static_cast<std::size_t>(jy * nx + jx)]);
                    un = g.value;
                }
                double st = un - uc;
                double term = st * dcoef(uc) / (dx * dx);
                if (vel) {
                    double g = model::FinnModel::upwind_gate(vel(uc), min_side);
                    term += st * g / dx;
                }
                out[static_cast<std::size_t>(idx)] += term;
            }
        }
    }
}

std::vector<double> closed_form_ic(const EquationSpec& spec) {
    const auto& g = spec.grid;
    std::size_t cells = g.cells();
    std::vector<double> u(cells * spec.species, 0.0);
    auto x = g.coords(0);
    std::vector<double> y = g.dim == 2 ? g.coords(1) : std::vector<double>{0.0};
    int nx = g.n[0];
    auto fill = [&](int species, auto&& fn) {
        for (std::size_t iy = 0; iy < y.size(); ++iy)
            for (int ix = 0; ix < nx; ++ix)
                u[species * cells + iy * nx + ix] = fn(x[ix], y[iy]);
    };
    bool out = spec.split == Split::OutDisTest;
    switch (spec.family) {
        case Family::Burgers1D:
            fill(0, [&](double xi, double) {
                return out ? std::sin(kPi * xi) : -std::sin(kPi * xi);
            });
            break;
        case Family::Burgers2D:
            fill(0, [&](double xi, double yi) {
                return out ? -std::sin(kPi * (xi - yi)) : -std::sin(kPi * (xi + yi));
            });
            break;
        case Family::DiffusionSorption:
            break;  // zero everywhere
        case Family::DiffusionReaction2D: {
            double shift = out ? -0.5 : 0.0;
            auto ic = [&](double xi, double yi) {
                return std::sin(kPi * (xi + 1.0) / 2.0) *
                           std::sin(kPi * (yi + 1.0) / 2.0) +
                       shift;
            };
            fill(0, ic);
            fill(1, ic);
            break;
        }
        case Family::AllenCahn:
            fill(0, [&](double xi, double) {
                return out ? std::sin(kPi * xi / 2.0) : xi * xi * std::cos(kPi * xi);
            });
            break;
    }
    return u;
}

bool chains_from_train(const EquationSpec& spec) {
    if (spec.split == Split::InDisTest) return true;
    return spec.split == Split::OutDisTest &&
           spec.family == Family::DiffusionSorption;
}

std::vector<double> initial_state(const EquationSpec& spec,
                                  const GenerateConfig& cfg) {
    if (!chains_from_train(spec)) return closed_form_ic(spec);
    EquationSpec train = registered_spec(spec.family, Split::Train);
    train.grid = spec.grid;  // convergence studies rescale the grid
    Dataset parent = generate(train, cfg);
    auto last = parent.frame(parent.spec.nt - 1);
    return std::vector<double>(last.begin(), last.end());
}

}  // namespace

void reference_rhs(const EquationSpec& spec, std::span<const double> u,
                   std::span<double> dudt) {
    std::size_t cells = spec.grid.cells();
    if (u.size() != cells * spec.species || dudt.size() != u.size())
        throw std::invalid_argument("reference_rhs: state size mismatch");
    auto bcs = boundary_conditions(spec, 0);
    auto u0 = u.subspan(0, cells);
    auto d0 = dudt.subspan(0, cells);
    switch (spec.family) {
        case Family::Burgers1D:
        case Family::Burgers2D:
            face_sum(spec.grid, u0, bcs, [](double) { return kBurgersD; },
                     [](double uc) { return uc; }, d0);
            break;
        case Family::DiffusionSorption: {
            face_sum(spec.grid, u0, bcs, [](double) { return kSorpD; }, nullptr,
                     d0);
            auto d1 = dudt.subspan(cells, cells);
            for (std::size_t i = 0; i < cells; ++i) {
                double base = d0[i];
                d1[i] = kSorpPhi * base;
                d0[i] = base / freundlich(std::max(u0[i], kFreundlichClamp));
            }
            break;
        }
        case Family::DiffusionReaction2D: {
            auto u1 = u.subspan(cells, cells);
            auto d1 = dudt.subspan(cells, cells);
            face_sum(spec.grid, u0, bcs, [](double) { return kReactD1; }, nullptr,
                     d0);
            face_sum(spec.grid, u1, bcs, [](double) { return kReactD2; }, nullptr,
                     d1);
            for (std::size_t i = 0; i < cells; ++i) {
                double a = u0[i], b = u1[i];
                d0[i] += a - a * a * a - kReactK - b;
                d1[i] += a - b;
            }
            break;
        }
        case Family::AllenCahn:
            face_sum(spec.grid, u0, bcs, [](double) { return kAllenCahnD; },
                     nullptr, d0);
            for (std::size_t i = 0; i < cells; ++i)
                d0[i] += 5.0 * u0[i] - 5.0 * u0[i] * u0[i] * u0[i];
            break;
    }
}

std::span<const double> Dataset::frame(int t) const {
    std::size_t fs = frame_size();
    return std::span<const double>(data).subspan(static_cast<std::size_t>(t) * fs,
                                                 fs);
}

std::vector<int> Dataset::dims() const {
    std::vector<int> d{spec.nt, spec.species, spec.grid.n[0]};
    if (spec.grid.dim == 2) d.push_back(spec.grid.n[1]);
    return d;
}

Dataset generate(const EquationSpec& spec, const GenerateConfig& cfg) {
    spec.grid.validate();
    std::vector<double> u0 = initial_state(spec, cfg);
    integrator::IntegratorConfig icfg;
    icfg.scheme = integrator::Scheme::DormandPrince45;
    icfg.atol = cfg.atol;
    icfg.rtol = cfg.rtol;
    icfg.max_steps_per_interval = cfg.max_steps_per_interval;
    icfg.times = spec.times();
    auto rhs = [&spec](double, std::span<const double> u, std::span<double> d) {
        reference_rhs(spec, u, d);
    };
    integrator::Trajectory traj = integrator::integrate(rhs, u0, icfg);
    if (!traj.complete)
        throw std::runtime_error("reference solver aborted at t=" +
                                 std::to_string(traj.abort.time) + ": " +
                                 traj.abort.message);
    Dataset ds;
    ds.spec = spec;
    ds.times = icfg.times;
    ds.data.reserve(traj.states.size() * u0.size());
    for (const auto& s : traj.states)
        ds.data.insert(ds.data.end(), s.begin(), s.end());
    return ds;
}

Dataset add_noise(const Dataset& ds, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma < 0");
    Dataset out = ds;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (auto& v : out.data) v += dist(rng);
    out.noise = {sigma, seed};
    return out;
}

std::string content_hash_hex(std::span<const double> values) {
    // FNV-1a 64 over the raw little-endian bytes
    std::uint64_t h = 14695981039346656037ull;
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr char kDataMagic[4] = {'F', 'V', 'M', 'D'};
constexpr std::uint32_t kDataVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "data.bin", std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + (dir / "data.bin").string());
        os.write(kDataMagic, 4);
        write_le(os, kDataVersion);
        auto dims = ds.dims();
        write_le(os, static_cast<std::uint32_t>(dims.size()));
        for (int d : dims) write_le(os, static_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(ds.data.data()),
                 static_cast<std::streamsize>(ds.data.size() * sizeof(double)));
        if (!os) throw std::runtime_error("write failed: " + (dir / "data.bin").string());
    }
    nlohmann::ordered_json meta;
    meta["format"] = "fvm-dataset";
    meta["version"] = kDataVersion;
    meta["family"] = family_name(ds.spec.family);
    meta["split"] = split_name(ds.spec.split);
    meta["grid"] = model::grid_to_json(ds.spec.grid);
    meta["species"] = ds.spec.species;
    meta["t_begin"] = ds.spec.t_begin;
    meta["t_end"] = ds.spec.t_end;
    meta["nt"] = ds.spec.nt;
    meta["noise"] = {{"sigma", ds.noise.sigma}, {"seed", ds.noise.seed}};
    meta["hash"] = "fnv1a64:" + content_hash_hex(ds.data);
    std::ofstream ms(dir / "meta.json");
    ms << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream ms(dir / "meta.json");
    if (!ms) throw std::runtime_error("cannot read " + (dir / "meta.json").string());
    nlohmann::json meta = nlohmann::json::parse(ms);
    Dataset ds;
    ds.spec.family = family_from(meta.at("family"));
    ds.spec.split = split_from(meta.at("split"));
    ds.spec.grid = model::grid_from_json(meta.at("grid"));
    ds.spec.species = meta.at("species").get<int>();
    ds.spec.t_begin = meta.at("t_begin").get<double>();
    ds.spec.t_end = meta.at("t_end").get<double>();
    ds.spec.nt = meta.at("nt").get<int>();
    ds.noise.sigma = meta.at("noise").at("sigma").get<double>();
    ds.noise.seed = meta.at("noise").at("seed").get<std::uint64_t>();
    ds.times = ds.spec.times();

    std::ifstream is(dir / "data.bin", std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + (dir / "data.bin").string());
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, kDataMagic, 4) != 0)
        throw std::runtime_error("bad dataset magic in " + dir.string());
    auto version = read_le<std::uint32_t>(is);
    if (version != kDataVersion)
        throw std::runtime_error("unsupported dataset version");
    auto rank = read_le<std::uint32_t>(is);
    std::size_t total = 1;
    std::vector<int> dims(rank);
    for (auto& d : dims) {
        d = static_cast<int>(read_le<std::uint64_t>(is));
        total *= static_cast<std::size_t>(d);
    }
    if (dims != ds.dims())
        throw std::runtime_error("dataset dims disagree with metadata in " +
                                 dir.string());
    ds.data.resize(total);
    is.read(reinterpret_cast<char*>(ds.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!is) throw std::runtime_error("truncated dataset in " + dir.string());
    std::string hash = meta.at("hash").get<std::string>();
    if (hash != "fnv1a64:" + content_hash_hex(ds.data))
        throw std::runtime_error("dataset hash mismatch in " + dir.string());
    return ds;
}

void export_csv(const Dataset& ds, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    bool two_d = ds.spec.grid.dim == 2;
    os << (two_d ? "t,x,y,species,value\n" : "t,x,species,value\n");
    auto x = ds.spec.grid.coords(0);
    std::vector<double> y =
        two_d ? ds.spec.grid.coords(1) : std::vector<double>{0.0};
    int nx = ds.spec.grid.n[0];
    std::size_t cells = ds.spec.grid.cells();
    char line[160];
    for (int t = 0; t < ds.spec.nt; ++t) {
        auto frame = ds.frame(t);
        for (int s = 0; s < ds.spec.species; ++s)
            for (std::size_t iy = 0; iy < y.size(); ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    double v = frame[s * cells + iy * nx + ix];
                    if (two_d)
                        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%d,%.17g\n",
                                      ds.times[static_cast<std::size_t>(t)], x[ix],
                                      y[iy], s, v);
                    else
                        std::snprintf(line, sizeof(line), "%.17g,%.17g,%d,%.17g\n",
                                      ds.times[static_cast<std::size_t>(t)], x[ix],
                                      s, v);
                    os << line;
                }
    }
}

// ---------------------------------------------------------------------------
// Model configuration factories

namespace {

model::ModuleSpec scalar_module(double value, bool trainable,
                                bool positive = false) {
    model::ModuleSpec m;
    m.kind = model::ModuleKind::Scalar;
    m.value = value;
    m.trainable = trainable;
    if (positive) m.output = nn::OutputTransform::Positive;
    return m;
}

model::ModuleSpec network_module(std::vector<int> widths,
                                 nn::OutputTransform out) {
    model::ModuleSpec m;
    m.kind = model::ModuleKind::Network;
    m.widths = std::move(widths);
    m.output = out;
    return m;
}

model::ModuleSpec polynomial_module(std::vector<double> coeffs, int degree = 0) {
    model::ModuleSpec m;
    m.kind = model::ModuleKind::Polynomial;
    m.coeffs = std::move(coeffs);
    m.degree = degree;
    m.trainable = false;
    return m;
}

}  // namespace

model::ModelConfig learned_model_config(const EquationSpec& spec) {
    model::ModelConfig cfg;
    cfg.grid = spec.grid;
    switch (spec.family) {
        case Family::Burgers1D:
        case Family::Burgers2D: {
            model::SpeciesSpec sp;
            sp.name = "u";
            sp.diffusion = scalar_module(2e-3, true, true);
            sp.advection = network_module({1, 10, 20, 10, 1},
                                          nn::OutputTransform::Identity);
            sp.bcs = boundary_conditions(spec, 0);
            cfg.species.push_back(std::move(sp));
            break;
        }
        case Family::DiffusionSorption: {
            model::SpeciesSpec u;
            u.name = "u";
            u.diffusion = scalar_module(kSorpD, false);
            u.storage = network_module({1, 10, 20, 10, 1},
                                       nn::OutputTransform::Positive);
            u.bcs = boundary_conditions(spec, 0);
            cfg.species.push_back(std::move(u));
            model::SpeciesSpec ut;
            ut.name = "u_t";
            ut.diffusion = scalar_module(kSorpD * kSorpPhi, false);
            ut.flux_source = 0;
            cfg.species.push_back(std::move(ut));
            break;
        }
        case Family::DiffusionReaction2D: {
            for (int s = 0; s < 2; ++s) {
                model::SpeciesSpec sp;
                sp.name = s == 0 ? "u1" : "u2";
                sp.diffusion = scalar_module(1e-3, true, true);
                sp.bcs = boundary_conditions(spec, s);
                cfg.species.push_back(std::move(sp));
            }
            cfg.reaction = network_module({2, 20, 20, 20, 2},
                                          nn::OutputTransform::Identity);
            break;
        }
        case Family::AllenCahn: {
            // no advection term shares the stencil here, so a trainable
            // stencil is exactly degenerate with the diffusion scale plus a
            // linear reaction term; keep it at the known (-1, +1)
            cfg.train_stencil = false;
            model::SpeciesSpec sp;
            sp.name = "u";
            sp.diffusion = scalar_module(2e-4, true, true);
            sp.bcs = boundary_conditions(spec, 0);
            cfg.species.push_back(std::move(sp));
            cfg.reaction = network_module({1, 10, 20, 10, 1},
                                          nn::OutputTransform::Identity);
            break;
        }
    }
    return cfg;
}

model::ModelConfig true_model_config(const EquationSpec& spec) {
    model::ModelConfig cfg;
    cfg.grid = spec.grid;
    cfg.train_stencil = false;
    switch (spec.family) {
        case Family::Burgers1D:
        case Family::Burgers2D: {
            model::SpeciesSpec sp;
            sp.name = "u";
            sp.diffusion = scalar_module(kBurgersD, false);
            sp.advection = polynomial_module({0.0, 1.0});
            sp.bcs = boundary_conditions(spec, 0);
            cfg.species.push_back(std::move(sp));
            break;
        }
        case Family::DiffusionSorption:
            throw std::invalid_argument(
                "diffusion-sorption's isotherm is not polynomial; no exact "
                "module configuration exists");
        case Family::DiffusionReaction2D: {
            for (int s = 0; s < 2; ++s) {
                model::SpeciesSpec sp;
                sp.name = s == 0 ? "u1" : "u2";
                sp.diffusion = scalar_module(s == 0 ? kReactD1 : kReactD2, false);
                sp.bcs = boundary_conditions(spec, s);
                cfg.species.push_back(std::move(sp));
            }
            // terms u1^a u2^b enumerated a = 0..3, b = 0..3-a:
            // (0,0) (0,1) (0,2) (0,3) (1,0) (1,1) (1,2) (2,0) (2,1) (3,0)
            std::vector<double> coeffs(20, 0.0);
            coeffs[0] = -kReactK;  // R1: -k
            coeffs[1] = -1.0;      // R1: -u2
            coeffs[4] = 1.0;       // R1: +u1
            coeffs[9] = -1.0;      // R1: -u1^3
            coeffs[10 + 1] = -1.0; // R2: -u2
            coeffs[10 + 4] = 1.0;  // R2: +u1
            cfg.reaction = polynomial_module(std::move(coeffs), 3);
            break;
        }
        case Family::AllenCahn: {
            model::SpeciesSpec sp;
            sp.name = "u";
            sp.diffusion = scalar_module(kAllenCahnD, false);
            sp.bcs = boundary_conditions(spec, 0);
            cfg.species.push_back(std::move(sp));
            cfg.reaction = polynomial_module({0.0, 5.0, 0.0, -5.0});
            break;
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Self-convergence study

ConvergenceResult convergence_study(Family family, const GenerateConfig& cfg) {
    int base = 0, levels = 3;
    double t_study = 0.0;
    switch (family) {
        case Family::Burgers1D: base = 25; t_study = 0.25; break;
        case Family::AllenCahn: base = 25; t_study = 0.5; break;
        case Family::DiffusionSorption: base = 13; t_study = 2500.0; break;
        case Family::Burgers2D: base = 13; t_study = 0.25; break;
        case Family::DiffusionReaction2D: base = 13; t_study = 2.0; break;
    }
    ConvergenceResult res;
    std::vector<std::vector<double>> finals;
    std::vector<EquationSpec> specs;
    for (int level = 0; level <= levels; ++level) {
        EquationSpec s = registered_spec(family, Split::Train);
        int n = (base - 1) * (1 << level) + 1;
        s.grid.n[0] = n;
        if (s.grid.dim == 2) s.grid.n[1] = n;
        s.t_end = t_study;
        s.nt = 2;  // only the final state matters
        Dataset ds = generate(s, cfg);
        auto last = ds.frame(1);
        finals.emplace_back(last.begin(), last.end());
        specs.push_back(s);
        if (level < levels) res.resolutions.push_back(n);
    }
    const auto& ref_spec = specs.back();
    const auto& ref = finals.back();
    std::size_t ref_cells = ref_spec.grid.cells();
    for (int level = 0; level < levels; ++level) {
        const auto& s = specs[static_cast<std::size_t>(level)];
        const auto& u = finals[static_cast<std::size_t>(level)];
        int stride = 1 << (levels - level);
        int nx = s.grid.n[0];
        int ny = s.grid.dim == 2 ? s.grid.n[1] : 1;
        int ref_nx = ref_spec.grid.n[0];
        std::size_t cells = s.grid.cells();
        double err = 0.0;
        for (int sp = 0; sp < s.species; ++sp)
            for (int iy = 0; iy < ny; ++iy)
                for (int ix = 0; ix < nx; ++ix) {
                    double a = u[sp * cells + static_cast<std::size_t>(iy) * nx + ix];
                    double b = ref[sp * ref_cells +
                                   static_cast<std::size_t>(iy) * stride * ref_nx +
                                   static_cast<std::size_t>(ix) * stride];
                    err += std::abs(a - b);
                }
        res.errors.push_back(err / static_cast<double>(cells * s.species));
    }
    for (std::size_t k = 0; k + 1 < res.errors.size(); ++k)
        res.ratios.push_back(res.errors[k] / res.errors[k + 1]);
    return res;
}

}  // namespace finn::datagen
