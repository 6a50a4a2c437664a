#include "finn/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace finn::model {

int bivariate_term_count(int degree) {
    return (degree + 1) * (degree + 2) / 2;
}

FinnModel::FinnModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cells_ = cfg_.grid.cells();
    faces_ = pde::face_count(cfg_.grid.dim);
    validate();
    build_faces();
}

double FinnModel::cell_volume() const {
    double v = cfg_.grid.spacing(0);
    if (cfg_.grid.dim == 2) v *= cfg_.grid.spacing(1);
    return v;
}

void FinnModel::validate() const {
    cfg_.grid.validate();
    int S = species_count();
    if (S < 1 || S > 2)
        throw std::invalid_argument("FinnModel: supports one or two species");
    auto check_univariate = [](const ModuleSpec& m, const std::string& what) {
        if (!m.present()) return;
        if (m.kind == ModuleKind::Network) {
            if (m.widths.size() < 2 || m.widths.front() != 1 || m.widths.back() != 1)
                throw std::invalid_argument("FinnModel: " + what +
                                            " network must map 1 input to 1 output");
        }
        if (m.kind == ModuleKind::Polynomial && m.coeffs.empty())
            throw std::invalid_argument("FinnModel: " + what +
                                        " polynomial needs coefficients");
    };
    for (int s = 0; s < S; ++s) {
        const auto& sp = cfg_.species[s];
        if (sp.name.empty())
            throw std::invalid_argument("FinnModel: species needs a name");
        if (!sp.diffusion.present())
            throw std::invalid_argument("FinnModel: species '" + sp.name +
                                        "' needs a diffusion module");
        check_univariate(sp.diffusion, sp.name + " diffusion");
        check_univariate(sp.advection, sp.name + " advection");
        check_univariate(sp.storage, sp.name + " storage");
        if (sp.flux_source >= S)
            throw std::invalid_argument("FinnModel: flux_source out of range");
        int src = sp.flux_source < 0 ? s : sp.flux_source;
        if (cfg_.species[src].bcs.size() != static_cast<std::size_t>(faces_))
            throw std::invalid_argument(
                "FinnModel: species '" + cfg_.species[src].name + "' needs " +
                std::to_string(faces_) + " boundary descriptors");
    }
    const auto& r = cfg_.reaction;
    if (r.kind == ModuleKind::Network) {
        if (r.widths.size() < 2 || r.widths.front() != S || r.widths.back() != S)
            throw std::invalid_argument(
                "FinnModel: reaction network must map the species vector to itself");
    }
    if (r.kind == ModuleKind::Polynomial) {
        if (S == 2) {
            std::size_t want = static_cast<std::size_t>(S) *
                               bivariate_term_count(r.degree);
            if (r.coeffs.size() != want)
                throw std::invalid_argument(
                    "FinnModel: two-species reaction polynomial needs " +
                    std::to_string(want) + " coefficients");
        } else if (r.coeffs.empty()) {
            throw std::invalid_argument("FinnModel: reaction polynomial needs coefficients");
        }
    }
    if (r.kind == ModuleKind::Scalar)
        throw std::invalid_argument("FinnModel: reaction module cannot be a scalar");
}

void FinnModel::build_faces() {
    const auto& g = cfg_.grid;
    int nx = g.n[0];
    int ny = g.dim == 2 ? g.n[1] : 1;
    int S = species_count();
    face_data_.assign(S, {});
    for (int s = 0; s < S; ++s) {
        int csrc = cfg_.species[s].flux_source < 0 ? s : cfg_.species[s].flux_source;
        const auto& bcs = cfg_.species[csrc].bcs;
        face_data_[s].resize(faces_);
        for (int f = 0; f < faces_; ++f) {
            FaceData& fd = face_data_[s][f];
            fd.axis = f < 2 ? 0 : 1;
            fd.min_side = (f % 2 == 0);
            double dx = g.spacing(fd.axis);
            const auto& bc = bcs[f];
            fd.map.index.resize(cells_);
            fd.map.mult.assign(cells_, 1.0);
            fd.map.add.assign(cells_, 0.0);
            fd.mask.assign(cells_, 1.0);
            fd.override_.assign(cells_, 0.0);
            fd.boundary_mask.assign(cells_, 0.0);
            for (int iy = 0; iy < ny; ++iy) {
                for (int ix = 0; ix < nx; ++ix) {
                    int idx = iy * nx + ix;
                    int jx = ix, jy = iy;
                    int& jt = fd.axis == 0 ? jx : jy;
                    int nt = fd.axis == 0 ? nx : ny;
                    jt += fd.min_side ? -1 : 1;
                    if (jt >= 0 && jt < nt) {
                        fd.map.index[idx] = jy * nx + jx;
                        continue;
                    }
                    if (bc.kind != pde::BcKind::Periodic) fd.boundary_mask[idx] = 1.0;
                    switch (bc.kind) {
                        case pde::BcKind::Dirichlet:
                            fd.map.index[idx] = idx;
                            fd.map.mult[idx] = 0.0;
                            fd.map.add[idx] = bc.value;
                            break;
                        case pde::BcKind::Neumann:
                            fd.map.index[idx] = idx;
                            fd.map.mult[idx] = 0.0;
                            fd.mask[idx] = 0.0;
                            fd.override_[idx] = bc.value;
                            fd.has_neumann = true;
                            break;
                        case pde::BcKind::Cauchy:
                            fd.map.index[idx] = idx;
                            fd.map.mult[idx] =
                                pde::cauchy_ghost_multiplier(bc.coefficient, dx);
                            break;
                        case pde::BcKind::Periodic:
                            jt = fd.min_side ? nt - 1 : 0;
                            fd.map.index[idx] = jy * nx + jx;
                            break;
                    }
                }
            }
        }
    }
}

std::string FinnModel::stencil_param_name(int axis) const {
    if (cfg_.grid.dim == 1 || cfg_.share_axis_stencil) return "stencil";
    return axis == 0 ? "stencil_x" : "stencil_y";
}

void FinnModel::init_params(ad::ParamStore& store, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    int axes = (cfg_.grid.dim == 1 || cfg_.share_axis_stencil) ? 1 : 2;
    for (int a = 0; a < axes; ++a) {
        std::vector<double> st{cfg_.stencil_init[0], cfg_.stencil_init[1]};
        if (cfg_.train_stencil && cfg_.stencil_noise > 0.0)
            for (auto& w : st) w += cfg_.stencil_noise * noise(rng);
        store.add(stencil_param_name(a), {2}, std::move(st), cfg_.train_stencil);
    }
    auto add_module = [&](const ModuleSpec& m, const std::string& name) {
        switch (m.kind) {
            case ModuleKind::Absent:
                break;
            case ModuleKind::Scalar: {
                // store the pre-transform value so the forward pass recovers
                // m.value exactly
                double v = m.value / m.output_scale;
                double raw = v;
                if (m.output == nn::OutputTransform::Positive) {
                    if (!(v > 0.0))
                        throw std::invalid_argument(
                            "FinnModel: positive scalar module needs value > 0");
                    raw = std::log(std::expm1(v));
                } else if (m.output == nn::OutputTransform::Sigmoid) {
                    if (!(v > 0.0 && v < 1.0))
                        throw std::invalid_argument(
                            "FinnModel: sigmoid scalar module needs value in (0,1)");
                    raw = std::log(v / (1.0 - v));
                }
                store.add(name, {1}, {raw}, m.trainable);
                break;
            }
            case ModuleKind::Network: {
                nn::Mlp mlp{m.widths, m.hidden, m.output, m.output_scale, name};
                mlp.register_params(store, rng, m.trainable);
                break;
            }
            case ModuleKind::Polynomial: {
                std::vector<int> shape;
                if (&m == &cfg_.reaction && species_count() == 2)
                    shape = {2, bivariate_term_count(m.degree)};
                else
                    shape = {static_cast<int>(m.coeffs.size())};
                store.add(name + ".coeffs", shape, m.coeffs, m.trainable);
                break;
            }
        }
    };
    for (const auto& sp : cfg_.species) {
        add_module(sp.diffusion, sp.name + ".diffusion");
        add_module(sp.advection, sp.name + ".advection");
        add_module(sp.storage, sp.name + ".storage");
    }
    add_module(cfg_.reaction, "reaction");
}

double FinnModel::upwind_gate(double v, bool min_side) {
    if (min_side) return v > 0.0 ? v : 0.0;
    return v < 0.0 ? -v : 0.0;
}

double FinnModel::flux_kernel(double u_left, double u_i, double u_right,
                              const std::array<double, 2>& stencil,
                              double diffusion, double velocity,
                              bool with_advection) {
    double st_l = stencil[0] * u_i + stencil[1] * u_left;
    double st_r = stencil[0] * u_i + stencil[1] * u_right;
    double cl = diffusion, cr = diffusion;
    if (with_advection) {
        cl += upwind_gate(velocity, true);
        cr += upwind_gate(velocity, false);
    }
    return st_l * cl + st_r * cr;
}

FinnModel::ModuleVar FinnModel::eval_univariate(ad::Tape& tape,
                                                const ModuleSpec& spec,
                                                const std::string& name,
                                                ad::Var x) const {
    switch (spec.kind) {
        case ModuleKind::Scalar: {
            ad::Var p = tape.param(name);
            switch (spec.output) {
                case nn::OutputTransform::Identity: break;
                case nn::OutputTransform::Positive: p = tape.softplus(p); break;
                case nn::OutputTransform::Sigmoid: p = tape.sigmoid(p); break;
            }
            if (spec.output_scale != 1.0) p = tape.scale(p, spec.output_scale);
            return {p, true};
        }
        case ModuleKind::Network: {
            nn::Mlp mlp{spec.widths, spec.hidden, spec.output, spec.output_scale,
                        name};
            return {mlp.forward(tape, x, tape.size(x)), false};
        }
        case ModuleKind::Polynomial: {
            ad::Var coefs = tape.param(name + ".coeffs");
            int n = tape.size(coefs);
            ad::Var acc = tape.slice(coefs, n - 1, 1);
            bool scalar = true;
            for (int k = n - 2; k >= 0; --k) {
                ad::Var ck = tape.slice(coefs, k, 1);
                acc = scalar ? tape.badd(tape.bmul(x, acc), ck)
                             : tape.badd(tape.mul(acc, x), ck);
                scalar = false;
            }
            switch (spec.output) {
                case nn::OutputTransform::Identity: break;
                case nn::OutputTransform::Positive: acc = tape.softplus(acc); break;
                case nn::OutputTransform::Sigmoid: acc = tape.sigmoid(acc); break;
            }
            if (spec.output_scale != 1.0) acc = tape.scale(acc, spec.output_scale);
            return {acc, scalar};
        }
        case ModuleKind::Absent:
            break;
    }
    throw std::logic_error("FinnModel: evaluating an absent module");
}

std::vector<FinnModel::ModuleVar> FinnModel::eval_reaction(
    ad::Tape& tape, const std::vector<ad::Var>& fields) const {
    const ModuleSpec& r = cfg_.reaction;
    int S = species_count();
    int C = static_cast<int>(cells_);
    std::vector<ModuleVar> out;
    if (!r.present()) return out;
    if (S == 1 && r.kind != ModuleKind::Network) {
        out.push_back(eval_univariate(tape, r, "reaction", fields[0]));
        return out;
    }
    if (r.kind == ModuleKind::Network) {
        ad::Var in = S == 1 ? fields[0] : tape.interleave(fields[0], fields[1]);
        nn::Mlp mlp{r.widths, r.hidden, r.output, r.output_scale, "reaction"};
        ad::Var y = mlp.forward(tape, in, C);
        for (int s = 0; s < S; ++s)
            out.push_back({S == 1 ? y : tape.column(y, s, S), false});
        return out;
    }
    // two-species polynomial over terms u1^a u2^b, a + b <= degree
    ad::Var coefs = tape.param("reaction.coeffs");
    int nterms = bivariate_term_count(r.degree);
    std::vector<ad::Var> p1(r.degree + 1), p2(r.degree + 1);
    for (int a = 1; a <= r.degree; ++a) {
        p1[a] = a == 1 ? fields[0] : tape.mul(p1[a - 1], fields[0]);
        p2[a] = a == 1 ? fields[1] : tape.mul(p2[a - 1], fields[1]);
    }
    ad::Var ones = tape.constant(std::vector<double>(cells_, 1.0));
    for (int s = 0; s < S; ++s) {
        ad::Var acc;
        int t = 0;
        for (int a = 0; a <= r.degree; ++a) {
            for (int b = 0; b + a <= r.degree; ++b, ++t) {
                ad::Var c = tape.slice(coefs, s * nterms + t, 1);
                ad::Var base = (a == 0 && b == 0) ? ones
                               : a == 0           ? p2[b]
                               : b == 0           ? p1[a]
                                                  : tape.mul(p1[a], p2[b]);
                ad::Var term = tape.bmul(base, c);
                acc = acc.valid() ? tape.add(acc, term) : term;
            }
        }
        if (r.output_scale != 1.0) acc = tape.scale(acc, r.output_scale);
        out.push_back({acc, false});
    }
    return out;
}

ad::Var FinnModel::build_rhs(ad::Tape& tape, ad::Var u, FlowTotals* totals) const {
    int S = species_count();
    int C = static_cast<int>(cells_);
    if (tape.size(u) != S * C)
        throw std::invalid_argument("FinnModel: state size mismatch");
    double vol = cell_volume();

    auto combine = [&](ad::Var vec, const ModuleVar& m) {
        return m.is_scalar ? tape.bmul(vec, m.v) : tape.mul(vec, m.v);
    };

    std::vector<ad::Var> fields(S);
    for (int s = 0; s < S; ++s)
        fields[s] = S == 1 ? u : tape.slice(u, s * C, C);

    int axes = cfg_.grid.dim;
    std::vector<ad::Var> st_self(axes), st_nb(axes);
    for (int a = 0; a < axes; ++a) {
        ad::Var st = tape.param(stencil_param_name(a));
        st_self[a] = tape.slice(st, 0, 1);
        st_nb[a] = tape.slice(st, 1, 1);
    }

    std::vector<ModuleVar> reaction = eval_reaction(tape, fields);

    ad::Var dudt;
    for (int s = 0; s < S; ++s) {
        const auto& sp = cfg_.species[s];
        int csrc = sp.flux_source < 0 ? s : sp.flux_source;
        ad::Var src = fields[csrc];

        ModuleVar dcoef = eval_univariate(tape, sp.diffusion, sp.name + ".diffusion", src);
        ModuleVar vcoef;
        if (sp.advection.present())
            vcoef = eval_univariate(tape, sp.advection, sp.name + ".advection", src);

        ad::Var flux;
        for (int f = 0; f < faces_; ++f) {
            const FaceData& fd = face_data_[s][f];
            double dx = cfg_.grid.spacing(fd.axis);
            ad::Var nb = tape.gather(src, fd.map);
            ad::Var stc = tape.add(tape.bmul(src, st_self[fd.axis]),
                                   tape.bmul(nb, st_nb[fd.axis]));
            ad::Var face_flux = tape.scale(combine(stc, dcoef), 1.0 / (dx * dx));
            if (sp.advection.present()) {
                ad::Var gate = fd.min_side ? tape.relu(vcoef.v)
                                           : tape.relu(tape.neg(vcoef.v));
                ad::Var aterm = tape.scale(combine(stc, {gate, vcoef.is_scalar}),
                                           1.0 / dx);
                face_flux = tape.add(face_flux, aterm);
            }
            if (fd.has_neumann)
                face_flux = tape.add(tape.mul(face_flux, tape.constant(fd.mask)),
                                     tape.constant(fd.override_));
            flux = flux.valid() ? tape.add(flux, face_flux) : face_flux;
            if (totals && sp.flux_source < 0) {
                const auto& fv = tape.value(face_flux);
                for (int i = 0; i < C; ++i)
                    totals->boundary += fd.boundary_mask[i] * fv[i] * vol;
            }
        }

        ad::Var d = flux;
        if (!reaction.empty()) {
            const ModuleVar& q = reaction[s];
            d = q.is_scalar ? tape.badd(d, q.v) : tape.add(d, q.v);
            if (totals && sp.flux_source < 0) {
                const auto& qv = tape.value(q.v);
                if (q.is_scalar)
                    totals->source += qv[0] * C * vol;
                else
                    for (double x : qv) totals->source += x * vol;
            }
        }
        if (sp.storage.present()) {
            ModuleVar r = eval_univariate(tape, sp.storage, sp.name + ".storage",
                                          fields[s]);
            d = combine(d, {tape.recip(r.v), r.is_scalar});
        }
        dudt = dudt.valid() ? tape.concat(dudt, d) : d;
    }
    return dudt;
}

ad::Var FinnModel::rhs_recorded(ad::Tape& tape, ad::Var u) const {
    return build_rhs(tape, u, nullptr);
}

void FinnModel::rhs_plain(ad::ParamStore& store, std::span<const double> u,
                          std::span<double> dudt, FlowTotals* totals) const {
    if (u.size() != state_size() || dudt.size() != state_size())
        throw std::invalid_argument("FinnModel: state size mismatch");
    ad::Tape tape(&store);
    ad::Var uv = tape.constant(std::vector<double>(u.begin(), u.end()));
    ad::Var d = build_rhs(tape, uv, totals);
    const auto& v = tape.value(d);
    std::copy(v.begin(), v.end(), dudt.begin());
}

const ModuleSpec* FinnModel::module_by_name(const std::string& which, int species,
                                            std::string& param_name) const {
    if (species < 0 || species >= species_count())
        throw std::invalid_argument("FinnModel: species index out of range");
    const auto& sp = cfg_.species[species];
    const ModuleSpec* m = nullptr;
    if (which == "diffusion") {
        m = &sp.diffusion;
        param_name = sp.name + ".diffusion";
    } else if (which == "advective_velocity") {
        m = &sp.advection;
        param_name = sp.name + ".advection";
    } else if (which == "retardation") {
        m = &sp.storage;
        param_name = sp.name + ".storage";
    } else if (which == "reaction") {
        if (species_count() != 1)
            throw std::invalid_argument(
                "FinnModel: use eval_reaction2 for a two-species reaction");
        m = &cfg_.reaction;
        param_name = "reaction";
    } else {
        throw std::invalid_argument("FinnModel: unknown module '" + which + "'");
    }
    if (!m->present())
        throw std::invalid_argument("FinnModel: configuration has no " + which +
                                    " module");
    return m;
}

std::vector<double> FinnModel::eval_module(const ad::ParamStore& store,
                                           const std::string& which, int species,
                                           std::span<const double> query) const {
    std::string name;
    const ModuleSpec* m = module_by_name(which, species, name);
    // tabulation only reads parameter values
    ad::Tape tape(const_cast<ad::ParamStore*>(&store));
    ad::Var x = tape.constant(std::vector<double>(query.begin(), query.end()));
    ModuleVar out = eval_univariate(tape, *m, name, x);
    if (out.is_scalar)
        return std::vector<double>(query.size(), tape.scalar_value(out.v));
    return tape.value(out.v);
}

std::vector<double> FinnModel::eval_reaction2(const ad::ParamStore& store,
                                              std::span<const double> u1,
                                              std::span<const double> u2,
                                              int out_species) const {
    if (species_count() != 2 || !cfg_.reaction.present())
        throw std::invalid_argument("FinnModel: no two-species reaction configured");
    if (u1.size() != u2.size())
        throw std::invalid_argument("FinnModel: query length mismatch");
    if (out_species < 0 || out_species >= 2)
        throw std::invalid_argument("FinnModel: bad output species");
    ad::Tape tape(const_cast<ad::ParamStore*>(&store));
    std::vector<ad::Var> fields{
        tape.constant(std::vector<double>(u1.begin(), u1.end())),
        tape.constant(std::vector<double>(u2.begin(), u2.end()))};
    // eval_reaction sizes its broadcast against the grid; tabulate per point
    const ModuleSpec& r = cfg_.reaction;
    std::vector<double> out(u1.size());
    if (r.kind == ModuleKind::Network) {
        nn::Mlp mlp{r.widths, r.hidden, r.output, r.output_scale, "reaction"};
        ad::Var y = mlp.forward(tape, tape.interleave(fields[0], fields[1]),
                                static_cast<int>(u1.size()));
        return tape.value(tape.column(y, out_species, 2));
    }
    const auto& c = store.at("reaction.coeffs").value;
    int nterms = bivariate_term_count(r.degree);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        double acc = 0.0;
        int t = 0;
        for (int a = 0; a <= r.degree; ++a)
            for (int b = 0; b + a <= r.degree; ++b, ++t)
                acc += c[static_cast<std::size_t>(out_species * nterms + t)] *
                       std::pow(u1[i], a) * std::pow(u2[i], b);
        out[i] = acc * r.output_scale;
    }
    return out;
}

std::vector<std::array<double, 2>> FinnModel::extract_learned_function(
    const ad::ParamStore& store, const std::string& which, int species,
    std::span<const double> query) const {
    std::string name;
    const ModuleSpec* m = module_by_name(which, species, name);
    if (m->kind != ModuleKind::Network && m->kind != ModuleKind::Polynomial)
        throw std::invalid_argument("FinnModel: " + which +
                                    " is not a learned function");
    std::vector<double> f = eval_module(store, which, species, query);
    std::vector<std::array<double, 2>> table(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) table[i] = {query[i], f[i]};
    return table;
}

std::array<double, 2> FinnModel::stencil_report(const ad::ParamStore& store,
                                                int axis) const {
    const auto& v = store.at(stencil_param_name(axis)).value;
    return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// JSON round trip

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok)
            throw std::invalid_argument(std::string("unknown key '") + key +
                                        "' in " + where);
    }
}

std::string kind_name(ModuleKind k) {
    switch (k) {
        case ModuleKind::Absent: return "absent";
        case ModuleKind::Scalar: return "scalar";
        case ModuleKind::Network: return "network";
        case ModuleKind::Polynomial: return "polynomial";
    }
    return "?";
}

ModuleKind kind_from(const std::string& s) {
    if (s == "absent") return ModuleKind::Absent;
    if (s == "scalar") return ModuleKind::Scalar;
    if (s == "network") return ModuleKind::Network;
    if (s == "polynomial") return ModuleKind::Polynomial;
    throw std::invalid_argument("unknown module kind '" + s + "'");
}

std::string activation_name(nn::Activation a) {
    switch (a) {
        case nn::Activation::Tanh: return "tanh";
        case nn::Activation::Sigmoid: return "sigmoid";
        case nn::Activation::Relu: return "relu";
    }
    return "?";
}

nn::Activation activation_from(const std::string& s) {
    if (s == "tanh") return nn::Activation::Tanh;
    if (s == "sigmoid") return nn::Activation::Sigmoid;
    if (s == "relu") return nn::Activation::Relu;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string transform_name(nn::OutputTransform t) {
    switch (t) {
        case nn::OutputTransform::Identity: return "identity";
        case nn::OutputTransform::Positive: return "positive";
        case nn::OutputTransform::Sigmoid: return "sigmoid";
    }
    return "?";
}

nn::OutputTransform transform_from(const std::string& s) {
    if (s == "identity") return nn::OutputTransform::Identity;
    if (s == "positive") return nn::OutputTransform::Positive;
    if (s == "sigmoid") return nn::OutputTransform::Sigmoid;
    throw std::invalid_argument("unknown output transform '" + s + "'");
}

std::string bc_kind_name(pde::BcKind k) {
    switch (k) {
        case pde::BcKind::Dirichlet: return "dirichlet";
        case pde::BcKind::Neumann: return "neumann";
        case pde::BcKind::Cauchy: return "cauchy";
        case pde::BcKind::Periodic: return "periodic";
    }
    return "?";
}

pde::BcKind bc_kind_from(const std::string& s) {
    if (s == "dirichlet") return pde::BcKind::Dirichlet;
    if (s == "neumann") return pde::BcKind::Neumann;
    if (s == "cauchy") return pde::BcKind::Cauchy;
    if (s == "periodic") return pde::BcKind::Periodic;
    throw std::invalid_argument("unknown boundary kind '" + s + "'");
}

ordered_json module_to_json(const ModuleSpec& m) {
    ordered_json j;
    j["kind"] = kind_name(m.kind);
    if (m.kind == ModuleKind::Scalar) j["value"] = m.value;
    if (m.kind != ModuleKind::Absent) j["trainable"] = m.trainable;
    if (m.kind == ModuleKind::Network) {
        j["widths"] = m.widths;
        j["hidden"] = activation_name(m.hidden);
    }
    if (m.kind != ModuleKind::Absent) {
        j["output"] = transform_name(m.output);
        j["output_scale"] = m.output_scale;
    }
    if (m.kind == ModuleKind::Polynomial) {
        j["coeffs"] = m.coeffs;
        j["degree"] = m.degree;
    }
    return j;
}

ModuleSpec module_from_json(const json& j) {
    check_keys(j, {"kind", "value", "trainable", "widths", "hidden", "output",
                   "output_scale", "coeffs", "degree"},
               "module");
    ModuleSpec m;
    m.kind = kind_from(j.value("kind", std::string("absent")));
    m.value = j.value("value", 0.0);
    m.trainable = j.value("trainable", true);
    m.widths = j.value("widths", std::vector<int>{});
    if (j.contains("hidden")) m.hidden = activation_from(j.at("hidden"));
    if (j.contains("output")) m.output = transform_from(j.at("output"));
    m.output_scale = j.value("output_scale", 1.0);
    m.coeffs = j.value("coeffs", std::vector<double>{});
    m.degree = j.value("degree", 0);
    return m;
}

}  // namespace

nlohmann::ordered_json grid_to_json(const pde::Grid& g) {
    ordered_json j;
    j["dim"] = g.dim;
    j["min"] = std::vector<double>(g.min.begin(), g.min.begin() + g.dim);
    j["max"] = std::vector<double>(g.max.begin(), g.max.begin() + g.dim);
    j["n"] = std::vector<int>(g.n.begin(), g.n.begin() + g.dim);
    return j;
}

pde::Grid grid_from_json(const nlohmann::json& j) {
    check_keys(j, {"dim", "min", "max", "n"}, "grid");
    pde::Grid g;
    g.dim = j.at("dim").get<int>();
    auto mn = j.at("min").get<std::vector<double>>();
    auto mx = j.at("max").get<std::vector<double>>();
    auto nn = j.at("n").get<std::vector<int>>();
    if (static_cast<int>(mn.size()) < g.dim || static_cast<int>(mx.size()) < g.dim ||
        static_cast<int>(nn.size()) < g.dim)
        throw std::invalid_argument("grid: min/max/n shorter than dim");
    for (int a = 0; a < g.dim; ++a) {
        g.min[a] = mn[a];
        g.max[a] = mx[a];
        g.n[a] = nn[a];
    }
    g.validate();
    return g;
}

nlohmann::ordered_json bc_to_json(const pde::BoundaryCondition& bc) {
    ordered_json j;
    j["kind"] = bc_kind_name(bc.kind);
    j["value"] = bc.value;
    if (bc.kind == pde::BcKind::Cauchy) j["coefficient"] = bc.coefficient;
    return j;
}

pde::BoundaryCondition bc_from_json(const nlohmann::json& j) {
    check_keys(j, {"kind", "value", "coefficient"}, "boundary condition");
    pde::BoundaryCondition bc;
    bc.kind = bc_kind_from(j.at("kind"));
    bc.value = j.value("value", 0.0);
    bc.coefficient = j.value("coefficient", 0.0);
    return bc;
}

nlohmann::ordered_json to_json(const ModelConfig& cfg) {
    ordered_json j;
    j["grid"] = grid_to_json(cfg.grid);
    ordered_json species = ordered_json::array();
    for (const auto& sp : cfg.species) {
        ordered_json js;
        js["name"] = sp.name;
        js["diffusion"] = module_to_json(sp.diffusion);
        if (sp.advection.present()) js["advection"] = module_to_json(sp.advection);
        if (sp.storage.present()) js["storage"] = module_to_json(sp.storage);
        if (sp.flux_source >= 0) js["flux_source"] = sp.flux_source;
        ordered_json bcs = ordered_json::array();
        for (const auto& bc : sp.bcs) bcs.push_back(bc_to_json(bc));
        js["bcs"] = bcs;
        species.push_back(js);
    }
    j["species"] = species;
    if (cfg.reaction.present()) j["reaction"] = module_to_json(cfg.reaction);
    j["train_stencil"] = cfg.train_stencil;
    j["stencil_init"] = cfg.stencil_init;
    j["stencil_noise"] = cfg.stencil_noise;
    j["share_axis_stencil"] = cfg.share_axis_stencil;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    check_keys(j, {"grid", "species", "reaction", "train_stencil", "stencil_init",
                   "stencil_noise", "share_axis_stencil"},
               "model config");
    ModelConfig cfg;
    cfg.grid = grid_from_json(j.at("grid"));
    for (const auto& js : j.at("species")) {
        check_keys(js, {"name", "diffusion", "advection", "storage", "flux_source",
                        "bcs"},
                   "species");
        SpeciesSpec sp;
        sp.name = js.at("name").get<std::string>();
        sp.diffusion = module_from_json(js.at("diffusion"));
        if (js.contains("advection")) sp.advection = module_from_json(js.at("advection"));
        if (js.contains("storage")) sp.storage = module_from_json(js.at("storage"));
        sp.flux_source = js.value("flux_source", -1);
        for (const auto& jb : js.value("bcs", json::array()))
            sp.bcs.push_back(bc_from_json(jb));
        cfg.species.push_back(std::move(sp));
    }
    if (j.contains("reaction")) cfg.reaction = module_from_json(j.at("reaction"));
    cfg.train_stencil = j.value("train_stencil", true);
    if (j.contains("stencil_init")) {
        auto v = j.at("stencil_init").get<std::vector<double>>();
        if (v.size() != 2)
            throw std::invalid_argument("stencil_init needs two entries");
        cfg.stencil_init = {v[0], v[1]};
    }
    cfg.stencil_noise = j.value("stencil_noise", 0.1);
    cfg.share_axis_stencil = j.value("share_axis_stencil", true);
    return cfg;
}

}  // namespace finn::model
