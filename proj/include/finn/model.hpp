#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "finn/ad.hpp"
#include "finn/grid.hpp"
#include "finn/nn.hpp"

#include "json.hpp"

namespace finn::model {

enum class ModuleKind { Absent, Scalar, Network, Polynomial };

/// One constitutive module: a trainable scalar, a small MLP u -> f(u), or a
/// polynomial with (optionally trainable) coefficients. `output` and
/// `output_scale` apply to Network and Polynomial variants alike; Positive
/// keeps diffusion and storage coefficients above zero.
struct ModuleSpec {
    ModuleKind kind = ModuleKind::Absent;
    double value = 0.0;  // Scalar initial value
    bool trainable = true;
    std::vector<int> widths;  // Network layer widths
    nn::Activation hidden = nn::Activation::Tanh;
    nn::OutputTransform output = nn::OutputTransform::Identity;
    double output_scale = 1.0;
    // Polynomial: univariate coefficients in ascending order; for a
    // two-species reaction, `degree` sets the total degree and coeffs holds
    // one row per output species over terms u1^a u2^b enumerated a = 0..deg,
    // b = 0..deg-a.
    std::vector<double> coeffs;
    int degree = 0;

    bool present() const { return kind != ModuleKind::Absent; }
};

/// Per-species flux configuration. `flux_source` >= 0 makes this species'
/// flux read another species' field (the total-concentration diagnostic in
/// diffusion-sorption); ghost values then come from that species' boundary
/// descriptors. `storage` is a divisor applied to the whole time derivative
/// (retardation placement).
struct SpeciesSpec {
    std::string name = "u";
    ModuleSpec diffusion;
    ModuleSpec advection;
    ModuleSpec storage;
    int flux_source = -1;
    std::vector<pde::BoundaryCondition> bcs;
};

struct ModelConfig {
    pde::Grid grid;
    std::vector<SpeciesSpec> species;
    ModuleSpec reaction;  // maps the species vector to per-species sources
    bool train_stencil = true;
    std::array<double, 2> stencil_init{-1.0, 1.0};
    double stencil_noise = 0.1;  // applied only when the stencil is trainable
    bool share_axis_stencil = true;
};

/// Volume-integrated flow bookkeeping for one right-hand-side evaluation:
/// net flux crossing the domain boundary and total reaction source, both
/// summed over self-sourced species and multiplied by the cell volume.
/// Periodic faces contribute no boundary flux. Storage divisors are not
/// applied here.
struct FlowTotals {
    double boundary = 0.0;
    double source = 0.0;
};

/// Finite-volume network over a 1D or 2D grid. The state vector is
/// species-major: u[s * cells + i]. Per face the flux is
///   stencil(u_i, u_nb) * (D(u_i)/dx^2 + gate(v(u_i))/dx)
/// with the upwind gate ReLU(v) on min-side faces and ReLU(-v) on max-side
/// faces; with the stencil at (-1, +1) both coefficients are nonnegative,
/// which keeps the advective exchange monotone. Learned diffusion and
/// velocity stay in physical units. The time derivative is
/// (sum of face fluxes + reaction) / storage.
class FinnModel {
public:
    explicit FinnModel(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    int species_count() const { return static_cast<int>(cfg_.species.size()); }
    std::size_t cells() const { return cells_; }
    std::size_t state_size() const { return cells_ * cfg_.species.size(); }
    double cell_volume() const;

    /// Registers stencil and module parameters; network weights and stencil
    /// noise draw from a generator seeded with `seed`.
    void init_params(ad::ParamStore& store, std::uint64_t seed) const;

    /// Appends the full state-kernel graph to `tape`; returns du/dt.
    ad::Var rhs_recorded(ad::Tape& tape, ad::Var u) const;

    /// Same values as the recorded graph, evaluated on a throwaway tape.
    void rhs_plain(ad::ParamStore& store, std::span<const double> u,
                   std::span<double> dudt, FlowTotals* totals = nullptr) const;

    /// Upwind surface factor: min side ReLU(v), max side ReLU(-v).
    static double upwind_gate(double v, bool min_side);

    /// Scalar reference flux in stencil units (no spacing division): both
    /// surface subkernels with a shared center coefficient and upwind-gated
    /// velocity.
    static double flux_kernel(double u_left, double u_i, double u_right,
                              const std::array<double, 2>& stencil,
                              double diffusion, double velocity,
                              bool with_advection);

    /// Tabulates a learned univariate module on `query`. `which` is one of
    /// "diffusion", "advective_velocity", "retardation", "reaction".
    std::vector<double> eval_module(const ad::ParamStore& store,
                                    const std::string& which, int species,
                                    std::span<const double> query) const;

    /// Two-species reaction output `out_species` on paired query points.
    std::vector<double> eval_reaction2(const ad::ParamStore& store,
                                       std::span<const double> u1,
                                       std::span<const double> u2,
                                       int out_species) const;

    /// (u, f(u)) pairs for a Network or Polynomial module; Scalar and Absent
    /// variants are rejected.
    std::vector<std::array<double, 2>> extract_learned_function(
        const ad::ParamStore& store, const std::string& which, int species,
        std::span<const double> query) const;

    /// Learned (w_self, w_neighbor) for one axis.
    std::array<double, 2> stencil_report(const ad::ParamStore& store,
                                         int axis = 0) const;

    std::string stencil_param_name(int axis) const;

private:
    struct FaceData {
        ad::GatherMap map;  // neighbor lookup on the flux-source field
        std::vector<double> mask;       // 0 where a Neumann face overrides
        std::vector<double> override_;  // prescribed Neumann flux values
        bool has_neumann = false;
        std::vector<double> boundary_mask;  // 1 on cells touching this face
        int axis = 0;
        bool min_side = true;
    };

    struct ModuleVar {
        ad::Var v;
        bool is_scalar = false;  // length-1 node broadcast over cells
    };

    void validate() const;
    void build_faces();
    const ModuleSpec* module_by_name(const std::string& which, int species,
                                     std::string& param_name) const;
    ModuleVar eval_univariate(ad::Tape& tape, const ModuleSpec& spec,
                              const std::string& name, ad::Var x) const;
    std::vector<ModuleVar> eval_reaction(ad::Tape& tape,
                                         const std::vector<ad::Var>& fields) const;
    ad::Var build_rhs(ad::Tape& tape, ad::Var u, FlowTotals* totals) const;

    ModelConfig cfg_;
    std::size_t cells_ = 0;
    int faces_ = 2;
    std::vector<std::vector<FaceData>> face_data_;  // [species][face]
};

/// Number of u1^a u2^b terms with a + b <= degree.
int bivariate_term_count(int degree);

// Lossless JSON round trip for model configurations. Parsing is strict:
// unknown keys raise std::invalid_argument.
nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

nlohmann::ordered_json grid_to_json(const pde::Grid& g);
pde::Grid grid_from_json(const nlohmann::json& j);
nlohmann::ordered_json bc_to_json(const pde::BoundaryCondition& bc);
pde::BoundaryCondition bc_from_json(const nlohmann::json& j);

}  // namespace finn::model
