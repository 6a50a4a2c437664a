#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finn/grid.hpp"
#include "finn/integrator.hpp"
#include "finn/model.hpp"

namespace finn::datagen {

enum class Family {
    Burgers1D,
    Burgers2D,
    DiffusionSorption,
    DiffusionReaction2D,
    AllenCahn,
};

enum class Split { Train, InDisTest, OutDisTest };

std::string family_name(Family f);
Family family_from(const std::string& s);
std::string split_name(Split s);
Split split_from(const std::string& s);

/// One registered benchmark configuration: equation family, split, grid,
/// species layout, and output time grid. Initial and boundary conditions are
/// resolved from (family, split); in-dis and the sorption out-dis splits
/// chain their first frame from the train split's final state.
struct EquationSpec {
    Family family = Family::Burgers1D;
    Split split = Split::Train;
    pde::Grid grid;
    int species = 1;
    double t_begin = 0.0;
    double t_end = 1.0;
    int nt = 2;

    std::vector<double> times() const;
};

EquationSpec registered_spec(Family family, Split split);

/// Ground-truth constitutive functions and constants by name. Families and
/// names: burgers "diffusion"/"advective_velocity"; diffusion_sorption
/// "diffusion"/"porosity"/"retardation" (returns +infinity for u <= 0, where
/// the Freundlich isotherm is singular); diffusion_reaction "diffusion1"/
/// "diffusion2"/"k"/"reaction1"/"reaction2"; allen_cahn "diffusion"/"reaction".
double true_constitutive(Family family, const std::string& name, double u,
                         double u2 = 0.0);

/// Clamp applied before evaluating the Freundlich isotherm inside solvers,
/// sidestepping the u -> 0 singularity (documented deviation; the closed form
/// itself stays exact in true_constitutive).
inline constexpr double kFreundlichClamp = 1e-6;

struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

struct Dataset {
    EquationSpec spec;
    std::vector<double> times;
    std::vector<double> data;  // time-major [nt][species][cells]
    NoiseSpec noise;

    std::size_t frame_size() const { return spec.grid.cells() * spec.species; }
    std::span<const double> frame(int t) const;
    std::vector<int> dims() const;  // [nt, species, nx(, ny)]
};

struct GenerateConfig {
    double atol = 1e-8;
    double rtol = 1e-8;
    int max_steps_per_interval = 2000000;
};

/// Classical finite-volume right-hand side with the true constitutive
/// functions; layout matches FinnModel's species-major state.
void reference_rhs(const EquationSpec& spec, std::span<const double> u,
                   std::span<double> dudt);

Dataset generate(const EquationSpec& spec, const GenerateConfig& cfg = {});
Dataset add_noise(const Dataset& ds, double sigma, std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
void export_csv(const Dataset& ds, const std::filesystem::path& file);

std::string content_hash_hex(std::span<const double> values);

/// Boundary descriptors as registered for (family, split).
std::vector<pde::BoundaryCondition> boundary_conditions(const EquationSpec& spec,
                                                        int species);

/// Model configuration with learnable modules assigned per family (scalar or
/// known diffusion, velocity/reaction networks, retardation divisor).
model::ModelConfig learned_model_config(const EquationSpec& spec);

/// Model configuration whose modules encode the generator's exact closed
/// forms (polynomial where possible); rejected for diffusion-sorption, whose
/// isotherm is not polynomial.
model::ModelConfig true_model_config(const EquationSpec& spec);

struct ConvergenceResult {
    std::vector<int> resolutions;  // per-axis point counts, coarse to fine
    std::vector<double> errors;    // mean abs vs the finest-level reference
    std::vector<double> ratios;    // errors[k] / errors[k+1]
};

/// Self-convergence of the reference solver: successive node-doubled grids
/// against a finest reference, compared on shared nodes at the final study
/// time (shortened for the 2D families).
ConvergenceResult convergence_study(Family family, const GenerateConfig& cfg = {});

}  // namespace finn::datagen
