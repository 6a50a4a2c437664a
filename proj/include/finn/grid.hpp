#pragma once

#include <array>
#include <string>
#include <vector>

namespace finn::pde {

/// Uniform 1D/2D grid of control volumes. Volumes are sampled node-centered:
/// x_i = min + i * dx with dx = extent / (n - 1), so both domain edges carry a
/// volume center and ghost values sit one spacing outside. Dataset metadata
/// records the exact coordinate vectors so the convention is auditable.
struct Grid {
    int dim = 1;
    std::array<double, 2> min{0.0, 0.0};
    std::array<double, 2> max{1.0, 1.0};
    std::array<int, 2> n{2, 1};

    double spacing(int axis) const;
    std::vector<double> coords(int axis) const;
    std::size_t cells() const;
    void validate() const;
};

enum class BcKind { Dirichlet, Neumann, Cauchy, Periodic };

/// One descriptor per domain face per species. `value` is the Dirichlet value
/// u_b or the Neumann flux nu; `coefficient` links the Cauchy ghost relation
/// u_ghost = coefficient * (u_ghost - u_boundary) / dx.
struct BoundaryCondition {
    BcKind kind = BcKind::Dirichlet;
    double value = 0.0;
    double coefficient = 0.0;
};

/// Virtual-neighbor value consumed by a boundary flux kernel. For Neumann
/// faces the kernel output itself is overridden with `value` instead
/// (flux_override set).
struct GhostResult {
    double value = 0.0;
    bool flux_override = false;
};

GhostResult ghost_value(const BoundaryCondition& bc, double boundary_cell_value,
                        double spacing, double opposite_cell_value = 0.0);

/// Multiplier k such that u_ghost = k * u_boundary for a Cauchy face.
double cauchy_ghost_multiplier(double coefficient, double spacing);

/// (u_prev - 2 u_center + u_next) / dx^2
double laplacian_stencil(double u_prev, double u_center, double u_next,
                         double spacing);

/// Quantity values over all control volumes at one time; species-major flat
/// layout [species][cells].
struct Field {
    int species = 1;
    std::size_t cells = 0;
    std::vector<double> values;

    Field() = default;
    Field(int species_, std::size_t cells_, double fill = 0.0)
        : species(species_), cells(cells_),
          values(static_cast<std::size_t>(species_) * cells_, fill) {}

    double& at(int s, std::size_t i) { return values[s * cells + i]; }
    double at(int s, std::size_t i) const { return values[s * cells + i]; }
    bool finite() const;
};

/// Face order used throughout: 1D {xmin, xmax}; 2D {xmin, xmax, ymin, ymax}.
int face_count(int dim);
std::string face_name(int face);

}  // namespace finn::pde
