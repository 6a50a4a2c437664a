#include "finn/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace finn::pde {

double Grid::spacing(int axis) const {
    if (axis < 0 || axis >= dim) throw std::invalid_argument("Grid: bad axis");
    if (n[axis] < 2) throw std::invalid_argument("Grid: axis needs >= 2 volumes");
    double dx = (max[axis] - min[axis]) / (n[axis] - 1);
    if (!(dx > 0.0)) throw std::invalid_argument("Grid: non-positive spacing");
    return dx;
}

std::vector<double> Grid::coords(int axis) const {
    double dx = spacing(axis);
    std::vector<double> x(static_cast<std::size_t>(n[axis]));
    for (int i = 0; i < n[axis]; ++i) x[static_cast<std::size_t>(i)] = min[axis] + i * dx;
    return x;
}

std::size_t Grid::cells() const {
    std::size_t c = static_cast<std::size_t>(n[0]);
    if (dim == 2) c *= static_cast<std::size_t>(n[1]);
    return c;
}

void Grid::validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("Grid: dim must be 1 or 2");
    for (int a = 0; a < dim; ++a) (void)spacing(a);
}

double cauchy_ghost_multiplier(double coefficient, double spacing) {
    double denom = coefficient - spacing;
    if (denom == 0.0)
        throw std::invalid_argument(
            "Cauchy boundary: coefficient equals spacing, ghost relation singular");
    return coefficient / denom;
}

GhostResult ghost_value(const BoundaryCondition& bc, double boundary_cell_value,
                        double spacing, double opposite_cell_value) {
    if (!(spacing > 0.0)) throw std::invalid_argument("ghost_value: spacing <= 0");
    switch (bc.kind) {
        case BcKind::Dirichlet:
            return {bc.value, false};
        case BcKind::Neumann:
            return {bc.value, true};
        case BcKind::Periodic:
            return {opposite_cell_value, false};
        case BcKind::Cauchy:
            return {cauchy_ghost_multiplier(bc.coefficient, spacing) *
                        boundary_cell_value,
                    false};
    }
    throw std::logic_error("ghost_value: unknown BC kind");
}

double laplacian_stencil(double u_prev, double u_center, double u_next,
                         double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("laplacian_stencil: spacing <= 0");
    return (u_prev - 2.0 * u_center + u_next) / (spacing * spacing);
}

bool Field::finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

int face_count(int dim) { return dim == 1 ? 2 : 4; }

std::string face_name(int face) {
    switch (face) {
        case 0: return "xmin";
        case 1: return "xmax";
        case 2: return "ymin";
        case 3: return "ymax";
    }
    return "?";
}

}  // namespace finn::pde
