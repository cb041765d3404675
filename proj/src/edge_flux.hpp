#pragma once

// Shared edge-flux sampling for the error estimator and its design
// gradient. Internal to the library.

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "heatopt/design.hpp"
#include "heatopt/fem.hpp"
#include "heatopt/grid.hpp"

namespace heatopt::detail {

inline constexpr int kMaxEdgePoints = 3;
inline constexpr int kMaxLocalDofs = 9;

struct EdgeSideFlux {
    int elem = -1;
    int cell = -1;
    double coeff = 0.0;  // penalized conductivity of the cell
    // Outward normal derivative of u_h from this element's side, and its
    // dependence on the element's local DOFs, at each quadrature point.
    std::array<double, kMaxEdgePoints> normal_deriv{};
    std::array<std::array<double, kMaxLocalDofs>, kMaxEdgePoints> basis{};
};

struct EdgeFlux {
    int npts = 0;
    std::array<double, kMaxEdgePoints> qweight{};  // includes the h/2 scale
    int nsides = 0;
    std::array<EdgeSideFlux, 2> sides{};
    std::array<double, kMaxEdgePoints> jump{};
    double k_edge = 0.0;   // Σ adjacent coefficients
    int credits = 0;       // how many eta_T sums the edge enters (2 interior, 1 Neumann)
};

struct FluxContext {
    const StructuredGrid* grid;
    const FemSpace* space;
    const Eigen::VectorXd* u_full;
    const std::vector<double>* cell_coeff;
    ModelGrid model;
};

/// Fills `out` for an interior or Neumann edge. Returns false for
/// Dirichlet edges (which the estimator skips).
bool compute_edge_flux(const FluxContext& ctx, int edge_id, EdgeFlux& out);

}  // namespace heatopt::detail
