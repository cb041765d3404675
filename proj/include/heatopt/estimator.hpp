#pragma once

#include <vector>

#include "heatopt/design.hpp"
#include "heatopt/fem.hpp"
#include "heatopt/grid.hpp"

namespace heatopt {

/// Residual estimator output: per-element eta_T^2 plus the split into
/// the interior-residual and edge-jump sums. Interior edges are credited
/// once per adjacent element, so the jump part counts them twice.
struct ErrorBreakdown {
    std::vector<double> eta_sq;
    double total = 0.0;
    double interior_part = 0.0;
    double jump_part = 0.0;
};

/// Samples of the flux jump [k∇u_h]_E at the edge quadrature points
/// (2 for Q1, 3 for Q2). The coefficient is the penalized k^p actually
/// used in assembly. Dirichlet edges are excluded from the estimator and
/// rejected here.
std::vector<double> edge_jump(int edge_id, const FemSolution& solution,
                              const DesignField& design, double penal);

/// ∫_E [k∇u_h]_E^2 ds for one edge.
double edge_jump_sq_integral(int edge_id, const FemSolution& solution,
                             const DesignField& design, double penal);

/// E_apost(k; u_h) = Σ_T eta_T^2 with
/// eta_T^2 = (h^2/k_T) ||f + div(k grad u_h)||^2_T
///         + Σ_{E ⊂ ∂T \ Γ_u} (h/k_E) ||[k∇u_h]_E||^2_E,
/// k_E summing the coefficients of the elements sharing E.
ErrorBreakdown estimate(const DesignField& design, double penal, const FemSolution& solution,
                        double f);

}  // namespace heatopt
