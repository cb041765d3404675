#pragma once

#include <functional>
#include <string>
#include <vector>

#include "heatopt/design.hpp"
#include "heatopt/estimator.hpp"
#include "heatopt/fem.hpp"

namespace heatopt {

/// Per-ground-cell derivative of an objective with respect to the design.
struct GradientField {
    int cells = 0;
    std::vector<double> values;

    double& at(int ix, int iy) { return values[iy * cells + ix]; }
    double at(int ix, int iy) const { return values[iy * cells + ix]; }
};

/// Self-adjoint compliance sensitivity: per cell
///   dΦ/dk = -p k^(p-1) Σ_{elements in cell} u_e^T K0 u_e,
/// never positive.
GradientField compliance_gradient(const DesignField& design, double penal,
                                  const FemSolution& solution);

/// Estimator sensitivity split into the explicit coefficient dependence
/// and the implicit dependence through u_h (the adjoint term); their sum
/// is the total derivative. Kept separate so tests can verify that
/// dropping the adjoint term breaks the finite-difference match.
struct EstimatorGradient {
    GradientField total;
    GradientField explicit_part;
    GradientField adjoint_part;
    double adjoint_residual = 0.0;
    int adjoint_cg_iterations = 0;
};

/// dE_apost/dk = ∂E/∂k - λ^T (∂A/∂k) u_h with A λ = ∂E/∂u_h, reusing the
/// assembled reduced operator for the adjoint solve. Q1 only.
EstimatorGradient estimator_gradient_detailed(const DesignField& design, double penal,
                                              const FemSolution& solution, double f,
                                              const AssembledSystem& system,
                                              const SolverOptions& options = {});

GradientField estimator_gradient(const DesignField& design, double penal,
                                 const FemSolution& solution, double f,
                                 const AssembledSystem& system, const SolverOptions& options = {});

/// Gradient of Φ_h + C E_apost; the adjoint solve is skipped when C = 0.
GradientField combined_gradient(const DesignField& design, double penal,
                                const FemSolution& solution, double f, double correction,
                                const AssembledSystem& system, const SolverOptions& options = {});

struct FdOptions {
    double rel_step = 1e-6;
    double min_step = 1e-8;
};

/// Central finite differences of an arbitrary design objective, falling
/// back to one-sided stencils at the box boundary (noted in `notes`).
/// Verification tool only: every evaluation re-solves from scratch.
GradientField finite_difference_gradient(const std::function<double(const DesignField&)>& objective,
                                         const DesignField& design, const FdOptions& options = {},
                                         std::vector<std::string>* notes = nullptr);

}  // namespace heatopt
