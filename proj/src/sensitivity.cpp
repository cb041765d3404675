#include "heatopt/sensitivity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "edge_flux.hpp"

namespace heatopt {

namespace {

GradientField zero_gradient(int cells) {
    GradientField g;
    g.cells = cells;
    g.values.assign(static_cast<std::size_t>(cells) * cells, 0.0);
    return g;
}

// Σ_{e in cell} v_e^T K0 u_e, the building block of every ∂A/∂k product.
std::vector<double> per_cell_energy(const FemSpace& space, const ModelGrid& model,
                                    const Eigen::VectorXd& v, const Eigen::VectorXd& u) {
    const Eigen::MatrixXd K0 = element_stiffness(space.order(), 1.0);
    const int ndof = space.local_dof_count();
    std::vector<double> acc(static_cast<std::size_t>(model.cells) * model.cells, 0.0);
    std::vector<int> dofs(ndof);
    Eigen::VectorXd ue(ndof), ve(ndof);
    for (int e = 0; e < space.grid().element_count(); ++e) {
        space.element_dofs(e, dofs.data());
        for (int l = 0; l < ndof; ++l) {
            ue(l) = u(dofs[l]);
            ve(l) = v(dofs[l]);
        }
        acc[cell_of_element(model, e)] += ve.dot(K0 * ue);
    }
    return acc;
}

}  // namespace

GradientField compliance_gradient(const DesignField& design, double penal,
                                  const FemSolution& solution) {
    const FemSpace& space = *solution.space;
    if (space.grid().n() % design.cells != 0)
        throw std::invalid_argument("solution grid is not a refinement of the design's model grid");
    const ModelGrid model{design.cells, space.grid().n() / design.cells};

    const std::vector<double> energy = per_cell_energy(space, model, solution.u, solution.u);
    GradientField g = zero_gradient(design.cells);
    for (std::size_t c = 0; c < g.values.size(); ++c)
        g.values[c] = -penal * std::pow(design.values[c], penal - 1.0) * energy[c];
    return g;
}

EstimatorGradient estimator_gradient_detailed(const DesignField& design, double penal,
                                              const FemSolution& solution, double f,
                                              const AssembledSystem& system,
                                              const SolverOptions& options) {
    const FemSpace& space = *solution.space;
    if (space.order() != 1)
        throw std::invalid_argument("estimator gradients support bilinear (Q1) state solves only");
    const StructuredGrid& grid = space.grid();
    if (grid.n() % design.cells != 0)
        throw std::invalid_argument("solution grid is not a refinement of the design's model grid");
    const ModelGrid model{design.cells, grid.n() / design.cells};
    const double h = grid.h();

    std::vector<double> coeff(design.values.size());
    for (std::size_t i = 0; i < design.values.size(); ++i)
        coeff[i] = std::pow(design.values[i], penal);
    const detail::FluxContext ctx{&grid, &space, &solution.u, &coeff, model};

    const int ncells = design.cells * design.cells;
    std::vector<double> de_dcoeff(ncells, 0.0);  // ∂E/∂κ accumulated per cell
    Eigen::VectorXd de_du = Eigen::VectorXd::Zero(space.dof_count());

    // Interior residual term: (h^2/κ) f^2 h^2 per element, u-independent for Q1.
    for (int e = 0; e < grid.element_count(); ++e) {
        const int cell = cell_of_element(model, e);
        const double kt = coeff[cell];
        de_dcoeff[cell] += -(h * h * h * h) * f * f / (kt * kt);
    }

    // Edge terms: the weight h/κ_E, the κ factors inside the jump, and the
    // dependence on the DOFs all contribute.
    detail::EdgeFlux flux;
    std::vector<int> dofs(space.local_dof_count());
    for (int edge_id = 0; edge_id < grid.edge_count(); ++edge_id) {
        if (!detail::compute_edge_flux(ctx, edge_id, flux)) continue;
        const double sign = (flux.nsides == 2) ? 1.0 : -1.0;  // Neumann jump is -κ ∂u/∂n
        double integral = 0.0;
        for (int q = 0; q < flux.npts; ++q)
            integral += flux.qweight[q] * flux.jump[q] * flux.jump[q];
        const double weight = flux.credits * h / flux.k_edge;

        for (int s = 0; s < flux.nsides; ++s) {
            const auto& side = flux.sides[s];
            // d/dκ_s of weight * ∫ J², with ∂J/∂κ_s = sign * ∂u/∂n_s.
            double dintegral = 0.0;
            for (int q = 0; q < flux.npts; ++q)
                dintegral += flux.qweight[q] * 2.0 * flux.jump[q] * sign * side.normal_deriv[q];
            de_dcoeff[side.cell] +=
                -flux.credits * h / (flux.k_edge * flux.k_edge) * integral + weight * dintegral;

            // ∂E/∂u through this side's shape functions.
            space.element_dofs(side.elem, dofs.data());
            for (int q = 0; q < flux.npts; ++q) {
                const double factor = weight * flux.qweight[q] * 2.0 * flux.jump[q] * sign * side.coeff;
                for (int l = 0; l < space.local_dof_count(); ++l)
                    de_du(dofs[l]) += factor * side.basis[q][l];
            }
        }
    }

    EstimatorGradient out;
    out.explicit_part = zero_gradient(design.cells);
    for (int c = 0; c < ncells; ++c)
        out.explicit_part.values[c] =
            de_dcoeff[c] * penal * std::pow(design.values[c], penal - 1.0);

    // Adjoint: A λ = ∂E/∂u on the free DOFs, then -λ^T (∂A/∂k) u per cell.
    AssembledSystem adjoint = system;  // shallow enough: copies matrix + vectors
    adjoint.rhs_full = de_du;
    adjoint.rhs = space.restrict_to_free(de_du);
    const FemSolution lambda = solve(adjoint, options);
    out.adjoint_residual = lambda.residual;
    out.adjoint_cg_iterations = lambda.cg_iterations;

    const std::vector<double> cross = per_cell_energy(space, model, lambda.u, solution.u);
    out.adjoint_part = zero_gradient(design.cells);
    for (int c = 0; c < ncells; ++c)
        out.adjoint_part.values[c] =
            -penal * std::pow(design.values[c], penal - 1.0) * cross[c];

    out.total = zero_gradient(design.cells);
    for (int c = 0; c < ncells; ++c)
        out.total.values[c] = out.explicit_part.values[c] + out.adjoint_part.values[c];
    return out;
}

GradientField estimator_gradient(const DesignField& design, double penal,
                                 const FemSolution& solution, double f,
                                 const AssembledSystem& system, const SolverOptions& options) {
    return estimator_gradient_detailed(design, penal, solution, f, system, options).total;
}

GradientField combined_gradient(const DesignField& design, double penal,
                                const FemSolution& solution, double f, double correction,
                                const AssembledSystem& system, const SolverOptions& options) {
    if (correction < 0.0) throw std::invalid_argument("correction parameter must be nonnegative");
    GradientField g = compliance_gradient(design, penal, solution);
    if (correction == 0.0) return g;
    const GradientField ge = estimator_gradient(design, penal, solution, f, system, options);
    for (std::size_t c = 0; c < g.values.size(); ++c) g.values[c] += correction * ge.values[c];
    return g;
}

GradientField finite_difference_gradient(const std::function<double(const DesignField&)>& objective,
                                         const DesignField& design, const FdOptions& options,
                                         std::vector<std::string>* notes) {
    GradientField g = zero_gradient(design.cells);
    DesignField probe = design;
    for (std::size_t c = 0; c < design.values.size(); ++c) {
        const double k = design.values[c];
        const double step = std::max(options.rel_step * k, options.min_step);
        const bool up_ok = k + step <= 1.0;
        const bool down_ok = k - step >= design.gamma;
        double value;
        if (up_ok && down_ok) {
            probe.values[c] = k + step;
            const double fp = objective(probe);
            probe.values[c] = k - step;
            const double fm = objective(probe);
            value = (fp - fm) / (2.0 * step);
        } else {
            const double f0 = objective(design);
            if (up_ok) {
                probe.values[c] = k + step;
                value = (objective(probe) - f0) / step;
            } else {
                probe.values[c] = k - step;
                value = (f0 - objective(probe)) / step;
            }
            if (notes != nullptr) {
                std::ostringstream msg;
                msg << "cell " << c << ": one-sided difference (value " << k << " at the box edge)";
                notes->push_back(msg.str());
            }
        }
        probe.values[c] = k;
        g.values[c] = value;
    }
    return g;
}

}  // namespace heatopt
