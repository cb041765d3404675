#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

#include "heatopt/design.hpp"
#include "heatopt/grid.hpp"

namespace heatopt {

/// Conforming Lagrange space on a StructuredGrid: order 1 (bilinear) or
/// order 2 (biquadratic). DOFs live on the (order*n+1)^2 lattice, numbered
/// row-major from the bottom-left; DOFs on closed Γ_u are constrained to 0.
class FemSpace {
public:
    FemSpace(const StructuredGrid& grid, int order);

    const StructuredGrid& grid() const { return *grid_; }
    int order() const { return order_; }

    int dofs_per_side() const { return order_ * grid_->n() + 1; }
    int dof_count() const { return dofs_per_side() * dofs_per_side(); }
    int free_count() const { return static_cast<int>(free_to_full_.size()); }
    int local_dof_count() const { return (order_ + 1) * (order_ + 1); }

    int dof_id(int ix, int iy) const { return iy * dofs_per_side() + ix; }

    /// Element-local to global DOF ids, row-major over the local lattice.
    void element_dofs(int element, int* out) const;

    bool is_dirichlet(int dof) const { return full_to_free_[dof] < 0; }
    int full_to_free(int dof) const { return full_to_free_[dof]; }
    const std::vector<int>& free_to_full() const { return free_to_full_; }
    const std::vector<int>& dirichlet_dofs() const { return dirichlet_; }

    Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full) const;
    Eigen::VectorXd expand_to_full(const Eigen::VectorXd& free) const;

private:
    const StructuredGrid* grid_;
    int order_;
    std::vector<int> full_to_free_;
    std::vector<int> free_to_full_;
    std::vector<int> dirichlet_;
};

/// Unit-conductivity stiffness of one square element; the element size
/// cancels in 2D so the same matrix serves every uniform grid.
const Eigen::Matrix4d& q1_unit_stiffness();
const Eigen::Matrix<double, 9, 9>& q2_unit_stiffness();

/// k_eff * K0 for the requested order.
Eigen::MatrixXd element_stiffness(int order, double conductivity);

/// Consistent load for f == 1 on one element of size h (scale by f).
Eigen::VectorXd element_unit_load(int order, double h);

struct AssembledSystem {
    Eigen::SparseMatrix<double> matrix;  // free x free, SPD
    Eigen::VectorXd rhs;                 // free
    Eigen::VectorXd rhs_full;            // before elimination
    const FemSpace* space = nullptr;
    const DesignField* design = nullptr;
    double penal = 1.0;
    double source = 0.0;
};

/// Assembles a_k(u,v) = ∫ k^p ∇u·∇v and ℓ(v) = ∫ f v with the design
/// held piecewise constant per ground cell; the grid must be an integer
/// refinement of the model grid.
AssembledSystem assemble(const DesignField& design, double penal, const FemSpace& space, double f);

enum class SolveMethod { Auto, Pcg, DirectSparse, DirectDense };

struct SolverOptions {
    SolveMethod method = SolveMethod::Auto;
    double tolerance = 1e-10;        // relative residual target
    double iter_cap_factor = 50.0;   // cap = factor * sqrt(free dofs)

    bool operator==(const SolverOptions&) const = default;
};

struct FemSolution {
    Eigen::VectorXd u;         // full DOF vector, zeros on Γ_u
    Eigen::VectorXd load_full; // un-eliminated load, for compliance
    const FemSpace* space = nullptr;
    const DesignField* design = nullptr;
    double penal = 1.0;
    double source = 0.0;
    double residual = 0.0;     // achieved ||Au-b||/||b||
    int cg_iterations = 0;
    std::string method = "none";
};

/// Solves the reduced SPD system. Auto picks a dense factorization below
/// 3000 free DOFs, conjugate gradients above, and falls back to a sparse
/// factorization if CG stalls at the iteration cap. An explicit Pcg
/// request that fails to converge throws, carrying the final residual.
FemSolution solve(const AssembledSystem& system, const SolverOptions& options = {},
                  const Eigen::VectorXd* warm_start = nullptr);

/// ℓ(u_h) evaluated with the un-eliminated load vector.
double compliance(const FemSolution& solution);

/// v^T A v for a full-length vector (zeros expected on Γ_u).
double energy_product(const AssembledSystem& system, const Eigen::VectorXd& full_vector);

/// Exact embedding of a Q1 coarse solution into a nested finer Q1 space.
Eigen::VectorXd prolongate_q1(const FemSpace& coarse, const FemSpace& fine,
                              const Eigen::VectorXd& u_coarse_full);

}  // namespace heatopt
