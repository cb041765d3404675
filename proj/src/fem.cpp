#include "heatopt/fem.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace heatopt {

namespace {

struct GaussRule {
    int npts;
    double pts[3];
    double wts[3];
};

const GaussRule& gauss_rule(int npts) {
    static const GaussRule g2{2, {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 0.0}, {1.0, 1.0, 0.0}};
    static const GaussRule g3{3,
                              {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)},
                              {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
    return npts == 2 ? g2 : g3;
}

// 1D Lagrange basis on [-1,1]; order 1 nodes {-1,1}, order 2 nodes {-1,0,1}.
void lagrange_1d(int order, double t, double* val, double* der) {
    if (order == 1) {
        val[0] = 0.5 * (1.0 - t);
        val[1] = 0.5 * (1.0 + t);
        der[0] = -0.5;
        der[1] = 0.5;
    } else {
        val[0] = 0.5 * t * (t - 1.0);
        val[1] = 1.0 - t * t;
        val[2] = 0.5 * t * (t + 1.0);
        der[0] = t - 0.5;
        der[1] = -2.0 * t;
        der[2] = t + 0.5;
    }
}

Eigen::MatrixXd reference_stiffness(int order) {
    const int nb = order + 1;
    const int ndof = nb * nb;
    const GaussRule& rule = gauss_rule(order + 1);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ndof, ndof);
    double lx[3], dlx[3], ly[3], dly[3];
    for (int qx = 0; qx < rule.npts; ++qx) {
        for (int qy = 0; qy < rule.npts; ++qy) {
            lagrange_1d(order, rule.pts[qx], lx, dlx);
            lagrange_1d(order, rule.pts[qy], ly, dly);
            const double w = rule.wts[qx] * rule.wts[qy];
            for (int j = 0; j < ndof; ++j) {
                const int ja = j % nb, jb = j / nb;
                const double gjx = dlx[ja] * ly[jb];
                const double gjy = lx[ja] * dly[jb];
                for (int i = 0; i < ndof; ++i) {
                    const int ia = i % nb, ib = i / nb;
                    K(i, j) += w * ((dlx[ia] * ly[ib]) * gjx + (lx[ia] * dly[ib]) * gjy);
                }
            }
        }
    }
    return K;
}

Eigen::VectorXd reference_load(int order) {
    const int nb = order + 1;
    const int ndof = nb * nb;
    const GaussRule& rule = gauss_rule(order + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(ndof);
    double lx[3], dlx[3], ly[3], dly[3];
    for (int qx = 0; qx < rule.npts; ++qx) {
        for (int qy = 0; qy < rule.npts; ++qy) {
            lagrange_1d(order, rule.pts[qx], lx, dlx);
            lagrange_1d(order, rule.pts[qy], ly, dly);
            const double w = rule.wts[qx] * rule.wts[qy];
            for (int i = 0; i < ndof; ++i) b(i) += w * lx[i % nb] * ly[i / nb];
        }
    }
    return b;
}

}  // namespace

const Eigen::Matrix4d& q1_unit_stiffness() {
    static const Eigen::Matrix4d K = reference_stiffness(1);
    return K;
}

const Eigen::Matrix<double, 9, 9>& q2_unit_stiffness() {
    static const Eigen::Matrix<double, 9, 9> K = reference_stiffness(2);
    return K;
}

Eigen::MatrixXd element_stiffness(int order, double conductivity) {
    if (order != 1 && order != 2) throw std::invalid_argument("element order must be 1 or 2");
    if (order == 1) return conductivity * q1_unit_stiffness();
    return conductivity * q2_unit_stiffness();
}

Eigen::VectorXd element_unit_load(int order, double h) {
    if (order != 1 && order != 2) throw std::invalid_argument("element order must be 1 or 2");
    static const Eigen::VectorXd b1 = reference_load(1);
    static const Eigen::VectorXd b2 = reference_load(2);
    return (h * h / 4.0) * (order == 1 ? b1 : b2);
}

FemSpace::FemSpace(const StructuredGrid& grid, int order) : grid_(&grid), order_(order) {
    if (order != 1 && order != 2) throw std::invalid_argument("element order must be 1 or 2");
    const int side = dofs_per_side();
    full_to_free_.assign(static_cast<std::size_t>(side) * side, 0);

    // A lattice DOF is constrained iff it sits on a closed sink segment;
    // sink node indices live on the grid lattice, scaled here by the order.
    auto on_dirichlet = [&](int ix, int iy) {
        for (const auto& s : grid.sinks()) {
            const int lo = order_ * s.i0, hi = order_ * s.i1;
            switch (s.side) {
                case Side::Left:
                    if (ix == 0 && iy >= lo && iy <= hi) return true;
                    break;
                case Side::Right:
                    if (ix == side - 1 && iy >= lo && iy <= hi) return true;
                    break;
                case Side::Bottom:
                    if (iy == 0 && ix >= lo && ix <= hi) return true;
                    break;
                case Side::Top:
                    if (iy == side - 1 && ix >= lo && ix <= hi) return true;
                    break;
            }
        }
        return false;
    };

    int next_free = 0;
    for (int iy = 0; iy < side; ++iy) {
        for (int ix = 0; ix < side; ++ix) {
            const int dof = dof_id(ix, iy);
            if (on_dirichlet(ix, iy)) {
                full_to_free_[dof] = -1;
                dirichlet_.push_back(dof);
            } else {
                full_to_free_[dof] = next_free++;
                free_to_full_.push_back(dof);
            }
        }
    }
}

void FemSpace::element_dofs(int element, int* out) const {
    const int ex = grid_->element_x(element);
    const int ey = grid_->element_y(element);
    const int nb = order_ + 1;
    const int bx = order_ * ex;
    const int by = order_ * ey;
    for (int b = 0; b < nb; ++b)
        for (int a = 0; a < nb; ++a) *out++ = dof_id(bx + a, by + b);
}

Eigen::VectorXd FemSpace::restrict_to_free(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(free_count());
    for (int i = 0; i < free_count(); ++i) out(i) = full(free_to_full_[i]);
    return out;
}

Eigen::VectorXd FemSpace::expand_to_full(const Eigen::VectorXd& free) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dof_count());
    for (int i = 0; i < free_count(); ++i) out(free_to_full_[i]) = free(i);
    return out;
}

AssembledSystem assemble(const DesignField& design, double penal, const FemSpace& space, double f) {
    const StructuredGrid& grid = space.grid();
    if (grid.n() % design.cells != 0) {
        std::ostringstream msg;
        msg << "computational grid n=" << grid.n() << " is not a refinement of the N="
            << design.cells << " model grid";
        throw std::invalid_argument(msg.str());
    }
    if (f < 0.0) throw std::invalid_argument("heat source must be nonnegative");
    const ModelGrid model{design.cells, grid.n() / design.cells};

    std::vector<double> cell_coeff(design.values.size());
    for (std::size_t i = 0; i < design.values.size(); ++i)
        cell_coeff[i] = std::pow(design.values[i], penal);

    const int ndof = space.local_dof_count();
    static thread_local std::vector<int> dofs;
    dofs.resize(ndof);

    const Eigen::MatrixXd K0 = element_stiffness(space.order(), 1.0);
    const Eigen::VectorXd be = element_unit_load(space.order(), grid.h()) * f;

    AssembledSystem sys;
    sys.space = &space;
    sys.design = &design;
    sys.penal = penal;
    sys.source = f;
    sys.rhs_full = Eigen::VectorXd::Zero(space.dof_count());

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(grid.element_count()) * ndof * ndof);
    for (int e = 0; e < grid.element_count(); ++e) {
        const double coeff = cell_coeff[cell_of_element(model, e)];
        space.element_dofs(e, dofs.data());
        for (int j = 0; j < ndof; ++j) {
            sys.rhs_full(dofs[j]) += be(j);
            const int gj = space.full_to_free(dofs[j]);
            if (gj < 0) continue;
            for (int i = 0; i < ndof; ++i) {
                const int gi = space.full_to_free(dofs[i]);
                if (gi < 0) continue;
                triplets.emplace_back(gi, gj, coeff * K0(i, j));
            }
        }
    }

    sys.matrix.resize(space.free_count(), space.free_count());
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.matrix.makeCompressed();
    sys.rhs = space.restrict_to_free(sys.rhs_full);
    return sys;
}

namespace {

double relative_residual(const AssembledSystem& sys, const Eigen::VectorXd& x) {
    const double bnorm = sys.rhs.norm();
    if (bnorm == 0.0) return 0.0;
    return (sys.matrix * x - sys.rhs).norm() / bnorm;
}

}  // namespace

FemSolution solve(const AssembledSystem& system, const SolverOptions& options,
                  const Eigen::VectorXd* warm_start) {
    const FemSpace& space = *system.space;
    FemSolution sol;
    sol.space = &space;
    sol.design = system.design;
    sol.penal = system.penal;
    sol.source = system.source;
    sol.load_full = system.rhs_full;

    const int nfree = space.free_count();
    if (nfree == 0 || system.rhs.norm() == 0.0) {
        sol.u = Eigen::VectorXd::Zero(space.dof_count());
        sol.residual = 0.0;
        sol.method = "trivial";
        return sol;
    }

    SolveMethod method = options.method;
    if (method == SolveMethod::Auto)
        method = (nfree < 3000) ? SolveMethod::DirectDense : SolveMethod::Pcg;

    Eigen::VectorXd x;
    if (method == SolveMethod::Pcg) {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg;
        cg.setTolerance(options.tolerance);
        const int cap = static_cast<int>(options.iter_cap_factor * std::sqrt(double(nfree))) + 1;
        cg.setMaxIterations(cap);
        cg.compute(system.matrix);
        if (warm_start != nullptr && warm_start->size() == space.dof_count()) {
            x = cg.solveWithGuess(system.rhs, space.restrict_to_free(*warm_start));
        } else {
            x = cg.solve(system.rhs);
        }
        sol.cg_iterations = static_cast<int>(cg.iterations());
        sol.residual = relative_residual(system, x);
        sol.method = "pcg";
        if (sol.residual > options.tolerance) {
            if (options.method == SolveMethod::Pcg) {
                std::ostringstream msg;
                msg << "PCG did not converge within " << cap
                    << " iterations: relative residual " << sol.residual;
                throw std::runtime_error(msg.str());
            }
            method = SolveMethod::DirectSparse;  // Auto rescue path
            sol.method = "pcg+ldlt";
        }
    }

    if (method == SolveMethod::DirectSparse) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(system.matrix);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("sparse factorization failed (matrix not SPD?)");
        x = ldlt.solve(system.rhs);
        for (int round = 0; round < 3 && relative_residual(system, x) > options.tolerance; ++round)
            x += ldlt.solve(system.rhs - system.matrix * x);
        sol.residual = relative_residual(system, x);
        if (sol.method != "pcg+ldlt") sol.method = "ldlt";
    } else if (method == SolveMethod::DirectDense) {
        const Eigen::MatrixXd dense(system.matrix);
        Eigen::LLT<Eigen::MatrixXd> llt(dense);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("dense factorization failed (matrix not SPD?)");
        x = llt.solve(system.rhs);
        for (int round = 0; round < 3 && relative_residual(system, x) > options.tolerance; ++round)
            x += llt.solve(system.rhs - system.matrix * x);
        sol.residual = relative_residual(system, x);
        sol.method = "llt";
    }

    sol.u = space.expand_to_full(x);
    return sol;
}

double compliance(const FemSolution& solution) {
    return solution.load_full.dot(solution.u);
}

double energy_product(const AssembledSystem& system, const Eigen::VectorXd& full_vector) {
    const Eigen::VectorXd v = system.space->restrict_to_free(full_vector);
    return v.dot(system.matrix * v);
}

Eigen::VectorXd prolongate_q1(const FemSpace& coarse, const FemSpace& fine,
                              const Eigen::VectorXd& u_coarse_full) {
    if (coarse.order() != 1 || fine.order() != 1)
        throw std::invalid_argument("prolongation is implemented for Q1 spaces");
    const int nc = coarse.grid().n();
    const int nf = fine.grid().n();
    if (nf % nc != 0) throw std::invalid_argument("fine grid is not a refinement of the coarse grid");
    const int r = nf / nc;

    Eigen::VectorXd out(fine.dof_count());
    for (int j = 0; j <= nf; ++j) {
        const int ey = std::min(j / r, nc - 1);
        const double eta = static_cast<double>(j - ey * r) / r;
        for (int i = 0; i <= nf; ++i) {
            const int ex = std::min(i / r, nc - 1);
            const double xi = static_cast<double>(i - ex * r) / r;
            const double v00 = u_coarse_full(coarse.dof_id(ex, ey));
            const double v10 = u_coarse_full(coarse.dof_id(ex + 1, ey));
            const double v01 = u_coarse_full(coarse.dof_id(ex, ey + 1));
            const double v11 = u_coarse_full(coarse.dof_id(ex + 1, ey + 1));
            out(fine.dof_id(i, j)) = (1 - xi) * (1 - eta) * v00 + xi * (1 - eta) * v10 +
                                     (1 - xi) * eta * v01 + xi * eta * v11;
        }
    }
    return out;
}

}  // namespace heatopt
