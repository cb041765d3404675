#include "heatopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "heatopt/estimator.hpp"

namespace heatopt {

GradientField sensitivity_filter(const DesignField& design, const GradientField& gradient,
                                 double radius) {
    GradientField out = gradient;
    if (radius <= 0.0) return out;
    const int n = design.cells;
    const double cell = 1.0 / n;
    const int window = static_cast<int>(std::ceil(radius / cell));
    if (window < 1) return out;

    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            double num = 0.0, den = 0.0;
            for (int jy = std::max(0, iy - window); jy <= std::min(n - 1, iy + window); ++jy) {
                for (int jx = std::max(0, ix - window); jx <= std::min(n - 1, ix + window); ++jx) {
                    const double dist =
                        cell * std::hypot(double(ix - jx), double(iy - jy));
                    const double w = radius - dist;
                    if (w <= 0.0) continue;
                    num += w * design.at(jx, jy) * gradient.at(jx, jy);
                    den += w;
                }
            }
            out.at(ix, iy) = num / (design.at(ix, iy) * den);
        }
    }
    return out;
}

MmaSolver::MmaSolver(int nvars, double lower_bound, double upper_bound, MmaOptions options)
    : n_(nvars), xmin_(lower_bound), xmax_(upper_bound), opt_(options) {
    if (nvars < 1) throw std::invalid_argument("MMA needs at least one variable");
    if (!(upper_bound > lower_bound)) throw std::invalid_argument("empty box");
    lower_.assign(n_, 0.0);
    upper_.assign(n_, 0.0);
    xold1_.assign(n_, 0.0);
    xold2_.assign(n_, 0.0);
}

namespace {

// Minimizer of p/(U-x) + q/(x-L) + c*x on [a, b]; the derivative is
// strictly increasing, so plain bisection is safe.
double separable_minimum(double p, double q, double c, double L, double U, double a, double b) {
    auto deriv = [&](double x) {
        const double du = U - x;
        const double dl = x - L;
        return p / (du * du) - q / (dl * dl) + c;
    };
    if (deriv(a) >= 0.0) return a;
    if (deriv(b) <= 0.0) return b;
    double lo = a, hi = b;
    for (int it = 0; it < 70; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (deriv(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> MmaSolver::subproblem(const std::vector<double>& x,
                                          const std::vector<double>& dobj, double constraint,
                                          const std::vector<double>& dconstraint,
                                          double move) const {
    std::vector<double> alpha(n_), beta(n_), p0(n_), q0(n_);
    for (int j = 0; j < n_; ++j) {
        alpha[j] = std::max({xmin_, lower_[j] + 0.1 * (x[j] - lower_[j]), x[j] - move,
                             opt_.down_factor * x[j]});
        beta[j] = std::min({xmax_, upper_[j] - 0.1 * (upper_[j] - x[j]), x[j] + move});
        if (beta[j] < alpha[j]) beta[j] = alpha[j];
        const double du = upper_[j] - x[j];
        const double dl = x[j] - lower_[j];
        const double dfp = std::max(dobj[j], 0.0);
        const double dfm = std::max(-dobj[j], 0.0);
        const double tiny = 0.5e-6 / (upper_[j] - lower_[j]);
        p0[j] = du * du * (dfp + 0.001 * std::abs(dobj[j]) + tiny);
        q0[j] = dl * dl * (dfm + 0.001 * std::abs(dobj[j]) + tiny);
    }

    // The constraint is linear, so its value at a candidate point is exact:
    // g(y) = g(x) + Σ dg_j (y_j - x_j). Bisection drives it to zero when active.
    auto candidate = [&](double lambda, std::vector<double>& y) {
        double g = constraint;
        for (int j = 0; j < n_; ++j) {
            y[j] = separable_minimum(p0[j], q0[j], lambda * dconstraint[j], lower_[j], upper_[j],
                                     alpha[j], beta[j]);
            g += dconstraint[j] * (y[j] - x[j]);
        }
        return g;
    };

    std::vector<double> y(n_);
    if (candidate(0.0, y) <= 0.0) return y;

    double lo = 0.0, hi = 1.0;
    while (candidate(hi, y) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e14) throw std::runtime_error("MMA subproblem infeasible");
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g = candidate(mid, y);
        if (std::abs(g) <= 1e-13) break;
        if (g > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    candidate(0.5 * (lo + hi), y);
    return y;
}

std::vector<double> MmaSolver::step(const std::vector<double>& x, const std::vector<double>& dobj,
                                    double constraint, const std::vector<double>& dconstraint) {
    if (static_cast<int>(x.size()) != n_ || static_cast<int>(dobj.size()) != n_ ||
        static_cast<int>(dconstraint.size()) != n_)
        throw std::invalid_argument("MMA input size mismatch");

    ++iter_;
    const double range = xmax_ - xmin_;
    if (iter_ <= 2) {
        for (int j = 0; j < n_; ++j) {
            lower_[j] = x[j] - opt_.asym_init * range;
            upper_[j] = x[j] + opt_.asym_init * range;
        }
    } else {
        for (int j = 0; j < n_; ++j) {
            const double osc = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
            const double factor = osc < 0.0 ? opt_.asym_shrink : (osc > 0.0 ? opt_.asym_grow : 1.0);
            lower_[j] = x[j] - factor * (xold1_[j] - lower_[j]);
            upper_[j] = x[j] + factor * (upper_[j] - xold1_[j]);
            lower_[j] = std::clamp(lower_[j], x[j] - 10.0 * range, x[j] - 0.01 * range);
            upper_[j] = std::clamp(upper_[j], x[j] + 0.01 * range, x[j] + 10.0 * range);
        }
    }
    xold2_ = xold1_;
    xold1_ = x;

    try {
        return subproblem(x, dobj, constraint, dconstraint, opt_.move_limit);
    } catch (const std::runtime_error&) {
        // one retry with a halved move limit, then give up
        return subproblem(x, dobj, constraint, dconstraint, 0.5 * opt_.move_limit);
    }
}

OptimizeResult optimize(const ProblemSetup& problem, const OptimizerConfig& config,
                        const IterationCallback& on_iteration) {
    if (config.change_tol <= 0.0) throw std::invalid_argument("change tolerance must be positive");
    if (config.move_limit <= 0.0 || config.move_limit > 1.0)
        throw std::invalid_argument("move limit must lie in (0, 1]");
    if (config.order == 2 && config.correction > 0.0)
        throw std::invalid_argument(
            "estimator gradients are Q1-only; use order 1 or set the correction to 0");

    const StructuredGrid model_grid = build_grid(problem.cells, problem.boundary);
    const StructuredGrid grid =
        problem.refine_ratio > 1 ? refine(model_grid, problem.refine_ratio) : model_grid;
    const FemSpace space(grid, config.order);

    OptimizeResult result;
    result.design = uniform_design(problem.cells, problem.gamma, config.volume, config.volume);

    const int ncells = problem.cells * problem.cells;
    MmaOptions mma_opts;
    mma_opts.move_limit = config.move_limit;
    MmaSolver mma(ncells, problem.gamma, 1.0, mma_opts);
    const std::vector<double> dconstraint(
        ncells, 1.0 / (static_cast<double>(ncells) * config.volume));

    Eigen::VectorXd warm;
    double last_change = 0.0;
    try {
        for (int iter = 0;; ++iter) {
            const AssembledSystem system =
                assemble(result.design, config.penal, space, problem.source);
            const FemSolution solution =
                solve(system, config.solver, warm.size() > 0 ? &warm : nullptr);
            warm = solution.u;

            const double phi = compliance(solution);
            const ErrorBreakdown err =
                estimate(result.design, config.penal, solution, problem.source);

            IterationRecord rec;
            rec.iter = iter;
            rec.phi_h = phi;
            rec.e_apost = err.total;
            rec.phi_c = phi + config.correction * err.total;
            rec.volume = result.design.mean();
            rec.qm = problem.cells >= 2 ? qm_value(result.design) : 0.0;
            rec.change = last_change;
            rec.cg_iters = solution.cg_iterations;
            result.history.records.push_back(rec);
            if (on_iteration) on_iteration(result.design, rec);

            if (iter > 0 && last_change < config.change_tol) {
                result.history.converged = true;
                break;
            }
            if (iter >= config.max_iters) break;

            GradientField grad = combined_gradient(result.design, config.penal, solution,
                                                   problem.source, config.correction, system,
                                                   config.solver);
            if (config.filter_radius > 0.0)
                grad = sensitivity_filter(result.design, grad, config.filter_radius);

            const double g0 = result.design.mean() / config.volume - 1.0;
            const std::vector<double> next =
                mma.step(result.design.values, grad.values, g0, dconstraint);

            last_change = 0.0;
            for (int c = 0; c < ncells; ++c)
                last_change = std::max(last_change, std::abs(next[c] - result.design.values[c]));
            result.design.values = next;
        }
    } catch (const std::exception& ex) {
        result.history.aborted = true;
        result.history.error = ex.what();
    }
    return result;
}

}  // namespace heatopt
