#pragma once

#include <functional>
#include <string>
#include <vector>

#include "heatopt/design.hpp"
#include "heatopt/fem.hpp"
#include "heatopt/grid.hpp"
#include "heatopt/sensitivity.hpp"

namespace heatopt {

struct OptimizerConfig {
    double correction = 1.0;  // C, weight on the error estimator
    double penal = 4.0;       // SIMP exponent p
    double volume = 0.4;      // V, mean-conductivity bound
    int max_iters = 400;
    double move_limit = 0.2;    // absolute per-cell step bound
    double change_tol = 0.01;   // stop when max |Δk| drops below this
    double filter_radius = 0.0; // sensitivity filter, 0 = off
    int order = 1;              // element order of the state solve
    SolverOptions solver{};

    bool operator==(const OptimizerConfig&) const = default;
};

struct IterationRecord {
    int iter = 0;
    double phi_h = 0.0;
    double e_apost = 0.0;
    double phi_c = 0.0;
    double volume = 0.0;
    double qm = 0.0;
    double change = 0.0;
    int cg_iters = 0;
};

struct OptimizationHistory {
    std::vector<IterationRecord> records;
    bool converged = false;
    bool aborted = false;
    std::string error;
};

/// Classical density-weighted sensitivity filter:
///   ĝ_e = Σ_j w_j k_j g_j / (k_e Σ_j w_j),  w_j = max(0, radius - dist(e,j)),
/// distances between cell centers in physical units. radius below the
/// cell size leaves the gradient untouched.
GradientField sensitivity_filter(const DesignField& design, const GradientField& gradient,
                                 double radius);

struct MmaOptions {
    double move_limit = 0.2;
    double asym_init = 0.5;
    double asym_shrink = 0.7;
    double asym_grow = 1.2;
    // Down-moves are additionally capped at this fraction of the current
    // value. The heat source lives in void regions too, so letting a cell
    // collapse to the ersatz floor in one step spikes the temperature
    // there; a geometric descent keeps early iterations stable.
    double down_factor = 0.5;
};

/// Method of Moving Asymptotes specialized to one linear inequality
/// constraint. The separable subproblem is solved per variable; the
/// multiplier of the constraint is found by bisection, so an active
/// volume bound is met to bisection accuracy.
class MmaSolver {
public:
    MmaSolver(int nvars, double lower_bound, double upper_bound, MmaOptions options = {});

    /// One design update. `dconstraint` entries must be positive (a
    /// volume-type constraint); `constraint` is its current value, with
    /// feasibility meaning <= 0. Throws if the subproblem is infeasible
    /// even after halving the move limit once.
    std::vector<double> step(const std::vector<double>& x, const std::vector<double>& dobj,
                             double constraint, const std::vector<double>& dconstraint);

    int iterations_taken() const { return iter_; }

private:
    std::vector<double> subproblem(const std::vector<double>& x, const std::vector<double>& dobj,
                                   double constraint, const std::vector<double>& dconstraint,
                                   double move) const;

    int n_;
    double xmin_, xmax_;
    MmaOptions opt_;
    int iter_ = 0;
    std::vector<double> lower_, upper_, xold1_, xold2_;
};

struct ProblemSetup {
    int cells = 64;  // N, model grid per side
    BoundarySpec boundary = BoundarySpec::standard_sink();
    double source = 1e-2;  // f
    double gamma = 1e-3;
    int refine_ratio = 1;  // computational grid n = ratio * N

    bool operator==(const ProblemSetup&) const = default;
};

struct OptimizeResult {
    DesignField design;
    OptimizationHistory history;
};

using IterationCallback =
    std::function<void(const DesignField& design, const IterationRecord& record)>;

/// Minimizes Φ_h + C E_apost over the admissible designs, starting from
/// the uniform distribution k ≡ V. Records one evaluation per iterate,
/// including the initial design.
OptimizeResult optimize(const ProblemSetup& problem, const OptimizerConfig& config,
                        const IterationCallback& on_iteration = {});

}  // namespace heatopt
