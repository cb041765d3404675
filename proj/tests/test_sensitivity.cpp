#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "heatopt/sensitivity.hpp"

using namespace heatopt;

namespace {

constexpr double kGamma = 1e-3;
constexpr double kSource = 1e-2;
constexpr double kPenal = 4.0;

// Sink snapping exactly to nodes at N = 4: [1/4, 3/4] on the left edge.
BoundarySpec centered_sink() {
    return BoundarySpec{{SinkSegment{Side::Left, 0.5, 0.5}}};
}

DesignField test_design(int cells, unsigned seed) {
    std::mt19937 rng(seed);
    // interior of the box, away from ties and the box edges so central
    // differences stay feasible and no jump kink is straddled
    std::uniform_real_distribution<double> dist(0.15, 0.85);
    DesignField f = uniform_design(cells, kGamma, 0.4, 0.0);
    for (double& v : f.values) v = dist(rng);
    return f;
}

struct Workbench {
    StructuredGrid grid;
    FemSpace space;
    DesignField design;
    AssembledSystem system;
    FemSolution solution;

    explicit Workbench(int cells, unsigned seed = 42, double f = kSource)
        : grid(build_grid(cells, centered_sink())),
          space(grid, 1),
          design(test_design(cells, seed)),
          system(assemble(design, kPenal, space, f)),
          solution(solve(system)) {}
};

double solve_compliance(const FemSpace& space, const DesignField& k, double f) {
    return compliance(solve(assemble(k, kPenal, space, f)));
}

double solve_estimator(const FemSpace& space, const DesignField& k, double f) {
    const FemSolution sol = solve(assemble(k, kPenal, space, f));
    return estimate(k, kPenal, sol, f).total;
}

double max_rel_error(const GradientField& analytic, const GradientField& reference,
                     double floor = 1e-12) {
    double worst = 0.0;
    for (std::size_t c = 0; c < analytic.values.size(); ++c) {
        if (std::abs(reference.values[c]) <= floor) continue;
        worst = std::max(worst, std::abs(analytic.values[c] - reference.values[c]) /
                                    std::abs(reference.values[c]));
    }
    return worst;
}

}  // namespace

TEST_SUITE("sensitivity") {

TEST_CASE("finite differences recover an analytic quadratic") {
    DesignField design = test_design(4, 7);
    const auto sum_of_squares = [](const DesignField& k) {
        double s = 0.0;
        for (double v : k.values) s += v * v;
        return s;
    };
    const GradientField fd = finite_difference_gradient(sum_of_squares, design);
    for (std::size_t c = 0; c < design.values.size(); ++c)
        CHECK(fd.values[c] == doctest::Approx(2.0 * design.values[c]).epsilon(1e-8));
}

TEST_CASE("one-sided fallback at the box edge is noted") {
    DesignField design = uniform_design(2, kGamma, 0.4, 0.5);
    design.values[0] = 1.0;       // upper edge: forces a backward stencil
    design.values[3] = kGamma;    // lower edge: forces a forward stencil
    const auto linear = [](const DesignField& k) {
        double s = 0.0;
        for (double v : k.values) s += 3.0 * v;
        return s;
    };
    std::vector<std::string> notes;
    const GradientField fd = finite_difference_gradient(linear, design, {}, &notes);
    CHECK(notes.size() == 2);
    for (double g : fd.values) CHECK(g == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("compliance gradient") {
    SUBCASE("zero temperature field gives a zero gradient") {
        Workbench w(4, 42, 0.0);
        const GradientField g = compliance_gradient(w.design, kPenal, w.solution);
        for (double v : g.values) CHECK(v == 0.0);
    }
    SUBCASE("entries are never positive") {
        Workbench w(4);
        const GradientField g = compliance_gradient(w.design, kPenal, w.solution);
        for (double v : g.values) CHECK(v <= 0.0);
    }
    SUBCASE("matches finite differences on N = 4") {
        Workbench w(4);
        const GradientField g = compliance_gradient(w.design, kPenal, w.solution);
        const GradientField fd = finite_difference_gradient(
            [&](const DesignField& k) { return solve_compliance(w.space, k, kSource); }, w.design);
        CHECK(max_rel_error(g, fd) <= 1e-4);
    }
}

TEST_CASE("estimator gradient") {
    SUBCASE("zero source gives a zero gradient") {
        Workbench w(4, 42, 0.0);
        const GradientField g =
            estimator_gradient(w.design, kPenal, w.solution, 0.0, w.system);
        for (double v : g.values) CHECK(v == 0.0);
    }
    SUBCASE("matches finite differences on N = 4") {
        Workbench w(4);
        const GradientField g =
            estimator_gradient(w.design, kPenal, w.solution, kSource, w.system);
        const GradientField fd = finite_difference_gradient(
            [&](const DesignField& k) { return solve_estimator(w.space, k, kSource); }, w.design);
        CHECK(max_rel_error(g, fd) <= 1e-3);
    }
    SUBCASE("dropping the adjoint term breaks the match") {
        Workbench w(4);
        const EstimatorGradient parts =
            estimator_gradient_detailed(w.design, kPenal, w.solution, kSource, w.system);
        const GradientField fd = finite_difference_gradient(
            [&](const DesignField& k) { return solve_estimator(w.space, k, kSource); }, w.design);
        CHECK(max_rel_error(parts.explicit_part, fd) > 1e-2);
    }
    SUBCASE("adjoint solve reuses the primal operator accurately") {
        Workbench w(8, 9);
        const EstimatorGradient parts =
            estimator_gradient_detailed(w.design, kPenal, w.solution, kSource, w.system);
        CHECK(parts.adjoint_residual <= 1e-10);
    }
    SUBCASE("rejects biquadratic state solves") {
        Workbench w(4);
        const FemSpace q2(w.grid, 2);
        const AssembledSystem sys2 = assemble(w.design, kPenal, q2, kSource);
        const FemSolution sol2 = solve(sys2);
        CHECK_THROWS_AS(estimator_gradient(w.design, kPenal, sol2, kSource, sys2),
                        std::invalid_argument);
    }
    SUBCASE("mirror-symmetric problem gives a mirror-symmetric gradient") {
        const int cells = 4;
        const StructuredGrid grid = build_grid(cells, centered_sink());
        const FemSpace space(grid, 1);
        const DesignField design = uniform_design(cells, kGamma, 0.4, 0.4);
        const AssembledSystem system = assemble(design, kPenal, space, kSource);
        SolverOptions direct;
        direct.method = SolveMethod::DirectDense;
        const FemSolution solution = solve(system, direct);
        const GradientField g =
            estimator_gradient(design, kPenal, solution, kSource, system, direct);
        for (int iy = 0; iy < cells; ++iy)
            for (int ix = 0; ix < cells; ++ix)
                CHECK(g.at(ix, iy) ==
                      doctest::Approx(g.at(ix, cells - 1 - iy)).epsilon(1e-9));
    }
}

TEST_CASE("gradients with a refined computational grid") {
    // state solved on n = 2N: per-cell terms must sum over the nested
    // elements of each ground cell
    const int cells = 4;
    const StructuredGrid model = build_grid(cells, centered_sink());
    const StructuredGrid grid = refine(model, 2);
    const FemSpace space(grid, 1);
    const DesignField design = test_design(cells, 23);
    const AssembledSystem system = assemble(design, kPenal, space, kSource);
    const FemSolution solution = solve(system);

    const GradientField gc = compliance_gradient(design, kPenal, solution);
    const GradientField fd_c = finite_difference_gradient(
        [&](const DesignField& k) { return solve_compliance(space, k, kSource); }, design);
    CHECK(max_rel_error(gc, fd_c) <= 1e-4);

    const GradientField ge = estimator_gradient(design, kPenal, solution, kSource, system);
    const GradientField fd_e = finite_difference_gradient(
        [&](const DesignField& k) { return solve_estimator(space, k, kSource); }, design);
    CHECK(max_rel_error(ge, fd_e) <= 1e-3);
}

TEST_CASE("combined gradient") {
    Workbench w(4);
    SUBCASE("C = 0 reduces to the compliance gradient") {
        const GradientField g =
            combined_gradient(w.design, kPenal, w.solution, kSource, 0.0, w.system);
        const GradientField gc = compliance_gradient(w.design, kPenal, w.solution);
        for (std::size_t c = 0; c < g.values.size(); ++c) CHECK(g.values[c] == gc.values[c]);
    }
    SUBCASE("linear in C") {
        const GradientField g0 =
            combined_gradient(w.design, kPenal, w.solution, kSource, 0.0, w.system);
        const GradientField g1 =
            combined_gradient(w.design, kPenal, w.solution, kSource, 1.0, w.system);
        const GradientField g2 =
            combined_gradient(w.design, kPenal, w.solution, kSource, 2.0, w.system);
        for (std::size_t c = 0; c < g0.values.size(); ++c) {
            const double lhs = g2.values[c] - g0.values[c];
            const double rhs = 2.0 * (g1.values[c] - g0.values[c]);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
    SUBCASE("matches finite differences at C = 1") {
        const GradientField g =
            combined_gradient(w.design, kPenal, w.solution, kSource, 1.0, w.system);
        const GradientField fd = finite_difference_gradient(
            [&](const DesignField& k) {
                return solve_compliance(w.space, k, kSource) + solve_estimator(w.space, k, kSource);
            },
            w.design);
        CHECK(max_rel_error(g, fd) <= 1e-3);
    }
    SUBCASE("negative C is rejected") {
        CHECK_THROWS_AS(combined_gradient(w.design, kPenal, w.solution, kSource, -0.5, w.system),
                        std::invalid_argument);
    }
}

}  // TEST_SUITE
