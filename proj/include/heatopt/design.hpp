#pragma once

#include <vector>

namespace heatopt {

/// Piecewise-constant conductivity field on the N-by-N model grid.
/// values are stored row-major from the bottom-left cell; gamma is the
/// ersatz (void) conductivity and volume_target the mean-value bound V.
struct DesignField {
    int cells = 0;  // N
    double gamma = 1e-3;
    double volume_target = 0.4;
    std::vector<double> values;

    double& at(int ix, int iy) { return values[iy * cells + ix]; }
    double at(int ix, int iy) const { return values[iy * cells + ix]; }

    double mean() const;
};

DesignField uniform_design(int cells, double gamma, double volume_target, double value);

/// Clamps every cell into [gamma, 1].
DesignField project_to_box(DesignField field);

/// Which form of the local quasi-monotonicity test to evaluate.
/// Corrected takes all four monotone-path tests between the two diagonal
/// cell pairs. AsPrinted swaps the first factor for m(a,b,c), which
/// makes the product vanish on perfect checkerboards and so defeats the
/// detector; it is kept for comparison only.
enum class QmFormula { Corrected, AsPrinted };

/// Local quasi-monotonicity violation measure for the four cells around
/// an interior node: a = SW, b = SE, c = NW, d = NE. Zero iff some cell
/// value can be reached from every other along a monotone path; positive
/// on checkerboard-like corners.
double qm_local(double a, double b, double c, double d, QmFormula formula = QmFormula::Corrected);

/// QM(k): sum of qm_local over all (N-1)^2 interior nodes, unnormalized.
double qm_value(const DesignField& field, QmFormula formula = QmFormula::Corrected);

}  // namespace heatopt
