#include "heatopt/design.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace heatopt {

namespace {

// m(a,b,c) = |b-a| + |c-b| - |c-a|: twice the distance of b from the
// interval spanned by a and c; zero iff b lies between them.
double monotone_excess(double a, double b, double c) {
    return std::abs(b - a) + std::abs(c - b) - std::abs(c - a);
}

}  // namespace

double DesignField::mean() const {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

DesignField uniform_design(int cells, double gamma, double volume_target, double value) {
    if (cells < 1) throw std::invalid_argument("model grid needs at least one cell per side");
    DesignField f;
    f.cells = cells;
    f.gamma = gamma;
    f.volume_target = volume_target;
    f.values.assign(static_cast<std::size_t>(cells) * cells, value);
    return f;
}

DesignField project_to_box(DesignField field) {
    for (double& v : field.values) v = std::clamp(v, field.gamma, 1.0);
    return field;
}

double qm_local(double a, double b, double c, double d, QmFormula formula) {
    const double first = (formula == QmFormula::Corrected) ? monotone_excess(a, b, d)
                                                           : monotone_excess(a, b, c);
    return first * monotone_excess(a, c, d) * monotone_excess(b, a, c) * monotone_excess(b, d, c);
}

double qm_value(const DesignField& field, QmFormula formula) {
    const int n = field.cells;
    if (n < 2) throw std::invalid_argument("QM needs a model grid with at least 2x2 cells");
    double total = 0.0;
    for (int iy = 0; iy + 1 < n; ++iy) {
        for (int ix = 0; ix + 1 < n; ++ix) {
            total += qm_local(field.at(ix, iy), field.at(ix + 1, iy), field.at(ix, iy + 1),
                              field.at(ix + 1, iy + 1), formula);
        }
    }
    return total;
}

}  // namespace heatopt
