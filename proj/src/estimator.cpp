#include "heatopt/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "edge_flux.hpp"

namespace heatopt {

namespace detail {

namespace {

struct Gauss1d {
    int npts;
    double pts[3];
    double wts[3];
};

const Gauss1d& edge_rule(int order) {
    static const Gauss1d g2{2, {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 0.0}, {1.0, 1.0, 0.0}};
    static const Gauss1d g3{3,
                            {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)},
                            {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
    return order == 1 ? g2 : g3;
}

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

enum class Face { Left, Right, Bottom, Top };

// ∂(∂u/∂n)/∂u_local at edge parameter t for the element face, outward
// normal of the element. The 2/h factor maps reference derivatives to
// physical ones.
void face_basis(int order, double h, Face face, double t, double* out) {
    const int nb = order + 1;
    double lt[3], dlt[3], lf[3], dlf[3];
    lagrange_1d(order, t, lt, dlt);
    const double fixed = (face == Face::Right || face == Face::Top) ? 1.0 : -1.0;
    lagrange_1d(order, fixed, lf, dlf);
    const double scale = 2.0 / h;
    const double sign = (face == Face::Right || face == Face::Top) ? 1.0 : -1.0;
    for (int b = 0; b < nb; ++b) {
        for (int a = 0; a < nb; ++a) {
            double v;
            if (face == Face::Left || face == Face::Right) {
                // edge runs along η: t is the η coordinate, ξ fixed
                v = dlf[a] * lt[b];
            } else {
                v = lt[a] * dlf[b];
            }
            out[b * nb + a] = sign * scale * v;
        }
    }
}

}  // namespace

bool compute_edge_flux(const FluxContext& ctx, int edge_id, EdgeFlux& out) {
    const StructuredGrid& grid = *ctx.grid;
    const FemSpace& space = *ctx.space;
    const Edge& edge = grid.edge(edge_id);
    if (edge.tag == EdgeTag::Dirichlet) return false;

    const int order = space.order();
    const Gauss1d& rule = edge_rule(order);
    const double h = grid.h();

    out.npts = rule.npts;
    for (int q = 0; q < rule.npts; ++q) out.qweight[q] = rule.wts[q] * h / 2.0;
    out.nsides = (edge.elems[1] >= 0) ? 2 : 1;
    out.credits = (edge.tag == EdgeTag::Interior) ? 2 : 1;

    const int ndof = space.local_dof_count();
    int dofs[kMaxLocalDofs];

    for (int s = 0; s < out.nsides; ++s) {
        EdgeSideFlux& side = out.sides[s];
        side.elem = edge.elems[s];
        side.cell = cell_of_element(ctx.model, side.elem);
        side.coeff = (*ctx.cell_coeff)[side.cell];

        Face face;
        if (edge.vertical) {
            const int edge_column = edge.nodes[0] % (grid.n() + 1);
            face = (grid.element_x(side.elem) == edge_column) ? Face::Left : Face::Right;
        } else {
            const int edge_row = edge.nodes[0] / (grid.n() + 1);
            face = (grid.element_y(side.elem) == edge_row) ? Face::Bottom : Face::Top;
        }

        space.element_dofs(side.elem, dofs);
        for (int q = 0; q < rule.npts; ++q) {
            face_basis(order, h, face, rule.pts[q], side.basis[q].data());
            double nd = 0.0;
            for (int l = 0; l < ndof; ++l) nd += side.basis[q][l] * (*ctx.u_full)(dofs[l]);
            side.normal_deriv[q] = nd;
        }
    }

    // Interior: κ_T ∂u/∂n_T + κ_T' ∂u/∂n_T'. Neumann: -κ_T ∂u/∂n_E, with
    // n_E the outward normal of the single adjacent element.
    out.k_edge = 0.0;
    for (int s = 0; s < out.nsides; ++s) out.k_edge += out.sides[s].coeff;
    for (int q = 0; q < rule.npts; ++q) {
        if (out.nsides == 2) {
            out.jump[q] = out.sides[0].coeff * out.sides[0].normal_deriv[q] +
                          out.sides[1].coeff * out.sides[1].normal_deriv[q];
        } else {
            out.jump[q] = -out.sides[0].coeff * out.sides[0].normal_deriv[q];
        }
    }
    return true;
}

}  // namespace detail

namespace {

detail::FluxContext make_context(const FemSolution& solution, const DesignField& design,
                                 double penal, std::vector<double>& coeff_storage) {
    const FemSpace& space = *solution.space;
    const StructuredGrid& grid = space.grid();
    if (grid.n() % design.cells != 0)
        throw std::invalid_argument("solution grid is not a refinement of the design's model grid");
    coeff_storage.resize(design.values.size());
    for (std::size_t i = 0; i < design.values.size(); ++i)
        coeff_storage[i] = std::pow(design.values[i], penal);
    return detail::FluxContext{&grid, &space, &solution.u, &coeff_storage,
                               ModelGrid{design.cells, grid.n() / design.cells}};
}

// Q2 interior residual: ∫_T (f + κ Δu_h)^2 with Δu_h from the biquadratic
// second derivatives; 3x3 Gauss is exact here.
double q2_interior_residual_sq(const FemSpace& space, const Eigen::VectorXd& u, int elem,
                               double coeff, double f) {
    static const double pts[3] = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
    static const double wts[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const double h = space.grid().h();
    int dofs[detail::kMaxLocalDofs];
    space.element_dofs(elem, dofs);

    auto l = [](int a, double t) {
        return a == 0 ? 0.5 * t * (t - 1.0) : (a == 1 ? 1.0 - t * t : 0.5 * t * (t + 1.0));
    };
    auto ldd = [](int a) { return a == 1 ? -2.0 : 1.0; };  // constant second derivatives

    const double jac = h * h / 4.0;
    const double d2 = 4.0 / (h * h);
    double total = 0.0;
    for (int qx = 0; qx < 3; ++qx) {
        for (int qy = 0; qy < 3; ++qy) {
            double lap = 0.0;
            for (int b = 0; b < 3; ++b) {
                for (int a = 0; a < 3; ++a) {
                    const double uxx = ldd(a) * l(b, pts[qy]);
                    const double uyy = l(a, pts[qx]) * ldd(b);
                    lap += u(dofs[b * 3 + a]) * d2 * (uxx + uyy);
                }
            }
            const double r = f + coeff * lap;
            total += wts[qx] * wts[qy] * r * r * jac;
        }
    }
    return total;
}

}  // namespace

std::vector<double> edge_jump(int edge_id, const FemSolution& solution, const DesignField& design,
                              double penal) {
    std::vector<double> coeff;
    const auto ctx = make_context(solution, design, penal, coeff);
    detail::EdgeFlux flux;
    if (!detail::compute_edge_flux(ctx, edge_id, flux))
        throw std::invalid_argument("flux jumps are undefined on Dirichlet edges");
    return std::vector<double>(flux.jump.begin(), flux.jump.begin() + flux.npts);
}

double edge_jump_sq_integral(int edge_id, const FemSolution& solution, const DesignField& design,
                             double penal) {
    std::vector<double> coeff;
    const auto ctx = make_context(solution, design, penal, coeff);
    detail::EdgeFlux flux;
    if (!detail::compute_edge_flux(ctx, edge_id, flux))
        throw std::invalid_argument("flux jumps are undefined on Dirichlet edges");
    double integral = 0.0;
    for (int q = 0; q < flux.npts; ++q) integral += flux.qweight[q] * flux.jump[q] * flux.jump[q];
    return integral;
}

ErrorBreakdown estimate(const DesignField& design, double penal, const FemSolution& solution,
                        double f) {
    std::vector<double> coeff;
    const auto ctx = make_context(solution, design, penal, coeff);
    const StructuredGrid& grid = *ctx.grid;
    const FemSpace& space = *ctx.space;
    const double h = grid.h();

    ErrorBreakdown out;
    out.eta_sq.assign(grid.element_count(), 0.0);

    // Interior residual. For Q1 the divergence term vanishes and the
    // element integral collapses to f^2 h^2.
    for (int e = 0; e < grid.element_count(); ++e) {
        const double kt = coeff[cell_of_element(ctx.model, e)];
        double res_sq;
        if (space.order() == 1) {
            res_sq = f * f * h * h;
        } else {
            res_sq = q2_interior_residual_sq(space, solution.u, e, kt, f);
        }
        const double term = (h * h / kt) * res_sq;
        out.eta_sq[e] += term;
        out.interior_part += term;
    }

    // Edge jumps, credited once per adjacent element.
    detail::EdgeFlux flux;
    for (int edge_id = 0; edge_id < grid.edge_count(); ++edge_id) {
        if (!detail::compute_edge_flux(ctx, edge_id, flux)) continue;
        double integral = 0.0;
        for (int q = 0; q < flux.npts; ++q)
            integral += flux.qweight[q] * flux.jump[q] * flux.jump[q];
        const double per_element = (h / flux.k_edge) * integral;
        for (int s = 0; s < flux.nsides; ++s) out.eta_sq[flux.sides[s].elem] += per_element;
        out.jump_part += per_element * flux.credits;
    }

    out.total = out.interior_part + out.jump_part;
    return out;
}

}  // namespace heatopt
