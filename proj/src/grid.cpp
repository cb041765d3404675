#include "heatopt/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace heatopt {

namespace {

// Endpoints may sit off the node lattice by up to this fraction of an
// edge and still snap; the slack absorbs decimal-to-binary noise.
constexpr double kSnapTolEdges = 0.4 + 1e-9;

const char* side_name(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Bottom: return "bottom";
        case Side::Top: return "top";
    }
    return "?";
}

int snap_endpoint(double value, int n, const SinkSegment& seg) {
    const double scaled = value * n;
    const long nearest = std::llround(scaled);
    if (std::abs(scaled - static_cast<double>(nearest)) > kSnapTolEdges) {
        std::ostringstream msg;
        msg << "sink segment (side=" << side_name(seg.side) << ", center=" << seg.center
            << ", length=" << seg.length << ") does not snap to the n=" << n
            << " node lattice: endpoint " << value << " is " << std::abs(scaled - nearest)
            << " edges away from the nearest node";
        throw std::invalid_argument(msg.str());
    }
    if (nearest < 0 || nearest > n) {
        std::ostringstream msg;
        msg << "sink segment (side=" << side_name(seg.side) << ", center=" << seg.center
            << ", length=" << seg.length << ") leaves the unit square";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<int>(nearest);
}

}  // namespace

BoundarySpec BoundarySpec::standard_sink() {
    return BoundarySpec{{SinkSegment{Side::Left, 0.5, 0.2}}};
}

StructuredGrid::StructuredGrid(int n, std::vector<SnappedSink> sinks)
    : n_(n), sinks_(std::move(sinks)) {
    if (n_ < 1) throw std::invalid_argument("grid size must be at least 1");
    for (const auto& s : sinks_) {
        if (s.i0 < 0 || s.i1 > n_ || s.i0 >= s.i1)
            throw std::invalid_argument("snapped sink segment is degenerate or out of range");
    }

    edges_.resize(2 * n_ * (n_ + 1));
    // Vertical edges: column c in [0, n], row r in [0, n).
    for (int c = 0; c <= n_; ++c) {
        for (int r = 0; r < n_; ++r) {
            Edge e;
            e.vertical = true;
            e.nodes = {node_id(c, r), node_id(c, r + 1)};
            e.elems = {c > 0 ? element_id(c - 1, r) : -1, c < n_ ? element_id(c, r) : -1};
            if (c > 0 && c < n_) {
                e.tag = EdgeTag::Interior;
            } else {
                const Side side = (c == 0) ? Side::Left : Side::Right;
                e.tag = edge_in_sink(side, r) ? EdgeTag::Dirichlet : EdgeTag::Neumann;
            }
            if (e.elems[0] < 0) std::swap(e.elems[0], e.elems[1]);
            edges_[vertical_edge_id(c, r)] = e;
        }
    }
    // Horizontal edges: row r in [0, n], column c in [0, n).
    for (int r = 0; r <= n_; ++r) {
        for (int c = 0; c < n_; ++c) {
            Edge e;
            e.vertical = false;
            e.nodes = {node_id(c, r), node_id(c + 1, r)};
            e.elems = {r > 0 ? element_id(c, r - 1) : -1, r < n_ ? element_id(c, r) : -1};
            if (r > 0 && r < n_) {
                e.tag = EdgeTag::Interior;
            } else {
                const Side side = (r == 0) ? Side::Bottom : Side::Top;
                e.tag = edge_in_sink(side, c) ? EdgeTag::Dirichlet : EdgeTag::Neumann;
            }
            if (e.elems[0] < 0) std::swap(e.elems[0], e.elems[1]);
            edges_[horizontal_edge_id(r, c)] = e;
        }
    }
}

std::array<double, 2> StructuredGrid::node_coords(int node) const {
    const int ix = node % (n_ + 1);
    const int iy = node / (n_ + 1);
    return {static_cast<double>(ix) / n_, static_cast<double>(iy) / n_};
}

std::array<int, 4> StructuredGrid::element_nodes(int e) const {
    const int ex = element_x(e);
    const int ey = element_y(e);
    return {node_id(ex, ey), node_id(ex + 1, ey), node_id(ex + 1, ey + 1), node_id(ex, ey + 1)};
}

std::array<int, 4> StructuredGrid::element_edges(int e) const {
    const int ex = element_x(e);
    const int ey = element_y(e);
    return {vertical_edge_id(ex, ey), vertical_edge_id(ex + 1, ey),
            horizontal_edge_id(ey, ex), horizontal_edge_id(ey + 1, ex)};
}

bool StructuredGrid::edge_in_sink(Side side, int along_index) const {
    for (const auto& s : sinks_) {
        if (s.side == side && along_index >= s.i0 && along_index + 1 <= s.i1) return true;
    }
    return false;
}

bool StructuredGrid::node_on_dirichlet(int ix, int iy) const {
    for (const auto& s : sinks_) {
        switch (s.side) {
            case Side::Left:
                if (ix == 0 && iy >= s.i0 && iy <= s.i1) return true;
                break;
            case Side::Right:
                if (ix == n_ && iy >= s.i0 && iy <= s.i1) return true;
                break;
            case Side::Bottom:
                if (iy == 0 && ix >= s.i0 && ix <= s.i1) return true;
                break;
            case Side::Top:
                if (iy == n_ && ix >= s.i0 && ix <= s.i1) return true;
                break;
        }
    }
    return false;
}

double StructuredGrid::dirichlet_length() const {
    double total = 0.0;
    for (const auto& s : sinks_) total += static_cast<double>(s.i1 - s.i0) * h();
    return total;
}

StructuredGrid build_grid(int n, const BoundarySpec& boundary) {
    if (n < 1) throw std::invalid_argument("grid size must be at least 1");
    std::vector<SnappedSink> snapped;
    snapped.reserve(boundary.sinks.size());
    for (const auto& seg : boundary.sinks) {
        const int i0 = snap_endpoint(seg.center - seg.length / 2.0, n, seg);
        const int i1 = snap_endpoint(seg.center + seg.length / 2.0, n, seg);
        if (i1 <= i0) {
            std::ostringstream msg;
            msg << "sink segment (side=" << (seg.side == Side::Left     ? "left"
                                             : seg.side == Side::Right  ? "right"
                                             : seg.side == Side::Bottom ? "bottom"
                                                                        : "top")
                << ", center=" << seg.center << ", length=" << seg.length
                << ") collapses to a point on the n=" << n << " grid";
            throw std::invalid_argument(msg.str());
        }
        snapped.push_back(SnappedSink{seg.side, i0, i1});
    }
    return StructuredGrid(n, std::move(snapped));
}

StructuredGrid refine(const StructuredGrid& grid, int factor) {
    if (factor < 1) throw std::invalid_argument("refinement factor must be at least 1");
    std::vector<SnappedSink> scaled = grid.sinks();
    for (auto& s : scaled) {
        s.i0 *= factor;
        s.i1 *= factor;
    }
    return StructuredGrid(grid.n() * factor, std::move(scaled));
}

int cell_of_element(const ModelGrid& model, int element_index) {
    const int n = model.computational_n();
    const int ex = element_index % n;
    const int ey = element_index / n;
    return (ey / model.ratio) * model.cells + (ex / model.ratio);
}

}  // namespace heatopt
