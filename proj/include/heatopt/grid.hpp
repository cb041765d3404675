#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace heatopt {

/// Which side of the unit square a boundary feature sits on.
enum class Side { Left, Right, Bottom, Top };

enum class EdgeTag { Interior, Dirichlet, Neumann };

/// A heat-sink segment on one side of the square: the portion of the
/// boundary where temperature is fixed to zero. Coordinates run along
/// the side (y for Left/Right, x for Bottom/Top), in [0,1].
struct SinkSegment {
    Side side = Side::Left;
    double center = 0.5;
    double length = 0.2;

    bool operator==(const SinkSegment&) const = default;
};

/// Boundary description: the listed sink segments form the Dirichlet
/// part of the boundary, everything else is insulated (zero flux).
struct BoundarySpec {
    std::vector<SinkSegment> sinks;

    /// Single sink on the left edge, centered, covering 0.2 of the side.
    static BoundarySpec standard_sink();

    bool operator==(const BoundarySpec&) const = default;
};

/// Sink segment snapped to the node lattice of a particular grid:
/// node indices i0 < i1 along the side.
struct SnappedSink {
    Side side;
    int i0;
    int i1;
};

/// One element face. `elems[1] < 0` marks a boundary edge. For vertical
/// edges elems = {left, right} element ids; for horizontal edges
/// elems = {below, above}.
struct Edge {
    std::array<int, 2> nodes;
    std::array<int, 2> elems;
    EdgeTag tag;
    bool vertical;
};

/// Uniform n-by-n quadrilateral mesh of the unit square. Nodes and
/// elements are numbered row-major from the bottom-left corner, so the
/// layout is reproducible bit-for-bit across runs.
class StructuredGrid {
public:
    StructuredGrid(int n, std::vector<SnappedSink> sinks);

    int n() const { return n_; }
    double h() const { return 1.0 / n_; }

    int node_count() const { return (n_ + 1) * (n_ + 1); }
    int element_count() const { return n_ * n_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    int node_id(int ix, int iy) const { return iy * (n_ + 1) + ix; }
    int element_id(int ex, int ey) const { return ey * n_ + ex; }
    int element_x(int e) const { return e % n_; }
    int element_y(int e) const { return e / n_; }

    std::array<double, 2> node_coords(int node) const;

    /// Corner node ids of an element, counterclockwise from bottom-left.
    std::array<int, 4> element_nodes(int e) const;

    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int id) const { return edges_[id]; }

    /// Edge ids bounding an element: {left, right, bottom, top}.
    std::array<int, 4> element_edges(int e) const;

    /// True if the node at lattice position (ix, iy) lies on closed Γ_u.
    bool node_on_dirichlet(int ix, int iy) const;

    const std::vector<SnappedSink>& sinks() const { return sinks_; }

    double dirichlet_length() const;

private:
    int vertical_edge_id(int column, int row) const { return column * n_ + row; }
    int horizontal_edge_id(int row, int column) const { return n_ * (n_ + 1) + row * n_ + column; }
    bool edge_in_sink(Side side, int along_index) const;

    int n_;
    std::vector<SnappedSink> sinks_;
    std::vector<Edge> edges_;
};

/// Builds the n-by-n grid, snapping sink endpoints to the node lattice.
/// An endpoint may be off-lattice by at most 0.4 of an edge; segments
/// further off (or degenerate after snapping) are rejected.
StructuredGrid build_grid(int n, const BoundarySpec& boundary);

/// Uniform refinement by an integer factor. Dirichlet geometry is
/// inherited from the input grid, never re-snapped, so Γ_u is identical.
StructuredGrid refine(const StructuredGrid& grid, int factor);

/// Design (model) grid bookkeeping: N-by-N ground cells, each covering
/// an r-by-r block of computational elements.
struct ModelGrid {
    int cells;  // N
    int ratio;  // r, computational n = r * N

    int computational_n() const { return cells * ratio; }
};

/// Ground cell containing a computational element (row-major cell id).
int cell_of_element(const ModelGrid& model, int element_index);

}  // namespace heatopt
