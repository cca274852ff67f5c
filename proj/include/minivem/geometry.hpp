#pragma once

// Polygonal meshes, per-cell geometry and quadrature over polygons and edges.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace minivem {

using Point = Eigen::Vector2d;

/// Thrown for malformed meshes; the message names the offending cell or edge.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a numerical construction cannot proceed (singular systems, bad cells).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double signed_area(std::span<const Point> ring)
{
    double twice = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i)
        twice += cross(ring[i], ring[(i + 1) % ring.size()]);
    return 0.5 * twice;
}

inline Point area_centroid(std::span<const Point> ring)
{
    // Shoelace centroid; stable enough once shifted to the first vertex.
    const Point origin = ring[0];
    double a = 0.0;
    Point c = Point::Zero();
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point p = ring[i] - origin;
        const Point q = ring[(i + 1) % ring.size()] - origin;
        const double w = cross(p, q);
        a += w;
        c += w * (p + q);
    }
    return origin + c / (3.0 * a);
}

inline double ring_diameter(std::span<const Point> ring)
{
    double d = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i)
        for (std::size_t j = i + 1; j < ring.size(); ++j)
            d = std::max(d, (ring[i] - ring[j]).norm());
    return d;
}

namespace detail {

inline bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d)
{
    auto orient = [](const Point& p, const Point& q, const Point& r) { return cross(q - p, r - p); };
    auto on_segment = [](const Point& p, const Point& q, const Point& r) {
        return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
               std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
    };
    const double d1 = orient(c, d, a), d2 = orient(c, d, b);
    const double d3 = orient(a, b, c), d4 = orient(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

} // namespace detail

/// True when no two non-adjacent edges of the closed ring touch.
inline bool ring_is_simple(std::span<const Point> ring)
{
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (detail::segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

/// Geometric data of a single polygonal cell, vertices counter-clockwise.
struct CellGeometry {
    std::vector<Point> vertices;
    double area = 0.0;
    Point centroid = Point::Zero();
    double diameter = 0.0;

    CellGeometry() = default;
    explicit CellGeometry(std::vector<Point> ring)
        : vertices(std::move(ring)),
          area(signed_area(vertices)),
          centroid(area_centroid(vertices)),
          diameter(ring_diameter(vertices))
    {
    }

    std::size_t num_vertices() const { return vertices.size(); }
    const Point& vertex(std::size_t i) const { return vertices[i % vertices.size()]; }

    /// Outward unit normal of local edge i (from vertex i to vertex i+1).
    Point edge_normal(std::size_t i) const
    {
        const Point t = vertex(i + 1) - vertex(i);
        return Point(t.y(), -t.x()) / t.norm();
    }
    double edge_length(std::size_t i) const { return (vertex(i + 1) - vertex(i)).norm(); }

    CellGeometry scaled(double s) const
    {
        std::vector<Point> ring;
        ring.reserve(vertices.size());
        for (const auto& v : vertices) ring.push_back(s * v);
        return CellGeometry(std::move(ring));
    }
};

/// Conforming polygonal decomposition of a simply connected planar domain.
///
/// Cells are counter-clockwise rings of vertex indices. Edges are derived and stored
/// as (lower, higher) vertex pairs; `cell_edges[c][i]` is the global edge between local
/// vertices i and i+1 of cell c.
struct PolygonalMesh {
    std::vector<Point> vertices;
    std::vector<std::vector<int>> cells;
    std::vector<std::array<int, 2>> edges;
    std::vector<std::vector<int>> cell_edges;
    std::vector<std::array<int, 2>> edge_cells; // second entry -1 on the boundary
    std::vector<bool> boundary_vertex_flags;
    std::vector<bool> boundary_edge_flags;
    double h = 0.0;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_edges() const { return edges.size(); }
    std::size_t num_cells() const { return cells.size(); }

    std::vector<Point> cell_ring(std::size_t c) const
    {
        std::vector<Point> ring;
        ring.reserve(cells[c].size());
        for (int v : cells[c]) ring.push_back(vertices[static_cast<std::size_t>(v)]);
        return ring;
    }
    CellGeometry cell_geometry(std::size_t c) const { return CellGeometry(cell_ring(c)); }

    double total_area() const
    {
        double a = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) a += signed_area(cell_ring(c));
        return a;
    }

    /// Area enclosed by the boundary edges, oriented as traversed by their cells.
    double domain_area() const
    {
        double twice = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& ring = cells[c];
            for (std::size_t i = 0; i < ring.size(); ++i) {
                if (!boundary_edge_flags[static_cast<std::size_t>(cell_edges[c][i])]) continue;
                const Point& a = vertices[static_cast<std::size_t>(ring[i])];
                const Point& b = vertices[static_cast<std::size_t>(ring[(i + 1) % ring.size()])];
                twice += cross(a, b);
            }
        }
        return 0.5 * twice;
    }

    /// Builds a mesh from raw data and checks every structural invariant.
    static PolygonalMesh from_cells(std::vector<Point> vertices, std::vector<std::vector<int>> cells)
    {
        PolygonalMesh mesh;
        mesh.vertices = std::move(vertices);
        mesh.cells = std::move(cells);
        mesh.build_topology();
        return mesh;
    }

private:
    void build_topology()
    {
        const auto nv = static_cast<int>(vertices.size());
        if (cells.empty()) throw MeshError("mesh has no cells");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& ring = cells[c];
            if (ring.size() < 3)
                throw MeshError("cell " + std::to_string(c) + " has fewer than 3 vertices");
            for (int v : ring)
                if (v < 0 || v >= nv)
                    throw MeshError("cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                                    " out of range");
            auto sorted = ring;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw MeshError("cell " + std::to_string(c) + " repeats a vertex");
            const auto pts = cell_ring(c);
            const double a = signed_area(pts);
            if (!(a > 0.0))
                throw MeshError("cell " + std::to_string(c) + " is not counter-clockwise (signed area " +
                                std::to_string(a) + ")");
            if (!ring_is_simple(pts)) throw MeshError("cell " + std::to_string(c) + " is self-intersecting");
        }

        // Directed half-edges must appear once; each undirected edge at most twice, opposite ways.
        std::map<std::pair<int, int>, int> directed;
        std::map<std::pair<int, int>, int> edge_index;
        cell_edges.assign(cells.size(), {});
        edges.clear();
        edge_cells.clear();
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& ring = cells[c];
            for (std::size_t i = 0; i < ring.size(); ++i) {
                const int a = ring[i], b = ring[(i + 1) % ring.size()];
                if (!directed.emplace(std::make_pair(a, b), static_cast<int>(c)).second)
                    throw MeshError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") of cell " +
                                    std::to_string(c) + " is traversed in the same direction by cell " +
                                    std::to_string(directed[{a, b}]));
                const auto key = std::make_pair(std::min(a, b), std::max(a, b));
                auto [it, inserted] = edge_index.emplace(key, static_cast<int>(edges.size()));
                if (inserted) {
                    edges.push_back({key.first, key.second});
                    edge_cells.push_back({static_cast<int>(c), -1});
                } else {
                    auto& owners = edge_cells[static_cast<std::size_t>(it->second)];
                    if (owners[1] != -1)
                        throw MeshError("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                                        ") is shared by more than two cells");
                    owners[1] = static_cast<int>(c);
                }
                cell_edges[c].push_back(it->second);
            }
        }

        boundary_edge_flags.assign(edges.size(), false);
        boundary_vertex_flags.assign(vertices.size(), false);
        std::vector<bool> used(vertices.size(), false);
        for (const auto& ring : cells)
            for (int v : ring) used[static_cast<std::size_t>(v)] = true;
        for (std::size_t v = 0; v < vertices.size(); ++v)
            if (!used[v]) throw MeshError("vertex " + std::to_string(v) + " is not used by any cell");
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (edge_cells[e][1] == -1) {
                boundary_edge_flags[e] = true;
                boundary_vertex_flags[static_cast<std::size_t>(edges[e][0])] = true;
                boundary_vertex_flags[static_cast<std::size_t>(edges[e][1])] = true;
            }
        }

        const long euler = static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) +
                           static_cast<long>(cells.size());
        if (euler != 1)
            throw MeshError("Euler characteristic N_V - N_e + N_K = " + std::to_string(euler) +
                            ", expected 1 (domain must be simply connected without hanging nodes)");

        const double cells_area = total_area();
        const double enclosed = domain_area();
        if (std::abs(cells_area - enclosed) > 1e-12 * std::abs(enclosed))
            throw MeshError("cells do not tile the domain: cell area sum " + std::to_string(cells_area) +
                            " vs enclosed area " + std::to_string(enclosed));

        h = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) h = std::max(h, ring_diameter(cell_ring(c)));
    }
};

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        x[lo] = -z;
        x[hi] = z;
        w[lo] = w[hi] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = 0.0;
    return {x, w};
}

/// Interior nodes of the (k+1)-point Gauss-Lobatto rule, mapped to (0, 1), ascending.
/// These are the roots of P'_k; there are k-1 of them.
inline std::vector<double> gauss_lobatto_interior(int k)
{
    std::vector<double> t;
    if (k < 2) return t;
    const int m = k - 1;
    auto legendre = [k](double z) {
        // returns (P_k, P_{k-1})
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < k; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        return std::pair{p0, p1};
    };
    for (int i = 0; i < m; ++i) {
        // Chebyshev-Gauss-Lobatto initial guess
        double z = -std::cos(std::numbers::pi * (i + 1) / k);
        for (int it = 0; it < 100; ++it) {
            const auto [pk, pkm1] = legendre(z);
            const double d1 = k * (pkm1 - z * pk) / (1.0 - z * z);                    // P'_k
            const double d2 = (2.0 * z * d1 - k * (k + 1.0) * pk) / (1.0 - z * z);    // P''_k
            const double dz = d1 / d2;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        t.push_back(0.5 * (z + 1.0));
    }
    std::sort(t.begin(), t.end());
    return t;
}

/// Quadrature over a 2D region. `exactness_degree` is the total polynomial degree integrated exactly.
struct QuadratureRule {
    std::vector<Point> points;
    std::vector<double> weights;
    int exactness_degree = 0;

    std::size_t size() const { return points.size(); }
    double measure() const
    {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
    template <class F>
    double integrate(F&& f) const
    {
        double s = 0.0;
        for (std::size_t q = 0; q < points.size(); ++q) s += weights[q] * f(points[q]);
        return s;
    }
};

/// Gauss-Legendre rule on a segment; `params` are the arc-length fractions in [0, 1].
struct EdgeQuadrature {
    std::vector<Point> points;
    std::vector<double> params;
    std::vector<double> weights;
    int exactness_degree = 0;

    std::size_t size() const { return points.size(); }
    double measure() const
    {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
    template <class F>
    double integrate(F&& f) const
    {
        double s = 0.0;
        for (std::size_t q = 0; q < points.size(); ++q) s += weights[q] * f(points[q]);
        return s;
    }
};

inline EdgeQuadrature edge_quadrature(const Point& a, const Point& b, int exactness_degree)
{
    if (exactness_degree < 0) throw std::invalid_argument("edge_quadrature: negative degree");
    const int n = exactness_degree / 2 + 1;
    const auto [x, w] = gauss_legendre(n);
    const double len = (b - a).norm();
    EdgeQuadrature rule;
    rule.exactness_degree = 2 * n - 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = 0.5 * (x[i] + 1.0);
        rule.params.push_back(t);
        rule.points.push_back(a + t * (b - a));
        rule.weights.push_back(0.5 * w[i] * len);
    }
    return rule;
}

/// Collapsed (Duffy) Gauss rule on a triangle, exact for total degree `degree`.
inline void append_triangle_rule(const Point& a, const Point& b, const Point& c, int degree, QuadratureRule& rule)
{
    const int n = (degree + 2) / 2 + 1;
    const auto [x, w] = gauss_legendre(n);
    const double jac = cross(b - a, c - a); // twice the area
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = 0.5 * (x[i] + 1.0);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = 0.5 * (x[j] + 1.0);
            const double s = u, t = (1.0 - u) * v;
            rule.points.push_back(a + s * (b - a) + t * (c - a));
            rule.weights.push_back(0.25 * w[i] * w[j] * (1.0 - u) * jac);
        }
    }
}

/// Quadrature over a polygon by fanning triangles from the area centroid.
/// Throws when a fan triangle has negative area (cell not star-shaped from its centroid).
inline QuadratureRule polygon_quadrature(const CellGeometry& cell, int exactness_degree)
{
    if (exactness_degree < 0) throw std::invalid_argument("polygon_quadrature: negative degree");
    QuadratureRule rule;
    rule.exactness_degree = exactness_degree;
    const std::size_t n = cell.num_vertices();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = cell.vertex(i);
        const Point& b = cell.vertex(i + 1);
        const double twice = cross(a - cell.centroid, b - cell.centroid);
        if (twice < -1e-14 * cell.area)
            throw NumericalError("polygon_quadrature: fan triangle on edge " + std::to_string(i) +
                                 " has negative area; cell is not star-shaped from its centroid");
        if (twice <= 1e-15 * cell.area) continue;
        append_triangle_rule(cell.centroid, a, b, exactness_degree, rule);
    }
    return rule;
}

// ---------------------------------------------------------------------------
// Shape diagnostics

struct CellShapeReport {
    double rho1 = 0.0; // estimated radius of a ball the cell is star-shaped to, over h_K
    double rho2 = 0.0; // smallest vertex-pair distance over h_K
    double area = 0.0;
    double diameter = 0.0;
    bool violates = false;
};

struct GeometryReport {
    double rho1_threshold = 0.0;
    double rho2_threshold = 0.0;
    std::vector<CellShapeReport> cells;
    std::vector<int> flagged;

    bool ok() const { return flagged.empty(); }
};

/// Largest ball radius (over h_K) w.r.t. which the cell is star-shaped, estimated on a
/// 32x32 grid of candidate centres spanning the bounding box. The cell is star-shaped with
/// respect to a ball iff the ball lies in every inner half-plane of the edges.
inline double star_shaped_ratio(const CellGeometry& cell, int samples = 32)
{
    Point lo = cell.vertices[0], hi = cell.vertices[0];
    for (const auto& v : cell.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    double best = 0.0;
    const std::size_t n = cell.num_vertices();
    for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
            const Point c(lo.x() + (hi.x() - lo.x()) * (i + 0.5) / samples,
                          lo.y() + (hi.y() - lo.y()) * (j + 0.5) / samples);
            double r = std::numeric_limits<double>::infinity();
            for (std::size_t e = 0; e < n; ++e) {
                const double dist = -(c - cell.vertex(e)).dot(cell.edge_normal(e));
                r = std::min(r, dist);
            }
            best = std::max(best, r);
        }
    }
    return std::max(best, 0.0) / cell.diameter;
}

inline double min_vertex_distance_ratio(const CellGeometry& cell)
{
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cell.num_vertices(); ++i)
        for (std::size_t j = i + 1; j < cell.num_vertices(); ++j)
            d = std::min(d, (cell.vertices[i] - cell.vertices[j]).norm());
    return d / cell.diameter;
}

inline CellShapeReport check_cell(const CellGeometry& cell, double rho1, double rho2)
{
    CellShapeReport r;
    r.rho1 = star_shaped_ratio(cell);
    r.rho2 = min_vertex_distance_ratio(cell);
    r.area = cell.area;
    r.diameter = cell.diameter;
    r.violates = r.rho1 < rho1 || r.rho2 < rho2;
    return r;
}

inline GeometryReport validate_geometry(const PolygonalMesh& mesh, double rho1, double rho2)
{
    if (!(rho1 > 0.0 && rho1 < 1.0 && rho2 > 0.0 && rho2 < 1.0))
        throw std::invalid_argument("validate_geometry: thresholds must lie in (0, 1)");
    GeometryReport report;
    report.rho1_threshold = rho1;
    report.rho2_threshold = rho2;
    report.cells.reserve(mesh.num_cells());
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        report.cells.push_back(check_cell(mesh.cell_geometry(c), rho1, rho2));
        if (report.cells.back().violates) report.flagged.push_back(static_cast<int>(c));
    }
    return report;
}

} // namespace minivem
