#pragma once

// Built-in mesh families on the unit square: hexagonal, Voronoi (Lloyd-smoothed),
// random nonconvex polygons and diamonds.

#include "minivem/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace minivem {

enum class MeshFamily { hexagonal, voronoi, random_polygons, diamond };

inline MeshFamily parse_family(std::string_view name)
{
    if (name == "hexagonal" || name == "hexagons") return MeshFamily::hexagonal;
    if (name == "voronoi") return MeshFamily::voronoi;
    if (name == "random_polygons" || name == "random") return MeshFamily::random_polygons;
    if (name == "diamond") return MeshFamily::diamond;
    throw std::invalid_argument("unknown mesh family '" + std::string(name) + "'");
}

inline std::string to_string(MeshFamily f)
{
    switch (f) {
    case MeshFamily::hexagonal: return "hexagonal";
    case MeshFamily::voronoi: return "voronoi";
    case MeshFamily::random_polygons: return "random_polygons";
    case MeshFamily::diamond: return "diamond";
    }
    return "unknown";
}

inline int max_level(MeshFamily f)
{
    switch (f) {
    case MeshFamily::hexagonal: return 6;
    case MeshFamily::voronoi: return 4;
    case MeshFamily::random_polygons: return 6;
    case MeshFamily::diamond: return 7;
    }
    return 0;
}

struct VoronoiOptions {
    int lloyd_iterations = 1000;
};

namespace detail {

/// Uniform doubles in [0, 1) from a 64-bit Mersenne twister, independent of the
/// standard library's distribution implementation.
class UnitRng {
public:
    explicit UnitRng(std::uint64_t seed) : engine_(seed) {}
    double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

using Polygon = std::vector<Point>;

inline Polygon unit_square() { return {Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)}; }

/// Clips a convex polygon to the half-plane {x : (x - p) . n <= 0}.
inline Polygon clip_half_plane(const Polygon& poly, const Point& p, const Point& n)
{
    Polygon out;
    out.reserve(poly.size() + 1);
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % m];
        const double da = (a - p).dot(n);
        const double db = (b - p).dot(n);
        if (da <= 0.0) out.push_back(a);
        if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
            const double t = da / (da - db);
            out.push_back(a + t * (b - a));
        }
    }
    return out;
}

/// Clips a convex polygon to the unit square.
inline Polygon clip_unit_square(const Polygon& poly)
{
    Polygon out = clip_half_plane(poly, Point(0, 0), Point(-1, 0));
    out = clip_half_plane(out, Point(0, 0), Point(0, -1));
    out = clip_half_plane(out, Point(1, 1), Point(1, 0));
    out = clip_half_plane(out, Point(1, 1), Point(0, 1));
    return out;
}

/// Glues independently computed cell polygons into a conforming mesh by merging
/// vertices closer than `tol`. Consecutive duplicates created by merging are dropped.
inline PolygonalMesh weld_polygons(const std::vector<Polygon>& polys, double tol)
{
    std::vector<Point> vertices;
    std::unordered_map<std::int64_t, std::vector<int>> buckets;
    const double cell = 4.0 * tol;
    auto key = [cell](long ix, long iy) { return (static_cast<std::int64_t>(ix) << 32) ^ (iy & 0xffffffff); };
    auto find_or_insert = [&](const Point& p) {
        const long ix = static_cast<long>(std::floor(p.x() / cell));
        const long iy = static_cast<long>(std::floor(p.y() / cell));
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy) {
                auto it = buckets.find(key(ix + dx, iy + dy));
                if (it == buckets.end()) continue;
                for (int v : it->second)
                    if ((vertices[static_cast<std::size_t>(v)] - p).norm() <= tol) return v;
            }
        const int id = static_cast<int>(vertices.size());
        vertices.push_back(p);
        buckets[key(ix, iy)].push_back(id);
        return id;
    };

    std::vector<std::vector<int>> cells;
    cells.reserve(polys.size());
    for (const auto& poly : polys) {
        std::vector<int> ring;
        for (const auto& p : poly) {
            const int v = find_or_insert(p);
            if (ring.empty() || ring.back() != v) ring.push_back(v);
        }
        while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
        if (ring.size() < 3) continue; // collapsed sliver
        cells.push_back(std::move(ring));
    }

    // Vertices lying in the interior of another cell's edge (possible after snapping)
    // are inserted into that edge so the mesh stays conforming.
    std::unordered_map<std::int64_t, int> edge_count;
    auto ekey = [](int a, int b) {
        return (static_cast<std::int64_t>(std::min(a, b)) << 32) | static_cast<std::int64_t>(std::max(a, b));
    };
    for (const auto& ring : cells)
        for (std::size_t i = 0; i < ring.size(); ++i) ++edge_count[ekey(ring[i], ring[(i + 1) % ring.size()])];
    for (auto& ring : cells) {
        std::vector<int> fixed;
        for (std::size_t i = 0; i < ring.size(); ++i) {
            const int a = ring[i], b = ring[(i + 1) % ring.size()];
            fixed.push_back(a);
            if (edge_count[ekey(a, b)] != 1) continue;
            const Point& pa = vertices[static_cast<std::size_t>(a)];
            const Point& pb = vertices[static_cast<std::size_t>(b)];
            if (std::abs(pa.x() - pb.x()) < tol && (pa.x() < tol || pa.x() > 1 - tol)) continue;
            if (std::abs(pa.y() - pb.y()) < tol && (pa.y() < tol || pa.y() > 1 - tol)) continue;
            // interior edge seen once: look for vertices on it
            std::vector<std::pair<double, int>> on;
            const Point d = pb - pa;
            const double len2 = d.squaredNorm();
            for (std::size_t v = 0; v < vertices.size(); ++v) {
                const int vi = static_cast<int>(v);
                if (vi == a || vi == b) continue;
                const Point w = vertices[v] - pa;
                const double t = w.dot(d) / len2;
                if (t <= 0.0 || t >= 1.0) continue;
                if (std::abs(cross(d, w)) / std::sqrt(len2) < tol) on.emplace_back(t, vi);
            }
            std::sort(on.begin(), on.end());
            for (const auto& [t, v] : on) fixed.push_back(v);
        }
        ring = std::move(fixed);
    }
    return PolygonalMesh::from_cells(std::move(vertices), std::move(cells));
}

/// Uniform bucket grid over the unit square for nearest-seed queries.
class SeedGrid {
public:
    explicit SeedGrid(const std::vector<Point>& seeds) : seeds_(seeds)
    {
        n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(seeds.size()) / 2.0)));
        buckets_.assign(static_cast<std::size_t>(n_ * n_), {});
        for (std::size_t i = 0; i < seeds.size(); ++i) buckets_[index(seeds[i])].push_back(static_cast<int>(i));
    }

    /// Voronoi cell of seed i, clipped to the unit square.
    Polygon cell(int i) const
    {
        const Point& s = seeds_[static_cast<std::size_t>(i)];
        Polygon poly = unit_square();
        const int bx = coord(s.x()), by = coord(s.y());
        const double width = 1.0 / n_;
        for (int ring = 0; ring <= n_; ++ring) {
            // every seed outside this ring is at least (ring) * width away
            double radius = 0.0;
            for (const auto& v : poly) radius = std::max(radius, (v - s).norm());
            if (ring > 0 && (ring - 1) * width > 2.0 * radius) break;
            for (int x = bx - ring; x <= bx + ring; ++x) {
                for (int y = by - ring; y <= by + ring; ++y) {
                    if (std::max(std::abs(x - bx), std::abs(y - by)) != ring) continue;
                    if (x < 0 || y < 0 || x >= n_ || y >= n_) continue;
                    for (int j : buckets_[static_cast<std::size_t>(y * n_ + x)]) {
                        if (j == i) continue;
                        const Point& t = seeds_[static_cast<std::size_t>(j)];
                        poly = clip_half_plane(poly, 0.5 * (s + t), t - s);
                    }
                }
            }
        }
        return poly;
    }

private:
    int coord(double x) const { return std::clamp(static_cast<int>(x * n_), 0, n_ - 1); }
    std::size_t index(const Point& p) const { return static_cast<std::size_t>(coord(p.y()) * n_ + coord(p.x())); }

    const std::vector<Point>& seeds_;
    int n_ = 1;
    std::vector<std::vector<int>> buckets_;
};

inline std::vector<Polygon> voronoi_cells(const std::vector<Point>& seeds)
{
    SeedGrid grid(seeds);
    std::vector<Polygon> cells;
    cells.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) cells.push_back(grid.cell(static_cast<int>(i)));
    return cells;
}

inline std::vector<Point> random_seeds(std::size_t n, std::uint64_t seed)
{
    UnitRng rng(seed);
    std::vector<Point> seeds;
    seeds.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng();
        const double y = rng();
        seeds.emplace_back(x, y);
    }
    return seeds;
}

inline std::vector<Point> lloyd(std::vector<Point> seeds, int iterations)
{
    for (int it = 0; it < iterations; ++it) {
        const auto cells = voronoi_cells(seeds);
        for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = area_centroid(cells[i]);
    }
    return seeds;
}

inline bool fan_is_positive(const std::vector<Point>& ring)
{
    const Point c = area_centroid(ring);
    const double a = signed_area(ring);
    for (std::size_t i = 0; i < ring.size(); ++i)
        if (cross(ring[i] - c, ring[(i + 1) % ring.size()] - c) <= 1e-3 * a / static_cast<double>(ring.size()))
            return false;
    return ring_is_simple(ring);
}

} // namespace detail

inline PolygonalMesh hexagonal_mesh(int level)
{
    // columns x rows of (stretched) pointy-top hexagons, staggered by half a cell,
    // with the domain boundary through the centres of the first and last rows.
    static constexpr std::array<std::array<int, 2>, 6> layout{{{5, 6}, {10, 12}, {15, 18}, {20, 23}, {40, 46}, {80, 93}}};
    const auto [ncols, nrows] = layout[static_cast<std::size_t>(level - 1)];
    const double dx = 1.0 / (ncols - 1);
    const double dy = 1.0 / (nrows - 1);
    std::vector<detail::Polygon> polys;
    for (int j = 0; j < nrows; ++j) {
        for (int i = -1; i <= ncols; ++i) {
            const double cx = (i + (j % 2 ? 0.75 : 0.25)) * dx;
            const double cy = j * dy;
            detail::Polygon hex{Point(cx, cy - 2 * dy / 3), Point(cx + dx / 2, cy - dy / 3), Point(cx + dx / 2, cy + dy / 3),
                                Point(cx, cy + 2 * dy / 3), Point(cx - dx / 2, cy + dy / 3), Point(cx - dx / 2, cy - dy / 3)};
            auto clipped = detail::clip_unit_square(hex);
            if (clipped.size() >= 3 && signed_area(clipped) > 1e-12) polys.push_back(std::move(clipped));
        }
    }
    return detail::weld_polygons(polys, 1e-10);
}

inline PolygonalMesh voronoi_mesh(int level, std::uint64_t seed, VoronoiOptions options = {})
{
    const std::size_t n = 64u << (2 * (level - 1));
    auto seeds = detail::lloyd(detail::random_seeds(n, seed), options.lloyd_iterations);
    return detail::weld_polygons(detail::voronoi_cells(seeds), 1e-10);
}

inline PolygonalMesh random_polygons_mesh(int level, std::uint64_t seed)
{
    const std::size_t n = 64u << (level - 1);
    const auto seeds = detail::random_seeds(n, seed);
    PolygonalMesh base = detail::weld_polygons(detail::voronoi_cells(seeds), 1e-10);

    // Insert a randomly displaced midpoint on every interior edge.
    detail::UnitRng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Point> vertices = base.vertices;
    std::vector<int> midpoint(base.num_edges(), -1);
    std::vector<std::vector<int>> cells = base.cells;
    auto rebuild = [&](std::size_t c) {
        std::vector<Point> ring;
        const auto& src = base.cells[c];
        for (std::size_t i = 0; i < src.size(); ++i) {
            ring.push_back(vertices[static_cast<std::size_t>(src[i])]);
            const int m = midpoint[static_cast<std::size_t>(base.cell_edges[c][i])];
            if (m >= 0) ring.push_back(vertices[static_cast<std::size_t>(m)]);
        }
        return ring;
    };
    for (std::size_t e = 0; e < base.num_edges(); ++e) {
        if (base.boundary_edge_flags[e]) {
            rng();
            continue;
        }
        const Point a = base.vertices[static_cast<std::size_t>(base.edges[e][0])];
        const Point b = base.vertices[static_cast<std::size_t>(base.edges[e][1])];
        const Point t = b - a;
        const Point nrm(-t.y(), t.x());
        double amp = 0.2 * (2.0 * rng() - 1.0);
        midpoint[e] = static_cast<int>(vertices.size());
        vertices.push_back(0.5 * (a + b));
        for (int attempt = 0; attempt < 6; ++attempt, amp *= 0.5) {
            vertices.back() = 0.5 * (a + b) + amp * nrm;
            const auto& owners = base.edge_cells[e];
            if (detail::fan_is_positive(rebuild(static_cast<std::size_t>(owners[0]))) &&
                detail::fan_is_positive(rebuild(static_cast<std::size_t>(owners[1]))))
                break;
            if (attempt == 5) vertices.back() = 0.5 * (a + b);
        }
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<int> ring;
        for (std::size_t i = 0; i < base.cells[c].size(); ++i) {
            ring.push_back(base.cells[c][i]);
            const int m = midpoint[static_cast<std::size_t>(base.cell_edges[c][i])];
            if (m >= 0) ring.push_back(m);
        }
        cells[c] = std::move(ring);
    }
    return PolygonalMesh::from_cells(std::move(vertices), std::move(cells));
}

/// Each square of an n x n grid is split along a diagonal into two outer quadrilaterals
/// and a thin rhombus with diagonals in ratio `aspect`:1. Diagonal direction alternates
/// in a checkerboard pattern.
inline PolygonalMesh diamond_mesh(int level, double aspect = 4.0)
{
    static constexpr std::array<int, 7> sizes{4, 5, 8, 10, 16, 20, 32};
    const int n = sizes[static_cast<std::size_t>(level - 1)];
    const double s = 1.0 / n;
    std::vector<Point> vertices;
    auto grid = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) vertices.emplace_back(i * s, j * s);
    std::vector<std::vector<int>> cells;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = grid(i, j), b = grid(i + 1, j), c = grid(i + 1, j + 1), d = grid(i, j + 1);
            const Point centre((i + 0.5) * s, (j + 0.5) * s);
            const double half_short = std::sqrt(2.0) * s / (2.0 * aspect);
            const int p = static_cast<int>(vertices.size());
            const int q = p + 1;
            if ((i + j) % 2 == 0) {
                // diagonal a-c; p toward b, q toward d
                const Point nb = Point(1, -1).normalized();
                vertices.push_back(centre + half_short * nb);
                vertices.push_back(centre - half_short * nb);
                cells.push_back({a, b, c, p});
                cells.push_back({a, p, c, q});
                cells.push_back({a, q, c, d});
            } else {
                // diagonal b-d; p toward c, q toward a
                const Point nc = Point(1, 1).normalized();
                vertices.push_back(centre + half_short * nc);
                vertices.push_back(centre - half_short * nc);
                cells.push_back({b, c, d, p});
                cells.push_back({b, p, d, q});
                cells.push_back({b, q, d, a});
            }
        }
    }
    return PolygonalMesh::from_cells(std::move(vertices), std::move(cells));
}

/// Generates a member of one of the built-in families on (0,1)^2.
/// Throws std::out_of_range for unsupported levels.
inline PolygonalMesh generate_mesh(MeshFamily family, int level, std::uint64_t rng_seed = 42)
{
    if (level < 1 || level > max_level(family))
        throw std::out_of_range("level " + std::to_string(level) + " unsupported for family " + to_string(family) +
                                " (1.." + std::to_string(max_level(family)) + ")");
    switch (family) {
    case MeshFamily::hexagonal: return hexagonal_mesh(level);
    case MeshFamily::voronoi: return voronoi_mesh(level, rng_seed);
    case MeshFamily::random_polygons: return random_polygons_mesh(level, rng_seed);
    case MeshFamily::diamond: return diamond_mesh(level);
    }
    throw std::out_of_range("unknown family");
}

} // namespace minivem
