#pragma once

// Local degrees of freedom and polynomial projectors of the enhanced scalar space,
// and the projections of the virtual bubbles used to enrich the velocity.
//
// Scalar local DOF order: vertex values (one per vertex, CCW), then the k-1 interior
// Gauss-Lobatto values of each local edge (edge i runs from vertex i to vertex i+1),
// then the internal moments (1/|K|) int v mu_b for the members mu_b of P_{k-2}.
// Bubble DOFs are the moments against the members of P_k not in P_{k-2}.

#include "minivem/geometry.hpp"
#include "minivem/polybasis.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace minivem {

enum class DofKind { vertex, edge, moment, bubble };

struct DofDescriptor {
    DofKind kind;
    int entity; // local vertex or edge index; -1 for moments/bubbles
    int index;  // position along the edge, or polynomial member index
    friend bool operator==(const DofDescriptor&, const DofDescriptor&) = default;
};

struct LocalDofLayout {
    int k = 1;
    int n_vertex = 0;
    int n_edge = 0;   // total edge DOFs: (k-1) per edge
    int n_moment = 0; // dim P_{k-2}
    int n_bubble = 0; // per velocity component: 2k+1
    std::vector<DofDescriptor> scalar;
    std::vector<DofDescriptor> bubble;
    std::vector<Point> nodes; // locations of vertex and edge DOFs, in scalar order

    int scalar_count() const { return n_vertex + n_edge + n_moment; }
    int velocity_count() const { return 2 * scalar_count() + 2 * n_bubble; }
    int pressure_count() const { return scalar_count(); }
    int edge_dof(int edge, int m) const { return n_vertex + edge * (k - 1) + m; }
    int moment_dof(int b) const { return n_vertex + n_edge + b; }
};

inline LocalDofLayout build_layout(const CellGeometry& cell, int k)
{
    if (k < 1) throw std::invalid_argument("build_layout: k must be >= 1");
    LocalDofLayout layout;
    layout.k = k;
    const int nv = static_cast<int>(cell.num_vertices());
    layout.n_vertex = nv;
    layout.n_edge = nv * (k - 1);
    layout.n_moment = poly_dim(k - 2);
    layout.n_bubble = poly_dim(k) - poly_dim(k - 2);
    const auto interior = gauss_lobatto_interior(k);
    for (int v = 0; v < nv; ++v) {
        layout.scalar.push_back({DofKind::vertex, v, 0});
        layout.nodes.push_back(cell.vertex(static_cast<std::size_t>(v)));
    }
    for (int e = 0; e < nv; ++e) {
        const Point& a = cell.vertex(static_cast<std::size_t>(e));
        const Point& b = cell.vertex(static_cast<std::size_t>(e + 1));
        for (int m = 0; m < k - 1; ++m) {
            layout.scalar.push_back({DofKind::edge, e, m});
            layout.nodes.push_back(a + interior[static_cast<std::size_t>(m)] * (b - a));
        }
    }
    for (int b = 0; b < layout.n_moment; ++b) layout.scalar.push_back({DofKind::moment, -1, b});
    for (int j = 0; j < layout.n_bubble; ++j) layout.bubble.push_back({DofKind::bubble, -1, poly_dim(k - 2) + j});
    return layout;
}

/// Trace data of one local edge: Gauss rule, outward normal and the values of the k+1
/// nodal Lagrange functions (vertex, interior Gauss-Lobatto points, vertex) at the Gauss points.
struct EdgeTrace {
    EdgeQuadrature rule;
    Point normal;
    Eigen::MatrixXd lagrange; // gauss points x (k+1)
    std::vector<int> node_dofs; // local scalar DOF of each Lagrange node
};

struct LocalOperators {
    Eigen::MatrixXd pinabla_k;       // dim P_k x n_scalar
    Eigen::MatrixXd pizero_k;        // dim P_k x n_scalar
    Eigen::MatrixXd bubble_pinabla;  // dim P_{k+2} x n_bubble
    Eigen::MatrixXd bubble_pizero_k; // dim P_k x n_bubble
    Eigen::MatrixXd dof_matrix;      // n_scalar x dim P_k: DOFs of each basis member
};

/// Everything local to one cell: geometry, basis (degree k+2), quadrature, DOFs, projectors.
struct LocalElement {
    int k = 1;
    CellGeometry cell;
    PolyBasis basis; // degree k+2; its first dim P_j members span P_j
    QuadratureRule rule;
    PolyGramData gram;
    LocalDofLayout layout;
    std::vector<EdgeTrace> edges;
    LocalOperators ops;

    int dim_k() const { return poly_dim(k); }
    int dim_km2() const { return poly_dim(k - 2); }
    double moment_weight() const { return cell.area / basis.moment_scale(); } // int phi q_b for a unit moment
};

inline std::vector<EdgeTrace> build_edge_traces(const CellGeometry& cell, const LocalDofLayout& layout, int degree)
{
    const int k = layout.k;
    std::vector<double> nodes{0.0};
    for (double t : gauss_lobatto_interior(k)) nodes.push_back(t);
    nodes.push_back(1.0);
    const int nv = static_cast<int>(cell.num_vertices());
    std::vector<EdgeTrace> traces;
    for (int e = 0; e < nv; ++e) {
        EdgeTrace tr;
        tr.rule = edge_quadrature(cell.vertex(static_cast<std::size_t>(e)), cell.vertex(static_cast<std::size_t>(e + 1)), degree);
        tr.normal = cell.edge_normal(static_cast<std::size_t>(e));
        tr.lagrange.resize(static_cast<Eigen::Index>(tr.rule.size()), k + 1);
        for (std::size_t g = 0; g < tr.rule.size(); ++g) {
            const double t = tr.rule.params[g];
            for (int j = 0; j <= k; ++j) {
                double l = 1.0;
                for (int m = 0; m <= k; ++m)
                    if (m != j) l *= (t - nodes[static_cast<std::size_t>(m)]) / (nodes[static_cast<std::size_t>(j)] - nodes[static_cast<std::size_t>(m)]);
                tr.lagrange(static_cast<Eigen::Index>(g), j) = l;
            }
        }
        tr.node_dofs.push_back(e);
        for (int m = 0; m < k - 1; ++m) tr.node_dofs.push_back(layout.edge_dof(e, m));
        tr.node_dofs.push_back((e + 1) % nv);
        traces.push_back(std::move(tr));
    }
    return traces;
}

/// DOF values of the first dim P_k basis members (n_scalar x dim P_k).
inline Eigen::MatrixXd compute_dof_matrix(const LocalElement& el)
{
    const int nk = el.dim_k();
    const int n = el.layout.scalar_count();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, nk);
    const int nodal = el.layout.n_vertex + el.layout.n_edge;
    for (int i = 0; i < nodal; ++i)
        d.row(i) = el.basis.evaluate_at(el.layout.nodes[static_cast<std::size_t>(i)]).head(nk).transpose();
    const double s = el.basis.moment_scale() / el.cell.area;
    for (int b = 0; b < el.layout.n_moment; ++b)
        d.row(el.layout.moment_dof(b)) = s * el.gram.mass.block(b, 0, 1, nk);
    return d;
}

/// Elliptic projection onto P_k of every scalar DOF basis function, in the element basis.
/// Uses int grad(Pi v).grad q = -int v lap q + int_dK v dq/dn and int_dK Pi v = int_dK v.
inline Eigen::MatrixXd compute_pinabla(const LocalElement& el)
{
    const int nk = el.dim_k();
    const int n = el.layout.scalar_count();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nk, n);

    const Eigen::MatrixXd lap = el.basis.laplacian_matrix(); // active -> active coefficients
    const double w = el.moment_weight();
    for (int a = 0; a < nk; ++a)
        for (int b = 0; b < el.dim_km2(); ++b) rhs(a, el.layout.moment_dof(b)) -= lap(b, a) * w;

    Eigen::RowVectorXd constraint = Eigen::RowVectorXd::Zero(nk);
    for (const auto& tr : el.edges) {
        const auto [gx, gy] = el.basis.gradient(tr.rule.points);
        const Eigen::MatrixXd vals = el.basis.evaluate(tr.rule.points);
        for (std::size_t g = 0; g < tr.rule.size(); ++g) {
            const auto gi = static_cast<Eigen::Index>(g);
            const double wg = tr.rule.weights[g];
            for (int j = 0; j < tr.lagrange.cols(); ++j) {
                const int dof = tr.node_dofs[static_cast<std::size_t>(j)];
                const double l = tr.lagrange(gi, j);
                for (int a = 1; a < nk; ++a)
                    rhs(a, dof) += wg * l * (gx(gi, a) * tr.normal.x() + gy(gi, a) * tr.normal.y());
                rhs(0, dof) += wg * l;
            }
            constraint += wg * vals.row(gi).head(nk);
        }
    }
    Eigen::MatrixXd g = el.gram.stiffness.topLeftCorner(nk, nk);
    g.row(0) = constraint;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
    if (!lu.isInvertible()) throw NumericalError("compute_pinabla: singular projector system (degenerate cell)");
    return lu.solve(rhs);
}

/// L2 projection onto P_k of every scalar DOF basis function. Moments against P_{k-2} come
/// from the DOFs; moments against the remaining members equal those of the elliptic projection.
inline Eigen::MatrixXd compute_pizero(const LocalElement& el, const Eigen::MatrixXd& pinabla)
{
    const int nk = el.dim_k();
    const Eigen::MatrixXd mass = el.gram.mass.topLeftCorner(nk, nk);
    Eigen::MatrixXd moments = mass * pinabla;
    moments.topRows(el.dim_km2()).setZero();
    for (int b = 0; b < el.dim_km2(); ++b) moments(b, el.layout.moment_dof(b)) = el.moment_weight();
    return mass.ldlt().solve(moments);
}

/// Projections of the bubble DOF basis functions (unit moment against one member of
/// P_k \ P_{k-2}, zero against every other member of P_k):
/// elliptic projection onto P_{k+2} (boundary terms vanish, int_dK Pi b = 0) and L2 onto P_k.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> compute_bubble_operators(const LocalElement& el)
{
    const int nk = el.dim_k();
    const int nk2 = el.basis.dimension();
    const int nb = el.layout.n_bubble;
    const double w = el.moment_weight();
    const Eigen::MatrixXd lap = el.basis.laplacian_matrix();

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nk2, nb);
    for (int a = 1; a < nk2; ++a)
        for (int j = 0; j < nb; ++j) rhs(a, j) = -lap(el.dim_km2() + j, a) * w;

    Eigen::MatrixXd g = el.gram.stiffness;
    for (int a = 0; a < nk2; ++a) {
        double s = 0.0;
        for (const auto& tr : el.edges) {
            const Eigen::MatrixXd vals = el.basis.evaluate(tr.rule.points);
            for (std::size_t q = 0; q < tr.rule.size(); ++q) s += tr.rule.weights[q] * vals(static_cast<Eigen::Index>(q), a);
        }
        g(0, a) = s;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
    if (!lu.isInvertible()) throw NumericalError("compute_bubble_operators: singular projector system");
    Eigen::MatrixXd pin = lu.solve(rhs);

    Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(nk, nb);
    for (int j = 0; j < nb; ++j) moments(el.dim_km2() + j, j) = w;
    Eigen::MatrixXd piz = el.gram.mass.topLeftCorner(nk, nk).ldlt().solve(moments);
    return {pin, piz};
}

/// Assembles the full local element. `quad_degree` defaults to 2k+6.
inline LocalElement build_local_element(const CellGeometry& cell, int k, BasisKind kind, int quad_degree = -1)
{
    if (k < 1) throw std::invalid_argument("build_local_element: k must be >= 1");
    LocalElement el;
    el.k = k;
    el.cell = cell;
    el.rule = polygon_quadrature(cell, quad_degree < 0 ? 2 * k + 6 : quad_degree);
    el.basis = build_basis(cell, k + 2, kind, el.rule);
    el.gram = compute_gram(el.basis, el.rule);
    el.layout = build_layout(cell, k);
    el.edges = build_edge_traces(cell, el.layout, 2 * k + 4);
    el.ops.dof_matrix = compute_dof_matrix(el);
    el.ops.pinabla_k = compute_pinabla(el);
    el.ops.pizero_k = compute_pizero(el, el.ops.pinabla_k);
    auto [bp, bz] = compute_bubble_operators(el);
    el.ops.bubble_pinabla = std::move(bp);
    el.ops.bubble_pizero_k = std::move(bz);
    return el;
}

using ScalarFunction = std::function<double(const Point&)>;

/// Scalar DOFs of a smooth function: nodal values and quadrature moments.
inline Eigen::VectorXd interpolate_scalar(const LocalElement& el, const ScalarFunction& f)
{
    Eigen::VectorXd dofs(el.layout.scalar_count());
    const int nodal = el.layout.n_vertex + el.layout.n_edge;
    for (int i = 0; i < nodal; ++i) dofs(i) = f(el.layout.nodes[static_cast<std::size_t>(i)]);
    if (el.layout.n_moment > 0) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(el.layout.n_moment);
        for (std::size_t q = 0; q < el.rule.size(); ++q) {
            const Eigen::VectorXd v = el.basis.evaluate_at(el.rule.points[q]).head(el.layout.n_moment);
            m += el.rule.weights[q] * f(el.rule.points[q]) * v;
        }
        dofs.tail(el.layout.n_moment) = m * (el.basis.moment_scale() / el.cell.area);
    }
    return dofs;
}

/// Local velocity DOFs (component x scalar DOFs, then component y, then zero bubbles).
inline Eigen::VectorXd interpolate_velocity(const LocalElement& el, const std::function<Eigen::Vector2d(const Point&)>& u)
{
    const int n = el.layout.scalar_count();
    Eigen::VectorXd dofs = Eigen::VectorXd::Zero(el.layout.velocity_count());
    dofs.segment(0, n) = interpolate_scalar(el, [&](const Point& x) { return u(x).x(); });
    dofs.segment(n, n) = interpolate_scalar(el, [&](const Point& x) { return u(x).y(); });
    return dofs;
}

/// Coefficients in the element basis of the polynomial with monomial coefficients c
/// (useful for feeding a known polynomial through D).
inline Eigen::VectorXd polynomial_in_basis(const LocalElement& el, const Eigen::VectorXd& monomial_coeffs)
{
    Eigen::VectorXd c = Eigen::VectorXd::Zero(el.basis.dimension());
    c.head(monomial_coeffs.size()) = monomial_coeffs;
    return el.basis.from_monomial(c);
}

} // namespace minivem
