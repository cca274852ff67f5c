#pragma once

// Per-element polynomial bases: scaled monomials and their L2-orthonormalization.
//
// Scaled monomials m_(a,b) = ((x - x_K)/h_K)^a ((y - y_K)/h_K)^b are ordered graded
// lexicographically: by total degree, then by decreasing x-power, so that the first
// dim P_j members span P_j for every j <= degree.

#include "minivem/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace minivem {

enum class BasisKind { scaled_monomial, l2_orthonormal };

inline BasisKind parse_basis_kind(std::string_view s)
{
    if (s == "monomial" || s == "scaled_monomial") return BasisKind::scaled_monomial;
    if (s == "ortho" || s == "l2_orthonormal") return BasisKind::l2_orthonormal;
    throw std::invalid_argument("unknown basis kind '" + std::string(s) + "'");
}

inline std::string to_string(BasisKind k) { return k == BasisKind::scaled_monomial ? "monomial" : "ortho"; }

/// dim P_k in two variables; zero for negative k.
constexpr int poly_dim(int k) { return k < 0 ? 0 : (k + 1) * (k + 2) / 2; }

constexpr int monomial_index(int a, int b)
{
    const int d = a + b;
    return poly_dim(d - 1) + b;
}

/// Exponents (a, b) of the i-th scaled monomial.
constexpr std::pair<int, int> monomial_exponents(int i)
{
    int d = 0;
    while (poly_dim(d) <= i) ++d;
    const int b = i - poly_dim(d - 1);
    return {d - b, b};
}

/// Matrix (dim x dim) mapping scaled-monomial coefficients of p to those of dp/dx (dir 0)
/// or dp/dy (dir 1), in the same monomial ordering.
inline Eigen::MatrixXd monomial_derivative(int degree, int dir, double h)
{
    const int n = poly_dim(degree);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = monomial_exponents(i);
        if (dir == 0 && a > 0) d(monomial_index(a - 1, b), i) = a / h;
        if (dir == 1 && b > 0) d(monomial_index(a, b - 1), i) = b / h;
    }
    return d;
}

inline Eigen::MatrixXd monomial_laplacian(int degree, double h)
{
    const Eigen::MatrixXd dx = monomial_derivative(degree, 0, h);
    const Eigen::MatrixXd dy = monomial_derivative(degree, 1, h);
    return dx * dx + dy * dy;
}

/// Polynomial basis of degree `degree` attached to one cell.
///
/// `members` holds the basis members as rows of scaled-monomial coefficients,
/// q_i = sum_j members(i, j) m_j (lower triangular). A polynomial with coefficients d in
/// this basis has monomial coefficients members^T d; `change_of_basis` is the inverse map.
struct PolyBasis {
    BasisKind kind = BasisKind::scaled_monomial;
    int degree = 0;
    Point centroid = Point::Zero();
    double diameter = 1.0;
    double area = 1.0;
    Eigen::MatrixXd members;
    Eigen::MatrixXd change_of_basis;

    int dimension() const { return poly_dim(degree); }

    /// Internal moments use test functions scaled to unit mean square, so moment DOFs are
    /// dimensionless for both kinds: the scaled monomials themselves, or sqrt(|K|) q_i.
    double moment_scale() const { return kind == BasisKind::scaled_monomial ? 1.0 : std::sqrt(area); }

    Eigen::VectorXd monomials_at(const Point& x) const
    {
        const int n = dimension();
        Eigen::VectorXd m(n);
        const double xs = (x.x() - centroid.x()) / diameter;
        const double ys = (x.y() - centroid.y()) / diameter;
        for (int i = 0; i < n; ++i) {
            const auto [a, b] = monomial_exponents(i);
            m(i) = std::pow(xs, a) * std::pow(ys, b);
        }
        return m;
    }

    /// Values of all members at each point: rows = points, cols = members.
    Eigen::MatrixXd evaluate(std::span<const Point> points) const
    {
        Eigen::MatrixXd v(static_cast<Eigen::Index>(points.size()), dimension());
        for (std::size_t p = 0; p < points.size(); ++p)
            v.row(static_cast<Eigen::Index>(p)) = (members * monomials_at(points[p])).transpose();
        return v;
    }
    Eigen::VectorXd evaluate_at(const Point& x) const { return members * monomials_at(x); }

    /// Gradients of all members at each point: {d/dx values, d/dy values}, each points x members.
    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gradient(std::span<const Point> points) const
    {
        const Eigen::MatrixXd dx = members * monomial_derivative(degree, 0, diameter).transpose();
        const Eigen::MatrixXd dy = members * monomial_derivative(degree, 1, diameter).transpose();
        Eigen::MatrixXd gx(static_cast<Eigen::Index>(points.size()), dimension());
        Eigen::MatrixXd gy(static_cast<Eigen::Index>(points.size()), dimension());
        for (std::size_t p = 0; p < points.size(); ++p) {
            const Eigen::VectorXd m = monomials_at(points[p]);
            gx.row(static_cast<Eigen::Index>(p)) = (dx * m).transpose();
            gy.row(static_cast<Eigen::Index>(p)) = (dy * m).transpose();
        }
        return {gx, gy};
    }

    /// Coefficients (in this basis) of d/dx or d/dy applied to coefficients in this basis.
    Eigen::MatrixXd derivative_matrix(int dir) const
    {
        return change_of_basis * monomial_derivative(degree, dir, diameter) * members.transpose();
    }
    Eigen::MatrixXd laplacian_matrix() const
    {
        return change_of_basis * monomial_laplacian(degree, diameter) * members.transpose();
    }

    /// Laplacian of each member in the degree-(k-2) scaled-monomial basis:
    /// column i holds the monomial coefficients of Delta q_i.
    Eigen::MatrixXd laplacian_in_lower_basis() const
    {
        const Eigen::MatrixXd full = monomial_laplacian(degree, diameter) * members.transpose();
        return full.topRows(poly_dim(degree - 2));
    }

    /// Monomial coefficients of a polynomial given in this basis, and back.
    Eigen::VectorXd to_monomial(const Eigen::VectorXd& coeffs) const { return members.transpose() * coeffs; }
    Eigen::VectorXd from_monomial(const Eigen::VectorXd& coeffs) const { return change_of_basis * coeffs; }
};

/// Gram matrices of a basis over a cell.
struct PolyGramData {
    Eigen::MatrixXd mass;      // int q_i q_j
    Eigen::MatrixXd stiffness; // int grad q_i . grad q_j
    Eigen::VectorXd integrals; // int q_i
};

inline PolyGramData compute_gram(const PolyBasis& basis, const QuadratureRule& rule)
{
    const Eigen::MatrixXd v = basis.evaluate(rule.points);
    const auto [gx, gy] = basis.gradient(rule.points);
    const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), static_cast<Eigen::Index>(rule.weights.size()));
    PolyGramData g;
    g.mass = v.transpose() * w.asDiagonal() * v;
    g.stiffness = gx.transpose() * w.asDiagonal() * gx + gy.transpose() * w.asDiagonal() * gy;
    g.integrals = v.transpose() * w;
    return g;
}

/// Scaled monomial mass matrix on a cell, by quadrature.
inline Eigen::MatrixXd monomial_mass(const CellGeometry& cell, int degree, const QuadratureRule& rule)
{
    PolyBasis mono;
    mono.degree = degree;
    mono.centroid = cell.centroid;
    mono.diameter = cell.diameter;
    mono.area = cell.area;
    mono.members = Eigen::MatrixXd::Identity(poly_dim(degree), poly_dim(degree));
    mono.change_of_basis = mono.members;
    return compute_gram(mono, rule).mass;
}

inline double symmetric_condition(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev(0) <= 0.0) return std::numeric_limits<double>::infinity();
    return ev(ev.size() - 1) / ev(0);
}

/// Builds a degree-k basis on a cell. The orthonormal kind is obtained by modified
/// Gram-Schmidt (with one reorthogonalization pass) of the scaled monomials in graded
/// order against the exact mass matrix, so each prefix still spans P_j.
inline PolyBasis build_basis(const CellGeometry& cell, int k, BasisKind kind, const QuadratureRule& rule)
{
    if (k < 0) throw std::invalid_argument("build_basis: negative degree");
    PolyBasis basis;
    basis.kind = kind;
    basis.degree = k;
    basis.centroid = cell.centroid;
    basis.diameter = cell.diameter;
    basis.area = cell.area;
    const int n = poly_dim(k);
    if (kind == BasisKind::scaled_monomial) {
        basis.members = Eigen::MatrixXd::Identity(n, n);
        basis.change_of_basis = basis.members;
        return basis;
    }

    const Eigen::MatrixXd mass = monomial_mass(cell, k, rule);
    // Conditioning check on the diagonally equilibrated Gram matrix.
    const Eigen::VectorXd d = mass.diagonal().cwiseSqrt().cwiseInverse();
    const double cond = symmetric_condition(d.asDiagonal() * mass * d.asDiagonal());
    if (!(cond < 1e15))
        throw NumericalError("build_basis: monomial Gram matrix is numerically singular (condition " +
                             std::to_string(cond) + "); use a smaller degree or a better-shaped cell");

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n); // rows = members
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(n, i);
        for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < i; ++j) {
                const double proj = q.row(j).dot(mass * v);
                v -= proj * q.row(j).transpose();
            }
        }
        const double norm = std::sqrt(v.dot(mass * v));
        if (!(norm > 0.0)) throw NumericalError("build_basis: Gram-Schmidt breakdown at member " + std::to_string(i));
        q.row(i) = v.transpose() / norm;
    }
    basis.members = q;
    // q^T is upper triangular: invert via triangular solve
    basis.change_of_basis = q.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
    return basis;
}

inline PolyBasis build_basis(const CellGeometry& cell, int k, BasisKind kind)
{
    return build_basis(cell, k, kind, polygon_quadrature(cell, 2 * k + 2));
}

/// Columns: scaled-monomial coefficients of a basis of harmonic polynomials of degree <= k,
/// namely 1 and Re/Im of (x^ + i y^)^d for d = 1..k (2k+1 columns).
inline Eigen::MatrixXd harmonic_subspace(int k)
{
    const int n = poly_dim(k);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, 2 * k + 1);
    h(0, 0) = 1.0;
    for (int d = 1; d <= k; ++d) {
        // (x + i y)^d = sum_b C(d,b) x^(d-b) (i y)^b
        double binom = 1.0;
        for (int b = 0; b <= d; ++b) {
            if (b > 0) binom = binom * (d - b + 1) / b;
            const int idx = monomial_index(d - b, b);
            switch (b % 4) {
            case 0: h(idx, 2 * d - 1) += binom; break;
            case 1: h(idx, 2 * d) += binom; break;
            case 2: h(idx, 2 * d - 1) -= binom; break;
            case 3: h(idx, 2 * d) -= binom; break;
            }
        }
    }
    return h;
}

} // namespace minivem
