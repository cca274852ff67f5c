#pragma once

// Independent reference computations used by the tests. Nothing here calls into the
// library's quadrature or projector code.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

using Point = Eigen::Vector2d;

/// Gauss-Legendre nodes/weights on [0,1] by the Golub-Welsch eigenvalue method.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre01(int n)
{
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        j(i, i - 1) = j(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    Eigen::VectorXd x = (es.eigenvalues().array() + 1.0) / 2.0;
    Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square(); // sums to 1 on [0,1]
    return {x, w};
}

/// int_K x^a y^b over a counter-clockwise polygon, by Green's theorem:
/// int_K x^a y^b = oint x^(a+1) y^b / (a+1) dy, with an exact Gauss rule per edge.
inline double monomial_integral(const std::vector<Point>& ring, int a, int b)
{
    const auto [t, w] = gauss_legendre01((a + b + 2) / 2 + 2);
    double s = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point& p = ring[i];
        const Point& q = ring[(i + 1) % ring.size()];
        const double dy = q.y() - p.y();
        for (int g = 0; g < t.size(); ++g) {
            const Point x = p + t(g) * (q - p);
            s += w(g) * std::pow(x.x(), a + 1) * std::pow(x.y(), b) / (a + 1) * dy;
        }
    }
    return s;
}

inline double shoelace_area(const std::vector<Point>& ring)
{
    double s = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point& p = ring[i];
        const Point& q = ring[(i + 1) % ring.size()];
        s += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * s;
}

/// Central difference of a scalar function along direction e.
inline double central_difference(const std::function<double(const Point&)>& f, const Point& x, const Point& e, double h = 1e-5)
{
    return (f(x + h * e) - f(x - h * e)) / (2.0 * h);
}

/// Five-point Laplacian with step h.
inline double laplacian_fd(const std::function<double(const Point&)>& f, const Point& x, double h = 1e-4)
{
    const Point ex(h, 0), ey(0, h);
    return (f(x + ex) + f(x - ex) + f(x + ey) + f(x - ey) - 4.0 * f(x)) / (h * h);
}

inline std::vector<Point> regular_polygon(int n, double radius, const Point& center = Point(0.5, 0.5), double phase = 0.0)
{
    std::vector<Point> ring;
    for (int i = 0; i < n; ++i) {
        const double t = phase + 2.0 * M_PI * i / n;
        ring.emplace_back(center.x() + radius * std::cos(t), center.y() + radius * std::sin(t));
    }
    return ring;
}

inline std::vector<Point> unit_square() { return {Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)}; }

} // namespace oracle
