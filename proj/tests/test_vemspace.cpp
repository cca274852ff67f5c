#include "minivem/mesh_generators.hpp"
#include "minivem/vemspace.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace minivem;

namespace {

CellGeometry square() { return CellGeometry(oracle::unit_square()); }
CellGeometry hexagon() { return CellGeometry(oracle::regular_polygon(6, 0.25, Point(0.5, 0.5), 0.2)); }
CellGeometry pentagon() { return CellGeometry(oracle::regular_polygon(5, 0.3, Point(0.4, 0.6), 0.1)); }

std::vector<CellGeometry> sample_cells()
{
    std::vector<CellGeometry> cells{square(), hexagon(), pentagon()};
    for (MeshFamily f : {MeshFamily::voronoi, MeshFamily::random_polygons, MeshFamily::diamond}) {
        const PolygonalMesh m = generate_mesh(f, 1);
        cells.push_back(m.cell_geometry(0));
        cells.push_back(m.cell_geometry(m.num_cells() / 2));
    }
    return cells;
}

double eval(const LocalElement& el, const Eigen::VectorXd& coeffs, const Point& x)
{
    return el.basis.evaluate_at(x).head(coeffs.size()).dot(coeffs);
}

} // namespace

TEST(LocalDofLayout, Counts)
{
    const LocalDofLayout sq = build_layout(square(), 1);
    EXPECT_EQ(sq.scalar_count(), 4);
    EXPECT_EQ(sq.n_bubble, 3);
    EXPECT_EQ(sq.velocity_count(), 14);

    const LocalDofLayout hex = build_layout(hexagon(), 2);
    EXPECT_EQ(hex.scalar_count(), 13);
    EXPECT_EQ(hex.n_bubble, 5);

    const LocalDofLayout pent = build_layout(pentagon(), 3);
    EXPECT_EQ(pent.scalar_count(), 18);
    EXPECT_EQ(pent.velocity_count(), 2 * 18 + 2 * 7);

    EXPECT_THROW(build_layout(square(), 0), std::invalid_argument);
}

TEST(LocalDofLayout, DescriptorsAreDistinct)
{
    const LocalDofLayout l = build_layout(pentagon(), 4);
    for (std::size_t i = 0; i < l.scalar.size(); ++i)
        for (std::size_t j = i + 1; j < l.scalar.size(); ++j) EXPECT_FALSE(l.scalar[i] == l.scalar[j]);
    EXPECT_EQ(static_cast<int>(l.scalar.size()), l.scalar_count());
    EXPECT_EQ(static_cast<int>(l.bubble.size()), l.n_bubble);
    EXPECT_EQ(l.bubble.front().index, poly_dim(2));
}

TEST(Projectors, EllipticProjectionOnUnitSquare)
{
    const LocalElement el = build_local_element(square(), 1, BasisKind::scaled_monomial);
    const Eigen::VectorXd v = Eigen::Vector4d(0, 0, 1, 0);
    const Eigen::VectorXd p = el.ops.pinabla_k * v;
    for (const Point& x : {Point(0, 0), Point(0.3, 0.8), Point(1, 1), Point(0.5, 0.1)})
        EXPECT_NEAR(eval(el, p, x), -0.25 + 0.5 * x.x() + 0.5 * x.y(), 1e-14);

    // enhancement: moments of Pi0 v against the linear members equal those of the elliptic projection
    const Eigen::VectorXd z = el.ops.pizero_k * v;
    const double lhs = el.rule.integrate([&](const Point& x) { return eval(el, z, x) * (x.x() - 0.5) / std::sqrt(2.0); });
    const double rhs = el.rule.integrate([&](const Point& x) { return eval(el, p, x) * (x.x() - 0.5) / std::sqrt(2.0); });
    EXPECT_NEAR(lhs, rhs, 1e-15);
}

TEST(Projectors, ConstantFunction)
{
    for (int k = 1; k <= 3; ++k) {
        const LocalElement el = build_local_element(hexagon(), k, BasisKind::scaled_monomial);
        const Eigen::VectorXd dofs = interpolate_scalar(el, [](const Point&) { return 1.0; });
        for (int i = 0; i < el.layout.n_vertex + el.layout.n_edge; ++i) EXPECT_DOUBLE_EQ(dofs(i), 1.0);
        if (k >= 2) {
            EXPECT_NEAR(dofs(el.layout.moment_dof(0)), 1.0, 1e-14);
        }
        if (k >= 3) {
            EXPECT_NEAR(dofs(el.layout.moment_dof(1)), 0.0, 1e-14);
            EXPECT_NEAR(dofs(el.layout.moment_dof(2)), 0.0, 1e-14);
        }
        const Eigen::VectorXd p = el.ops.pinabla_k * dofs;
        EXPECT_NEAR(p(0), 1.0, 1e-13);
        EXPECT_LE(p.tail(p.size() - 1).norm(), 1e-13);
    }
}

TEST(Projectors, ReproducePolynomials)
{
    for (const CellGeometry& cell : sample_cells()) {
        for (BasisKind kind : {BasisKind::scaled_monomial, BasisKind::l2_orthonormal}) {
            for (int k = 1; k <= 4; ++k) {
                const LocalElement el = build_local_element(cell, k, kind);
                const int nk = el.dim_k();
                const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(nk, nk);
                // monomial coefficients are only determined up to cond(mass) * eps on anisotropic cells
                const double tol = kind == BasisKind::l2_orthonormal
                                       ? 1e-11
                                       : std::max(1e-11, 1e-14 * symmetric_condition(el.gram.mass.topLeftCorner(nk, nk)));
                EXPECT_LE((el.ops.pinabla_k * el.ops.dof_matrix - id).cwiseAbs().maxCoeff(), tol) << "k=" << k;
                EXPECT_LE((el.ops.pizero_k * el.ops.dof_matrix - id).cwiseAbs().maxCoeff(), tol) << "k=" << k;
            }
        }
    }
}

TEST(Projectors, InterpolatedPolynomialIsRecovered)
{
    const LocalElement el = build_local_element(pentagon(), 3, BasisKind::l2_orthonormal);
    const auto f = [](const Point& x) { return 1.0 - 2.0 * x.x() + x.x() * x.y() + 3.0 * std::pow(x.y(), 3); };
    const Eigen::VectorXd dofs = interpolate_scalar(el, f);
    const Eigen::VectorXd p = el.ops.pinabla_k * dofs;
    for (const Point& x : el.layout.nodes) EXPECT_NEAR(eval(el, p, x), f(x), 1e-11);
    EXPECT_LE((el.ops.dof_matrix * p - dofs).norm(), 1e-11 * dofs.norm());
}

TEST(Projectors, L2ProjectionMatchesMomentDofs)
{
    for (BasisKind kind : {BasisKind::scaled_monomial, BasisKind::l2_orthonormal}) {
        const LocalElement el = build_local_element(pentagon(), 4, kind);
        const int nk = el.dim_k(), nm = el.dim_km2(), n = el.layout.scalar_count();
        const Eigen::MatrixXd moments = el.gram.mass.topLeftCorner(nm, nk) * el.ops.pizero_k; // int Pi0 phi_i q_b
        Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(nm, n);
        for (int b = 0; b < nm; ++b) expected(b, el.layout.moment_dof(b)) = el.moment_weight();
        EXPECT_LE((moments - expected).cwiseAbs().maxCoeff(), 1e-12 * el.moment_weight());
    }
}

TEST(Projectors, EnhancementConsistency)
{
    for (const CellGeometry& cell : sample_cells()) {
        for (int k = 1; k <= 4; ++k) {
            const LocalElement el = build_local_element(cell, k, BasisKind::l2_orthonormal);
            const int nk = el.dim_k(), nm = el.dim_km2();
            const Eigen::MatrixXd diff = el.gram.mass.block(nm, 0, nk - nm, nk) * (el.ops.pizero_k - el.ops.pinabla_k);
            EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-12 * cell.area) << "k=" << k;
        }
    }
}

TEST(Bubbles, MomentsAgainstLowerDegreeVanish)
{
    for (int k = 1; k <= 4; ++k) {
        const LocalElement el = build_local_element(pentagon(), k, BasisKind::l2_orthonormal);
        const int nk = el.dim_k(), nm = el.dim_km2();
        const Eigen::MatrixXd moments = el.gram.mass.topLeftCorner(nk, nk) * el.ops.bubble_pizero_k;
        if (nm > 0) {
            EXPECT_LE(moments.topRows(nm).cwiseAbs().maxCoeff(), 1e-14);
        }
        const Eigen::MatrixXd slice = moments.bottomRows(nk - nm);
        EXPECT_LE((slice - el.moment_weight() * Eigen::MatrixXd::Identity(nk - nm, nk - nm)).cwiseAbs().maxCoeff(), 1e-13);
        // a bubble with no moments has zero projection
        EXPECT_EQ((el.ops.bubble_pinabla * Eigen::VectorXd::Zero(el.layout.n_bubble)).norm(), 0.0);
    }
}

TEST(Bubbles, ProjectionIsOrthogonalToHarmonicPolynomials)
{
    for (const CellGeometry& cell : sample_cells()) {
        for (BasisKind kind : {BasisKind::scaled_monomial, BasisKind::l2_orthonormal}) {
            for (int k = 1; k <= 4; ++k) {
                const LocalElement el = build_local_element(cell, k, kind);
                const Eigen::MatrixXd harm = harmonic_subspace(k + 2);
                const Eigen::MatrixXd& s = el.gram.stiffness;
                for (int c = 0; c < harm.cols(); ++c) {
                    const Eigen::VectorXd q = el.basis.from_monomial(harm.col(c));
                    const double qn = std::sqrt(std::max(q.dot(s * q), 0.0));
                    for (int j = 0; j < el.layout.n_bubble; ++j) {
                        const Eigen::VectorXd b = el.ops.bubble_pinabla.col(j);
                        const double bn = std::sqrt(b.dot(s * b));
                        EXPECT_LE(std::abs(b.dot(s * q)), 1e-12 * std::max(bn * qn, 1e-300)) << "k=" << k;
                    }
                }
            }
        }
    }
}

TEST(Bubbles, StiffnessSystemOnUnitSquare)
{
    const LocalElement el = build_local_element(square(), 1, BasisKind::scaled_monomial);
    const double h = el.cell.diameter;
    // q = xhat^2 + yhat^2, Laplacian 4/h^2; bubble 0 has unit moment against 1, so int b = |K|
    Eigen::VectorXd q = Eigen::VectorXd::Zero(el.basis.dimension());
    q(monomial_index(2, 0)) = 1.0;
    q(monomial_index(0, 2)) = 1.0;
    const double lhs = q.dot(el.gram.stiffness * el.ops.bubble_pinabla.col(0));
    EXPECT_NEAR(lhs, -4.0 / (h * h) * el.cell.area, 1e-13);
    // boundary mean of the projection is zero
    double mean = 0.0;
    for (const auto& tr : el.edges) mean += tr.rule.integrate([&](const Point& x) { return eval(el, el.ops.bubble_pinabla.col(0), x); });
    EXPECT_NEAR(mean, 0.0, 1e-14);
}

TEST(Interpolation, VelocityHasZeroBubbles)
{
    const LocalElement el = build_local_element(hexagon(), 2, BasisKind::l2_orthonormal);
    const Eigen::VectorXd v = interpolate_velocity(el, [](const Point& x) { return Eigen::Vector2d(x.y(), -x.x()); });
    const int n = el.layout.scalar_count();
    EXPECT_EQ(v.size(), el.layout.velocity_count());
    EXPECT_EQ(v.tail(2 * el.layout.n_bubble).norm(), 0.0);
    EXPECT_NEAR(v(0), el.layout.nodes[0].y(), 1e-15);
    EXPECT_NEAR(v(n), -el.layout.nodes[0].x(), 1e-15);
}

TEST(Interpolation, PolynomialDofsMatchDofMatrix)
{
    const LocalElement el = build_local_element(pentagon(), 2, BasisKind::l2_orthonormal);
    Eigen::VectorXd mono = Eigen::VectorXd::Zero(poly_dim(2));
    mono << 0.3, -1.0, 2.0, 0.5, 1.5, -0.7;
    const Eigen::VectorXd c = polynomial_in_basis(el, mono);
    const auto f = [&](const Point& x) { return el.basis.evaluate_at(x).dot(c); };
    const Eigen::VectorXd dofs = interpolate_scalar(el, f);
    EXPECT_LE((dofs - el.ops.dof_matrix * c.head(el.dim_k())).norm(), 1e-12 * dofs.norm());
}

TEST(Interpolation, ErrorDecreasesAtOptimalOrder)
{
    const auto f = [](const Point& x) { return std::sin(2.0 * std::numbers::pi * x.x()); };
    for (int k = 1; k <= 2; ++k) {
        std::vector<double> h, e;
        for (int level = 2; level <= 4; ++level) {
            const PolygonalMesh m = generate_mesh(MeshFamily::hexagonal, level);
            h.push_back(m.h);
            double s = 0.0;
            for (std::size_t c = 0; c < m.num_cells(); ++c) {
                const LocalElement el = build_local_element(m.cell_geometry(c), k, BasisKind::l2_orthonormal);
                const Eigen::VectorXd p = el.ops.pizero_k * interpolate_scalar(el, f);
                s += el.rule.integrate([&](const Point& x) { const double d = f(x) - eval(el, p, x); return d * d; });
            }
            e.push_back(std::sqrt(s));
        }
        const double rate = std::log(e[1] / e[2]) / std::log(h[1] / h[2]);
        EXPECT_GE(rate, k + 0.85) << "k=" << k;
    }
}
