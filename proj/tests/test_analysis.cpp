#include "minivem/minivem.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace minivem;

namespace {

AssemblyConfig config(int k)
{
    AssemblyConfig c;
    c.k = k;
    return c;
}

std::vector<Point> random_points(int n, unsigned seed)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(u(gen), u(gen));
    return pts;
}

std::vector<std::string> all_cases() { return {"test1", "test2", "patch_1", "patch_2", "patch_3", "patch_4"}; }

} // namespace

TEST(Manufactured, PointValues)
{
    const ManufacturedCase t1 = manufactured("test1");
    const Eigen::Vector2d u = t1.velocity(Point(0.25, 0.25));
    EXPECT_NEAR(u.x(), 1.0, 1e-15);
    EXPECT_NEAR(u.y(), -1.0, 1e-15);
    EXPECT_NEAR(manufactured("test2").pressure(Point(0.0, 0.0)), -0.1, 1e-15);
    const ManufacturedCase p1 = manufactured("patch", 1);
    EXPECT_EQ(p1.id, "patch_1");
    EXPECT_THROW(manufactured("test3"), std::invalid_argument);
    EXPECT_THROW(manufactured("patch_x"), std::invalid_argument);
}

TEST(Manufactured, DivergenceFreeAtRandomPoints)
{
    for (const auto& id : all_cases()) {
        const ManufacturedCase mc = manufactured(id);
        for (const Point& x : random_points(100, 7)) {
            const Eigen::Matrix2d g = mc.velocity_gradient(x);
            EXPECT_LE(std::abs(g.trace()), 1e-12) << id;
        }
    }
}

TEST(Manufactured, DerivativesAndForcingMatchFiniteDifferences)
{
    for (const auto& id : all_cases()) {
        const ManufacturedCase mc = manufactured(id);
        for (const Point& x : random_points(10, 11)) {
            const Eigen::Matrix2d g = mc.velocity_gradient(x);
            for (int c = 0; c < 2; ++c) {
                const auto comp = [&](const Point& y) { return mc.velocity(y)(c); };
                EXPECT_NEAR(g(c, 0), oracle::central_difference(comp, x, Point(1, 0)), 1e-6 * (1 + g.norm())) << id;
                EXPECT_NEAR(g(c, 1), oracle::central_difference(comp, x, Point(0, 1)), 1e-6 * (1 + g.norm())) << id;
                const double lap = oracle::laplacian_fd(comp, x, 1e-3);
                const double dp = oracle::central_difference(mc.pressure, x, c == 0 ? Point(1, 0) : Point(0, 1));
                const Eigen::Vector2d f = mc.forcing(x);
                EXPECT_NEAR(f(c), -lap + dp, 1e-3 * (1 + f.norm())) << id << " component " << c;
            }
            EXPECT_LE((mc.boundary(x) - mc.velocity(x)).norm(), 0.0);
        }
    }
}

TEST(Manufactured, PressureMeanByQuadrature)
{
    const auto [pts, wts] = oracle::gauss_legendre01(12);
    for (const auto& id : all_cases()) {
        const ManufacturedCase mc = manufactured(id);
        double mean = 0.0;
        for (Eigen::Index i = 0; i < pts.size(); ++i)
            for (Eigen::Index j = 0; j < pts.size(); ++j) mean += wts[i] * wts[j] * mc.pressure(Point(pts[i], pts[j]));
        EXPECT_NEAR(mean, mc.pressure_mean, 1e-13) << id;
        if (id.starts_with("patch")) {
            EXPECT_NEAR(mc.pressure_mean, 0.0, 1e-13) << id;
        }
    }
    EXPECT_NEAR(manufactured("test2").pressure_mean, -0.05, 1e-15);
}

TEST(Errors, PatchPipelineIsExact)
{
    const PolygonalMesh mesh = generate_mesh(MeshFamily::voronoi, 1);
    for (int k = 1; k <= 3; ++k) {
        const ManufacturedCase mc = manufactured("patch", k);
        const SingleRun run = run_case(mesh, mc, config(k), false);
        ASSERT_TRUE(run.solution.diagnostics.converged);
        const InterpolatedDofs exact = interpolate_solution(run.system, mc);
        EXPECT_LE((run.solution.velocity - exact.velocity).lpNorm<Eigen::Infinity>(), 1e-9) << "k=" << k;
        EXPECT_LE((run.solution.pressure - exact.pressure).lpNorm<Eigen::Infinity>(), 1e-9) << "k=" << k;
        EXPECT_LE(run.solution.bubbles.lpNorm<Eigen::Infinity>(), 1e-9) << "k=" << k;
        EXPECT_LE(run.errors.err0_u, 1e-9);
        EXPECT_LE(run.errors.err1_u, 1e-9);
        EXPECT_LE(run.errors.err0_p, 1e-9);
        EXPECT_FALSE(run.errors.absolute_u || run.errors.absolute_grad_u || run.errors.absolute_p);
    }
}

TEST(Errors, ZeroExactSolutionGivesAbsoluteErrors)
{
    ManufacturedCase zero;
    zero.id = "zero";
    zero.velocity = [](const Point&) { return Eigen::Vector2d::Zero().eval(); };
    zero.velocity_gradient = [](const Point&) { return Eigen::Matrix2d::Zero().eval(); };
    zero.pressure = [](const Point&) { return 0.0; };
    zero.forcing = zero.velocity;
    zero.boundary = zero.velocity;
    const PolygonalMesh mesh = generate_mesh(MeshFamily::hexagonal, 1);
    const SingleRun run = run_case(mesh, zero, config(1), false);
    EXPECT_TRUE(run.errors.absolute_u && run.errors.absolute_grad_u && run.errors.absolute_p);
    EXPECT_EQ(run.errors.err0_u, 0.0);
    EXPECT_EQ(run.errors.err1_u, 0.0);
    EXPECT_EQ(run.errors.err0_p, 0.0);
    EXPECT_FALSE(std::isnan(run.errors.err0_p));
}

TEST(Errors, BubblesNeverContribute)
{
    const PolygonalMesh mesh = generate_mesh(MeshFamily::hexagonal, 2);
    const ManufacturedCase mc = manufactured("test1");
    SingleRun run = run_case(mesh, mc, config(2), false);
    Solution altered = run.solution;
    altered.bubbles = Eigen::VectorXd::Constant(altered.bubbles.size(), 1e3);
    const ErrorReport e = compute_errors(run.system, altered, mc);
    EXPECT_EQ(e.err0_u, run.errors.err0_u);
    EXPECT_EQ(e.err1_u, run.errors.err1_u);
    EXPECT_EQ(e.err0_p, run.errors.err0_p);
    altered.pressure.conservativeResize(3);
    EXPECT_THROW(compute_errors(run.system, altered, mc), std::invalid_argument);
}

TEST(Rates, SimpleFormulas)
{
    EXPECT_NEAR(observed_rate(0.5, 0.25, 0.25, 0.0625), 2.0, 1e-15);
    EXPECT_TRUE(std::isnan(observed_rate(0.5, 0.0, 0.25, 0.1)));
    std::vector<double> h{0.4, 0.2, 0.1, 0.05}, e;
    for (double x : h) e.push_back(3.0 * std::pow(x, 2.5));
    EXPECT_NEAR(least_squares_rate(h, e), 2.5, 1e-12);
    EXPECT_TRUE(std::isnan(least_squares_rate({0.1}, {0.1})));
}

TEST(Convergence, Test1HexagonalDegreeOne)
{
    ConvergenceStudy study;
    study.levels = {1, 2, 3, 4};
    const auto records = run_convergence(study);
    ASSERT_EQ(records.size(), 4u);
    std::vector<double> h, e1, e0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        ASSERT_TRUE(records[i].ok()) << records[i].failure;
        if (i > 0) {
            EXPECT_LT(records[i].h, records[i - 1].h);
        }
        EXPECT_GE(records[i].errors.err0_u, 0.0);
        h.push_back(records[i].h);
        e1.push_back(records[i].errors.err1_u);
        e0.push_back(records[i].errors.err0_u);
    }
    const double r1 = least_squares_rate(h, e1);
    EXPECT_GE(r1, 0.85);
    EXPECT_LE(r1, 1.3);
    EXPECT_GE(least_squares_rate(h, e0), 1.6);
    EXPECT_TRUE(std::isnan(records[0].rate1_u));
    EXPECT_NEAR(records[3].rate1_u, observed_rate(h[2], e1[2], h[3], e1[3]), 1e-15);
}

TEST(Convergence, Test2VoronoiDegreeTwo)
{
    ConvergenceStudy study;
    study.cases = {"test2"};
    study.families = {MeshFamily::voronoi};
    study.levels = {1, 2, 3};
    study.k_list = {2};
    const auto records = run_convergence(study);
    std::vector<double> h, e0;
    for (const auto& r : records) {
        ASSERT_TRUE(r.ok()) << r.failure;
        h.push_back(r.h);
        e0.push_back(r.errors.err0_u);
    }
    EXPECT_GE(least_squares_rate(h, e0), 2.6);
}

TEST(Convergence, InvalidStudyRejected)
{
    ConvergenceStudy study;
    study.levels = {9};
    EXPECT_THROW(run_convergence(study), std::invalid_argument);
    study.levels = {1};
    study.cases = {"nope"};
    EXPECT_THROW(run_convergence(study), std::invalid_argument);
}

TEST(Interpolation, PolynomialsAreReproduced)
{
    const PolygonalMesh mesh = generate_mesh(MeshFamily::random_polygons, 1);
    for (int k = 1; k <= 3; ++k) {
        const auto f = [k](const Point& x) { return std::pow(x.x() - 0.3, k) + 2.0 * std::pow(x.y(), k) + x.x() * std::pow(x.y(), k - 1) + 1.0; };
        EXPECT_LE(interpolation_error(mesh, k, BasisKind::l2_orthonormal, f), 1e-12) << "k=" << k;
    }
}

TEST(Interpolation, SmoothFunctionOrder)
{
    const auto f = [](const Point& x) { return std::sin(2 * std::numbers::pi * x.x()) * std::cos(2 * std::numbers::pi * x.y()); };
    std::vector<double> h, e;
    for (int level = 2; level <= 4; ++level) {
        const PolygonalMesh mesh = generate_mesh(MeshFamily::hexagonal, level);
        h.push_back(mesh.h);
        e.push_back(interpolation_error(mesh, 1, BasisKind::l2_orthonormal, f));
    }
    EXPECT_GE(observed_rate(h[1], e[1], h[2], e[2]), 1.85);
}

TEST(AlphaSweep, OneEntryPerPointOrMissingMarker)
{
    const PolygonalMesh mesh = generate_mesh(MeshFamily::hexagonal, 1);
    const std::vector<double> alphas{1e-2, 1.0, 1e2};
    const auto records = run_alpha_sweep(mesh, {1, 2}, {BasisKind::l2_orthonormal, BasisKind::scaled_monomial}, alphas);
    ASSERT_EQ(records.size(), 12u);
    for (const auto& r : records) EXPECT_TRUE(r.condition.has_value() != !r.failure.empty());

    // a dense limit below the system size turns every point into a missing entry
    const auto missing = run_alpha_sweep(mesh, {1}, {BasisKind::l2_orthonormal}, alphas, ConditionMethod::dense_svd, 10);
    ASSERT_EQ(missing.size(), 3u);
    std::ostringstream out;
    write_alpha_csv(out, missing);
    EXPECT_EQ(out.str(), "basis,k,alpha,cond\northo,1,1.0000000000e-02,missing\northo,1,1.0000000000e+00,missing\n"
                         "ortho,1,1.0000000000e+02,missing\n");

    EXPECT_THROW(run_alpha_sweep(mesh, {1}, {BasisKind::l2_orthonormal}, {1.0, 1e-2}), std::invalid_argument);
    EXPECT_THROW(run_alpha_sweep(mesh, {1}, {BasisKind::l2_orthonormal}, {0.0, 1.0}), std::invalid_argument);
    EXPECT_EQ(default_alpha_grid().size(), 13u);
    EXPECT_EQ(default_alpha_grid().front(), 1e-15);
    EXPECT_EQ(default_alpha_grid().back(), 1e3);
}

TEST(AlphaSweep, MonomialWorseThanOrthonormalAtHighDegree)
{
    const PolygonalMesh mesh = generate_mesh(MeshFamily::voronoi, 1);
    const auto records = run_alpha_sweep(mesh, {3}, {BasisKind::l2_orthonormal, BasisKind::scaled_monomial}, {1.0});
    ASSERT_EQ(records.size(), 2u);
    ASSERT_TRUE(records[0].condition && records[1].condition);
    EXPECT_GT(*records[1].condition, *records[0].condition);
}

TEST(Csv, ConvergenceFormat)
{
    EXPECT_EQ(csv_number(0.1), "1.0000000000e-01");
    EXPECT_EQ(csv_number(std::numeric_limits<double>::quiet_NaN()), "nan");
    ConvergenceRecord ok;
    ok.level = 1;
    ok.h = 0.5;
    ok.n_dofs = 10;
    ok.errors.err0_u = 0.25;
    ok.seconds = 3.5;
    ConvergenceRecord bad = ok;
    bad.level = 2;
    bad.failure = "boom";
    std::ostringstream out;
    write_convergence_csv(out, {ok, bad});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, convergence_csv_header);
    std::getline(in, line);
    EXPECT_EQ(line, "hexagonal,1,1,5.0000000000e-01,10,2.5000000000e-01,0.0000000000e+00,0.0000000000e+00,nan,nan,nan,0.000");
    std::getline(in, line);
    EXPECT_EQ(line, "hexagonal,2,1,nan,0,nan,nan,nan,nan,nan,nan,0.000");
    std::ostringstream timed;
    write_convergence_csv(timed, {ok}, true);
    EXPECT_NE(timed.str().find(",3.500\n"), std::string::npos);
}
