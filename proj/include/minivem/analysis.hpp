#pragma once

// Manufactured solutions, projected error norms, convergence studies and the
// conditioning sweep over the pressure stabilization weight.

#include "minivem/assembly.hpp"
#include "minivem/mesh_generators.hpp"
#include "minivem/mesh_io.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace minivem {

using GradientFunction = std::function<Eigen::Matrix2d(const Point&)>; // row c = grad u_c

struct ManufacturedCase {
    std::string id;
    VectorFunction velocity;
    GradientFunction velocity_gradient;
    ScalarFunction pressure;
    VectorFunction forcing; // -lap u + grad p
    VectorFunction boundary;
    double pressure_mean = 0.0; // mean of p over the unit square
};

namespace detail {

/// Sparse bivariate polynomial sum c_(a,b) x^a y^b.
struct Poly2 {
    std::map<std::pair<int, int>, double> terms;

    double operator()(const Point& p) const
    {
        double s = 0.0;
        for (const auto& [e, c] : terms) s += c * std::pow(p.x(), e.first) * std::pow(p.y(), e.second);
        return s;
    }
    Poly2 dx() const
    {
        Poly2 r;
        for (const auto& [e, c] : terms)
            if (e.first > 0) r.terms[{e.first - 1, e.second}] += c * e.first;
        return r;
    }
    Poly2 dy() const
    {
        Poly2 r;
        for (const auto& [e, c] : terms)
            if (e.second > 0) r.terms[{e.first, e.second - 1}] += c * e.second;
        return r;
    }
    Poly2 operator+(const Poly2& o) const
    {
        Poly2 r = *this;
        for (const auto& [e, c] : o.terms) r.terms[e] += c;
        return r;
    }
    Poly2 operator*(double s) const
    {
        Poly2 r = *this;
        for (auto& [e, c] : r.terms) c *= s;
        return r;
    }
};

inline ManufacturedCase polynomial_case(std::string id, const Poly2& u1, const Poly2& u2, const Poly2& p)
{
    ManufacturedCase mc;
    mc.id = std::move(id);
    const Poly2 f1 = (u1.dx().dx() + u1.dy().dy()) * -1.0 + p.dx();
    const Poly2 f2 = (u2.dx().dx() + u2.dy().dy()) * -1.0 + p.dy();
    const Poly2 u1x = u1.dx(), u1y = u1.dy(), u2x = u2.dx(), u2y = u2.dy();
    mc.velocity = [u1, u2](const Point& x) { return Eigen::Vector2d(u1(x), u2(x)); };
    mc.velocity_gradient = [=](const Point& x) {
        Eigen::Matrix2d g;
        g << u1x(x), u1y(x), u2x(x), u2y(x);
        return g;
    };
    mc.pressure = [p](const Point& x) { return p(x); };
    mc.forcing = [f1, f2](const Point& x) { return Eigen::Vector2d(f1(x), f2(x)); };
    mc.boundary = mc.velocity;
    double mean = 0.0;
    for (const auto& [e, c] : p.terms) mean += c / ((e.first + 1.0) * (e.second + 1.0));
    mc.pressure_mean = mean;
    return mc;
}

} // namespace detail

/// Divergence-free polynomial velocity of degree k with a mean-zero pressure of degree
/// max(k-1, 1): u = curl of x y^k + x^k y + (y^(k+1) - x^(k+1))/(k+1).
inline ManufacturedCase patch_case(int k)
{
    if (k < 1) throw std::invalid_argument("patch case: k must be >= 1");
    detail::Poly2 psi;
    psi.terms[{1, k}] += 1.0;
    psi.terms[{k, 1}] += 1.0;
    psi.terms[{0, k + 1}] += 1.0 / (k + 1);
    psi.terms[{k + 1, 0}] -= 1.0 / (k + 1);
    const detail::Poly2 u1 = psi.dy();
    const detail::Poly2 u2 = psi.dx() * -1.0;
    detail::Poly2 p;
    const int d = std::max(k - 1, 1);
    p.terms[{d, 0}] += 1.0;
    p.terms[{0, d}] += 1.0;
    p.terms[{0, 0}] -= 2.0 / (d + 1);
    return detail::polynomial_case("patch_" + std::to_string(k), u1, u2, p);
}

inline ManufacturedCase test1_case()
{
    constexpr double w = 2.0 * std::numbers::pi;
    ManufacturedCase mc;
    mc.id = "test1";
    mc.velocity = [](const Point& p) {
        const double x = p.x(), y = p.y();
        return Eigen::Vector2d(std::sin(w * y) * (1.0 - std::cos(w * x)), std::sin(w * x) * (std::cos(w * y) - 1.0));
    };
    mc.velocity_gradient = [](const Point& p) {
        const double x = p.x(), y = p.y();
        Eigen::Matrix2d g;
        g << w * std::sin(w * y) * std::sin(w * x), w * std::cos(w * y) * (1.0 - std::cos(w * x)),
            w * std::cos(w * x) * (std::cos(w * y) - 1.0), -w * std::sin(w * x) * std::sin(w * y);
        return g;
    };
    mc.pressure = [](const Point& p) { return w * (std::cos(w * p.y()) - std::cos(w * p.x())); };
    mc.forcing = [](const Point& p) {
        const double x = p.x(), y = p.y(), w2 = w * w;
        return Eigen::Vector2d(w2 * std::sin(w * y) * (1.0 - 2.0 * std::cos(w * x)) + w2 * std::sin(w * x),
                               w2 * std::sin(w * x) * (2.0 * std::cos(w * y) - 1.0) - w2 * std::sin(w * y));
    };
    mc.boundary = mc.velocity;
    mc.pressure_mean = 0.0;
    return mc;
}

inline ManufacturedCase test2_case()
{
    ManufacturedCase mc;
    mc.id = "test2";
    struct Terms {
        double X, X1, X2, X3, Y, Y1, Y2, W, W1, W2, S;
        explicit Terms(const Point& p)
        {
            const double x = p.x(), y = p.y();
            X = x * x * (x - 1.0) * (x - 1.0);
            X1 = 4 * x * x * x - 6 * x * x + 2 * x;
            X2 = 12 * x * x - 12 * x + 2;
            X3 = 24 * x - 12;
            Y = 2 * y * y * y - y;
            Y1 = 6 * y * y - 1;
            Y2 = 12 * y;
            W = y * y * y * y - y * y;
            W1 = 4 * y * y * y - 2 * y;
            W2 = 12 * y * y - 2;
            S = 6 * std::pow(x, 5) - 15 * std::pow(x, 4) + 10 * x * x * x;
        }
    };
    mc.velocity = [](const Point& p) {
        const Terms t(p);
        return Eigen::Vector2d(t.X * t.Y, -0.5 * t.X1 * t.W);
    };
    mc.velocity_gradient = [](const Point& p) {
        const Terms t(p);
        Eigen::Matrix2d g;
        g << t.X1 * t.Y, t.X * t.Y1, -0.5 * t.X2 * t.W, -0.5 * t.X1 * t.W1;
        return g;
    };
    mc.pressure = [](const Point& p) {
        const Terms t(p);
        return t.X1 * t.Y + t.S * p.y() / 5.0 - 0.1;
    };
    mc.forcing = [](const Point& p) {
        const Terms t(p);
        return Eigen::Vector2d(-6.0 * t.X * p.y(), 0.5 * (t.X3 * t.W + t.X1 * t.W2) + t.X1 * t.Y1 + t.S / 5.0);
    };
    mc.boundary = mc.velocity;
    // int_0^1 int_0^1 p = 0 + (1/5)(1/2)(1/2) - 1/10
    mc.pressure_mean = -0.05;
    return mc;
}

/// "test1", "test2", "patch" (degree k) or "patch_<n>".
inline ManufacturedCase manufactured(std::string_view id, int k = 1)
{
    if (id == "test1") return test1_case();
    if (id == "test2") return test2_case();
    if (id == "patch") return patch_case(k);
    if (id.starts_with("patch_")) {
        const std::string digits(id.substr(6));
        if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos && digits.size() < 3)
            return patch_case(std::stoi(digits));
    }
    throw std::invalid_argument("unknown manufactured case '" + std::string(id) + "'");
}

struct ErrorReport {
    double err0_u = 0.0;
    double err1_u = 0.0;
    double err0_p = 0.0;
    // set when the exact norm vanishes and the corresponding error is absolute
    bool absolute_u = false;
    bool absolute_grad_u = false;
    bool absolute_p = false;
};

/// Errors of the cellwise projections Pi0_k u_h, grad Pi0_k u_h and Pi0_k p_h against
/// the exact solution; the pressure is compared after removing its mean. Bubble DOFs are
/// never read.
inline ErrorReport compute_errors(const GlobalSystem& sys, const Solution& sol, const ManufacturedCase& mc)
{
    const GlobalDofMap& dm = sys.dofs;
    if (!sys.elements || sys.elements->size() != dm.cell_scalar.size())
        throw std::invalid_argument("compute_errors: system carries no local elements");
    if (sol.k != dm.k || sol.velocity.size() != dm.velocity_count() || sol.pressure.size() != dm.pressure_count())
        throw std::invalid_argument("compute_errors: solution does not match the system");
    const int ns = dm.scalar_count;
    double e0 = 0, n0 = 0, e1 = 0, n1 = 0, ep = 0, np = 0;
    for (std::size_t c = 0; c < sys.elements->size(); ++c) {
        const LocalElement& el = (*sys.elements)[c];
        const auto& scal = dm.cell_scalar[c];
        const int n = static_cast<int>(scal.size());
        const int nk = el.dim_k();
        Eigen::VectorXd ux(n), uy(n), ph(n);
        for (int i = 0; i < n; ++i) {
            const int g = scal[static_cast<std::size_t>(i)];
            ux(i) = sol.velocity(g);
            uy(i) = sol.velocity(ns + g);
            ph(i) = sol.pressure(g);
        }
        const Eigen::VectorXd cx = el.ops.pizero_k * ux, cy = el.ops.pizero_k * uy, cp = el.ops.pizero_k * ph;
        const Eigen::MatrixXd vals = el.basis.evaluate(el.rule.points).leftCols(nk);
        const auto [gx, gy] = el.basis.gradient(el.rule.points);
        for (std::size_t q = 0; q < el.rule.size(); ++q) {
            const auto qi = static_cast<Eigen::Index>(q);
            const Point& x = el.rule.points[q];
            const double w = el.rule.weights[q];
            const Eigen::Vector2d u = mc.velocity(x);
            const Eigen::Matrix2d gu = mc.velocity_gradient(x);
            const double p = mc.pressure(x) - mc.pressure_mean;
            const Eigen::Vector2d uh(vals.row(qi).dot(cx), vals.row(qi).dot(cy));
            Eigen::Matrix2d guh;
            guh << gx.row(qi).head(nk).dot(cx), gy.row(qi).head(nk).dot(cx), gx.row(qi).head(nk).dot(cy),
                gy.row(qi).head(nk).dot(cy);
            const double phq = vals.row(qi).dot(cp);
            e0 += w * (u - uh).squaredNorm();
            n0 += w * u.squaredNorm();
            e1 += w * (gu - guh).squaredNorm();
            n1 += w * gu.squaredNorm();
            ep += w * (p - phq) * (p - phq);
            np += w * p * p;
        }
    }
    ErrorReport r;
    auto ratio = [](double e, double n, bool& absolute) {
        absolute = !(n > 0.0);
        return absolute ? std::sqrt(e) : std::sqrt(e / n);
    };
    r.err0_u = ratio(e0, n0, r.absolute_u);
    r.err1_u = ratio(e1, n1, r.absolute_grad_u);
    r.err0_p = ratio(ep, np, r.absolute_p);
    return r;
}

/// Global DOF vectors of the interpolant of an exact solution (bubble part zero).
struct InterpolatedDofs {
    Eigen::VectorXd velocity;
    Eigen::VectorXd pressure;
};

inline InterpolatedDofs interpolate_solution(const GlobalSystem& sys, const ManufacturedCase& mc)
{
    const GlobalDofMap& dm = sys.dofs;
    const int ns = dm.scalar_count;
    InterpolatedDofs out{Eigen::VectorXd::Zero(2 * ns), Eigen::VectorXd::Zero(ns)};
    for (std::size_t c = 0; c < sys.elements->size(); ++c) {
        const LocalElement& el = (*sys.elements)[c];
        const Eigen::VectorXd u = interpolate_velocity(el, mc.velocity);
        const Eigen::VectorXd p = interpolate_scalar(el, [&](const Point& x) { return mc.pressure(x) - mc.pressure_mean; });
        const auto& scal = dm.cell_scalar[c];
        const auto n = static_cast<Eigen::Index>(scal.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const int g = scal[static_cast<std::size_t>(i)];
            out.velocity(g) = u(i);
            out.velocity(ns + g) = u(n + i);
            out.pressure(g) = p(i);
        }
    }
    return out;
}

/// L2 error of Pi0_k applied to the VEM interpolant of a scalar function.
inline double interpolation_error(const PolygonalMesh& mesh, int k, BasisKind basis, const ScalarFunction& f)
{
    std::vector<double> local(mesh.num_cells());
    parallel_for(mesh.num_cells(), [&](std::size_t c) {
        const LocalElement el = build_local_element(mesh.cell_geometry(c), k, basis);
        const Eigen::VectorXd coeffs = el.ops.pizero_k * interpolate_scalar(el, f);
        double e = 0.0;
        for (std::size_t q = 0; q < el.rule.size(); ++q) {
            const double d = f(el.rule.points[q]) - el.basis.evaluate_at(el.rule.points[q]).head(el.dim_k()).dot(coeffs);
            e += el.rule.weights[q] * d * d;
        }
        local[c] = e;
    });
    double total = 0.0;
    for (double e : local) total += e;
    return std::sqrt(total);
}

/// Observed order between two refinements.
inline double observed_rate(double h0, double e0, double h1, double e1)
{
    if (!(e0 > 0.0) || !(e1 > 0.0) || !(h0 > 0.0) || !(h1 > 0.0) || h0 == h1) return std::numeric_limits<double>::quiet_NaN();
    return std::log(e0 / e1) / std::log(h0 / h1);
}

/// Least-squares slope of log(e) against log(h).
inline double least_squares_rate(const std::vector<double>& h, const std::vector<double>& e)
{
    if (h.size() != e.size() || h.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0) || !(e[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double x = std::log(h[i]), y = std::log(e[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    return den > 0.0 ? (n * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();
}

struct ConvergenceRecord {
    std::string case_id;
    MeshFamily family = MeshFamily::hexagonal;
    int level = 0;
    int k = 1;
    double h = 0.0;
    long n_dofs = 0; // velocity (with bubbles) + pressure unknowns
    ErrorReport errors;
    double rate0_u = std::numeric_limits<double>::quiet_NaN();
    double rate1_u = std::numeric_limits<double>::quiet_NaN();
    double rate0_p = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> condition;
    double seconds = 0.0;
    std::vector<std::string> warnings;
    std::string failure; // non-empty if the run failed
    bool ok() const { return failure.empty(); }
};

struct ConvergenceStudy {
    std::vector<std::string> cases{"test1"};
    std::vector<MeshFamily> families{MeshFamily::hexagonal};
    std::vector<int> levels{1, 2, 3, 4};
    std::vector<int> k_list{1};
    BasisKind basis = BasisKind::l2_orthonormal;
    StabilizationConfig stabilization;
    std::uint64_t seed = 42;
    bool condensed = false;
    bool condition = false; // dense condition number when within the limit
    Eigen::Index dense_limit = default_dense_limit;
};

struct SingleRun {
    GlobalSystem system;
    Solution solution;
    ErrorReport errors;
};

inline SingleRun run_case(const PolygonalMesh& mesh, const ManufacturedCase& mc, const AssemblyConfig& cfg, bool condensed)
{
    SingleRun r;
    r.system = assemble(mesh, cfg, mc.forcing, mc.boundary);
    r.solution = condensed ? solve(condense(r.system)) : solve(r.system);
    r.errors = compute_errors(r.system, r.solution, mc);
    return r;
}

/// One record per (case, family, k, level), in that nesting order. Failures are recorded
/// and the sweep continues. Rates compare each level with the previous successful one.
inline std::vector<ConvergenceRecord> run_convergence(const ConvergenceStudy& study,
                                                      const std::function<void(const ConvergenceRecord&)>& progress = {})
{
    for (MeshFamily fam : study.families)
        for (int level : study.levels)
            if (level < 1 || level > max_level(fam))
                throw std::invalid_argument("level " + std::to_string(level) + " is not available for family " + to_string(fam) +
                                            " (1.." + std::to_string(max_level(fam)) + ")");
    for (int k : study.k_list)
        if (k < 1) throw std::invalid_argument("k must be >= 1");
    study.stabilization.validate();
    for (const auto& id : study.cases) (void)manufactured(id, 1);

    std::vector<ConvergenceRecord> records;
    for (const auto& id : study.cases) {
        for (MeshFamily fam : study.families) {
            std::map<int, PolygonalMesh> meshes;
            for (int k : study.k_list) {
                const ManufacturedCase mc = manufactured(id, k);
                for (int level : study.levels) {
                    ConvergenceRecord rec;
                    rec.case_id = id;
                    rec.family = fam;
                    rec.level = level;
                    rec.k = k;
                    const auto t0 = std::chrono::steady_clock::now();
                    try {
                        if (!meshes.count(level)) meshes.emplace(level, generate_mesh(fam, level, study.seed));
                        const PolygonalMesh& mesh = meshes.at(level);
                        rec.h = mesh.h;
                        AssemblyConfig cfg{k, study.basis, study.stabilization};
                        SingleRun run = run_case(mesh, mc, cfg, study.condensed);
                        rec.n_dofs = run.system.dofs.velocity_count() + run.system.dofs.bubble_count() + run.system.dofs.pressure_count();
                        rec.errors = run.errors;
                        rec.warnings = run.solution.diagnostics.warnings;
                        if (study.condition && run.system.size() <= study.dense_limit)
                            rec.condition = condition_number(run.system, ConditionMethod::dense_svd, study.dense_limit);
                    } catch (const std::exception& e) {
                        rec.failure = e.what();
                    }
                    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    records.push_back(std::move(rec));
                    if (progress) progress(records.back());
                }
            }
        }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        ConvergenceRecord& r = records[i];
        if (!r.ok()) continue;
        for (std::size_t j = i; j-- > 0;) {
            const ConvergenceRecord& p = records[j];
            if (p.case_id != r.case_id || p.family != r.family || p.k != r.k) break;
            if (!p.ok()) continue;
            r.rate0_u = observed_rate(p.h, p.errors.err0_u, r.h, r.errors.err0_u);
            r.rate1_u = observed_rate(p.h, p.errors.err1_u, r.h, r.errors.err1_u);
            r.rate0_p = observed_rate(p.h, p.errors.err0_p, r.h, r.errors.err0_p);
            break;
        }
    }
    return records;
}

inline const std::vector<double>& default_alpha_grid()
{
    static const std::vector<double> grid{1e-15, 1e-12, 1e-9, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};
    return grid;
}

struct AlphaRecord {
    BasisKind basis = BasisKind::l2_orthonormal;
    int k = 1;
    double alpha = 1.0;
    std::optional<double> condition; // empty when the evaluation failed
    std::string failure;
};

/// Condition number of the assembled (uncondensed) matrix for every (basis, k, alpha).
inline std::vector<AlphaRecord> run_alpha_sweep(const PolygonalMesh& mesh, const std::vector<int>& k_list,
                                                const std::vector<BasisKind>& bases, const std::vector<double>& alphas,
                                                ConditionMethod method = ConditionMethod::dense_svd,
                                                Eigen::Index dense_limit = default_dense_limit, const StabilizationConfig& base = {},
                                                const std::function<void(const AlphaRecord&)>& progress = {})
{
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0)) throw std::invalid_argument("alpha values must be positive");
        if (i > 0 && !(alphas[i] > alphas[i - 1])) throw std::invalid_argument("alpha values must be sorted ascending");
    }
    std::vector<AlphaRecord> out;
    for (BasisKind basis : bases) {
        for (int k : k_list) {
            std::shared_ptr<const std::vector<LocalElement>> elements;
            std::string setup_failure;
            try {
                elements = std::make_shared<const std::vector<LocalElement>>(build_local_elements(mesh, k, basis));
            } catch (const std::exception& e) {
                setup_failure = e.what();
            }
            for (double alpha : alphas) {
                AlphaRecord rec{basis, k, alpha, std::nullopt, setup_failure};
                if (setup_failure.empty()) {
                    try {
                        StabilizationConfig stab = base;
                        stab.alpha = alpha;
                        AssemblyConfig cfg{k, basis, stab};
                        const GlobalSystem sys = assemble(mesh, cfg, {}, {}, elements);
                        const double kappa = condition_number(sys, method, dense_limit);
                        if (std::isfinite(kappa))
                            rec.condition = kappa;
                        else
                            rec.failure = "matrix is numerically singular";
                    } catch (const std::exception& e) {
                        rec.failure = e.what();
                    }
                }
                out.push_back(rec);
                if (progress) progress(out.back());
            }
        }
    }
    return out;
}

// ---- CSV output (C locale formatting, byte-reproducible) ----

inline std::string csv_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10e", x);
    return buf;
}

inline constexpr std::string_view convergence_csv_header =
    "family,level,k,h,n_dofs,err0_u,err1_u,err0_p,rate0_u,rate1_u,rate0_p,seconds";

/// `timing` false writes 0 in the seconds column so that output is reproducible.
inline void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRecord>& records, bool timing = false)
{
    out << convergence_csv_header << '\n';
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : records) {
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.3f", timing ? r.seconds : 0.0);
        out << to_string(r.family) << ',' << r.level << ',' << r.k << ',' << csv_number(r.ok() ? r.h : nan) << ','
            << (r.ok() ? r.n_dofs : 0) << ',' << csv_number(r.ok() ? r.errors.err0_u : nan) << ','
            << csv_number(r.ok() ? r.errors.err1_u : nan) << ',' << csv_number(r.ok() ? r.errors.err0_p : nan) << ','
            << csv_number(r.rate0_u) << ',' << csv_number(r.rate1_u) << ',' << csv_number(r.rate0_p) << ',' << secs << '\n';
    }
}

inline constexpr std::string_view alpha_csv_header = "basis,k,alpha,cond";

inline void write_alpha_csv(std::ostream& out, const std::vector<AlphaRecord>& records)
{
    out << alpha_csv_header << '\n';
    for (const auto& r : records)
        out << to_string(r.basis) << ',' << r.k << ',' << csv_number(r.alpha) << ','
            << (r.condition ? csv_number(*r.condition) : std::string("missing")) << '\n';
}

} // namespace minivem
