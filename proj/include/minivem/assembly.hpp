#pragma once

// Global numbering, saddle-point assembly, Dirichlet conditions, zero-mean pressure,
// static condensation of bubbles, sparse direct solve and condition numbers.
//
// Unknown ordering: velocity x (N_s scalar DOFs), velocity y (N_s), bubbles (cell-major,
// 2 * n_bubble per cell: x then y), pressure (N_s), one multiplier for the pressure mean.
// The condensed system drops the bubble segment.
//
// Global scalar numbering: vertices, then the k-1 interior points of every edge (ordered
// from its lower to its higher vertex index), then the P_{k-2} moments of every cell.

#include "minivem/geometry.hpp"
#include "minivem/mesh_io.hpp"
#include "minivem/parallel.hpp"
#include "minivem/stokes_local.hpp"
#include "minivem/vemspace.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/UmfPackSupport>
#include <lapacke.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace minivem {

struct GlobalDofMap {
    int k = 1;
    int n_vertices = 0;
    int n_edges = 0;
    int n_cells = 0;
    int n_moment = 0; // per cell
    int n_bubble = 0; // per cell and component
    int scalar_count = 0;
    std::vector<std::vector<int>> cell_scalar; // local scalar DOF -> global scalar DOF
    std::vector<bool> boundary_scalar;          // nodal DOF lying on the domain boundary
    std::vector<Point> scalar_nodes;            // nodal DOF locations (moments: NaN)

    int velocity_count() const { return 2 * scalar_count; }
    int bubble_count() const { return 2 * n_bubble * n_cells; }
    int pressure_count() const { return scalar_count; }
    int edge_dof(int edge, int m) const { return n_vertices + edge * (k - 1) + m; }
    int moment_dof(int cell, int b) const { return n_vertices + n_edges * (k - 1) + cell * n_moment + b; }
};

inline GlobalDofMap build_dof_map(const PolygonalMesh& mesh, int k)
{
    if (k < 1) throw std::invalid_argument("build_dof_map: k must be >= 1");
    GlobalDofMap map;
    map.k = k;
    map.n_vertices = static_cast<int>(mesh.num_vertices());
    map.n_edges = static_cast<int>(mesh.num_edges());
    map.n_cells = static_cast<int>(mesh.num_cells());
    map.n_moment = poly_dim(k - 2);
    map.n_bubble = poly_dim(k) - poly_dim(k - 2);
    map.scalar_count = map.n_vertices + map.n_edges * (k - 1) + map.n_cells * map.n_moment;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    map.scalar_nodes.assign(static_cast<std::size_t>(map.scalar_count), Point(nan, nan));
    map.boundary_scalar.assign(static_cast<std::size_t>(map.scalar_count), false);
    for (int v = 0; v < map.n_vertices; ++v) {
        map.scalar_nodes[static_cast<std::size_t>(v)] = mesh.vertices[static_cast<std::size_t>(v)];
        map.boundary_scalar[static_cast<std::size_t>(v)] = mesh.boundary_vertex_flags[static_cast<std::size_t>(v)];
    }
    const auto interior = gauss_lobatto_interior(k);
    for (int e = 0; e < map.n_edges; ++e) {
        const auto& ed = mesh.edges[static_cast<std::size_t>(e)];
        const Point& a = mesh.vertices[static_cast<std::size_t>(ed[0])];
        const Point& b = mesh.vertices[static_cast<std::size_t>(ed[1])];
        for (int m = 0; m < k - 1; ++m) {
            const auto g = static_cast<std::size_t>(map.edge_dof(e, m));
            map.scalar_nodes[g] = a + interior[static_cast<std::size_t>(m)] * (b - a);
            map.boundary_scalar[g] = mesh.boundary_edge_flags[static_cast<std::size_t>(e)];
        }
    }

    map.cell_scalar.resize(mesh.num_cells());
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const auto& ring = mesh.cells[c];
        const auto nv = ring.size();
        auto& idx = map.cell_scalar[c];
        idx.reserve(nv * static_cast<std::size_t>(k) + static_cast<std::size_t>(map.n_moment));
        for (int v : ring) idx.push_back(v);
        for (std::size_t i = 0; i < nv; ++i) {
            const int e = mesh.cell_edges[c][i];
            const bool forward = ring[i] < ring[(i + 1) % nv];
            for (int m = 0; m < k - 1; ++m) idx.push_back(map.edge_dof(e, forward ? m : k - 2 - m));
        }
        for (int b = 0; b < map.n_moment; ++b) idx.push_back(map.moment_dof(static_cast<int>(c), b));
    }
    return map;
}

struct AssemblyConfig {
    int k = 1;
    BasisKind basis = BasisKind::l2_orthonormal;
    StabilizationConfig stabilization;

    void validate() const
    {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        stabilization.validate();
    }
};

/// Per-cell data needed to eliminate and recover the bubbles.
struct CellBubbleData {
    std::vector<int> pressure_dofs; // global scalar indices of the cell
    Eigen::MatrixXd A_b;
    Eigen::MatrixXd B_b;
    Eigen::VectorXd F_b;
};

struct GlobalSystem {
    AssemblyConfig config;
    bool condensed = false;
    GlobalDofMap dofs;
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    std::vector<int> dirichlet_dofs;       // global velocity indices fixed by boundary data
    Eigen::VectorXd pressure_mean_weights; // int_Omega Pi0 phi_j for every pressure DOF
    std::vector<CellBubbleData> bubbles;
    std::shared_ptr<const std::vector<LocalElement>> elements;

    int bubble_offset() const { return dofs.velocity_count(); }
    int pressure_offset() const { return bubble_offset() + (condensed ? 0 : dofs.bubble_count()); }
    int multiplier_index() const { return pressure_offset() + dofs.pressure_count(); }
    int size() const { return multiplier_index() + 1; }
};

struct SolverDiagnostics {
    Eigen::Index dimension = 0;
    Eigen::Index nonzeros = 0;
    double relative_residual = 0.0;
    int refinement_steps = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

struct Solution {
    int k = 1;
    Eigen::VectorXd velocity; // 2 N_s
    Eigen::VectorXd bubbles;  // 2 n_bubble N_K
    Eigen::VectorXd pressure; // N_s
    double multiplier = 0.0;
    double pressure_mean = 0.0; // int_Omega Pi0 p_h
    SolverDiagnostics diagnostics;
};

inline std::vector<LocalElement> build_local_elements(const PolygonalMesh& mesh, int k, BasisKind basis)
{
    std::vector<LocalElement> elements(mesh.num_cells());
    parallel_for(mesh.num_cells(), [&](std::size_t c) {
        try {
            elements[c] = build_local_element(mesh.cell_geometry(c), k, basis);
        } catch (const NumericalError& e) {
            throw NumericalError("cell " + std::to_string(c) + ": " + e.what());
        }
    });
    return elements;
}

/// Assembles the uncondensed system. Dirichlet velocity DOFs keep identity rows with the
/// boundary values on the right-hand side; their columns are moved to the right-hand side.
inline GlobalSystem assemble(const PolygonalMesh& mesh, const AssemblyConfig& config, const VectorFunction& f,
                             const VectorFunction& g = {},
                             std::shared_ptr<const std::vector<LocalElement>> elements = nullptr)
{
    config.validate();
    GlobalSystem sys;
    sys.config = config;
    sys.dofs = build_dof_map(mesh, config.k);
    if (!elements) elements = std::make_shared<const std::vector<LocalElement>>(build_local_elements(mesh, config.k, config.basis));
    if (elements->size() != mesh.num_cells() || (!elements->empty() && elements->front().k != config.k))
        throw std::invalid_argument("assemble: local elements do not match the mesh or k");
    sys.elements = elements;

    const GlobalDofMap& dm = sys.dofs;
    const int ns = dm.scalar_count;
    const int n_total = sys.size();

    std::vector<LocalStokesBlocks> blocks(mesh.num_cells());
    parallel_for(mesh.num_cells(), [&](std::size_t c) { blocks[c] = local_stokes_blocks((*elements)[c], config.stabilization, f); });

    std::vector<bool> fixed(static_cast<std::size_t>(n_total), false);
    Eigen::VectorXd fixed_value = Eigen::VectorXd::Zero(n_total);
    for (int s = 0; s < ns; ++s) {
        if (!dm.boundary_scalar[static_cast<std::size_t>(s)]) continue;
        const Point& x = dm.scalar_nodes[static_cast<std::size_t>(s)];
        const Eigen::Vector2d gv = g ? g(x) : Eigen::Vector2d::Zero();
        if (!gv.allFinite()) throw std::invalid_argument("assemble: boundary data is not finite at a boundary node");
        for (int comp = 0; comp < 2; ++comp) {
            fixed[static_cast<std::size_t>(comp * ns + s)] = true;
            fixed_value(comp * ns + s) = gv(comp);
            sys.dirichlet_dofs.push_back(comp * ns + s);
        }
    }
    std::sort(sys.dirichlet_dofs.begin(), sys.dirichlet_dofs.end());

    sys.rhs = Eigen::VectorXd::Zero(n_total);
    std::vector<Eigen::Triplet<double>> trips;
    auto add = [&](int r, int c, double v) {
        if (v == 0.0 || fixed[static_cast<std::size_t>(r)]) return;
        if (fixed[static_cast<std::size_t>(c)]) {
            sys.rhs(r) -= v * fixed_value(c);
            return;
        }
        trips.emplace_back(r, c, v);
    };

    const int po = sys.pressure_offset();
    const int lam = sys.multiplier_index();
    const double alpha = config.stabilization.alpha;
    sys.pressure_mean_weights = Eigen::VectorXd::Zero(ns);
    sys.bubbles.resize(mesh.num_cells());

    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
        const LocalElement& el = (*elements)[c];
        const LocalStokesBlocks& blk = blocks[c];
        const auto& scal = dm.cell_scalar[c];
        const int n = static_cast<int>(scal.size());
        const int nb2 = 2 * dm.n_bubble;
        auto vel = [&](int i) { return (i / n) * ns + scal[static_cast<std::size_t>(i % n)]; };
        auto bub = [&](int j) { return sys.bubble_offset() + static_cast<int>(c) * nb2 + j; };
        auto prs = [&](int i) { return po + scal[static_cast<std::size_t>(i)]; };

        for (int i = 0; i < 2 * n; ++i) {
            for (int j = 0; j < 2 * n; ++j) add(vel(i), vel(j), blk.A_u(i, j));
            for (int q = 0; q < n; ++q) add(vel(i), prs(q), -blk.B_u(q, i));
            if (!fixed[static_cast<std::size_t>(vel(i))]) sys.rhs(vel(i)) += blk.F_u(i);
        }
        for (int i = 0; i < nb2; ++i) {
            for (int j = 0; j < nb2; ++j) add(bub(i), bub(j), blk.A_b(i, j));
            for (int q = 0; q < n; ++q) add(bub(i), prs(q), -blk.B_b(q, i));
            sys.rhs(bub(i)) += blk.F_b(i);
        }
        for (int q = 0; q < n; ++q) {
            for (int j = 0; j < 2 * n; ++j) add(prs(q), vel(j), blk.B_u(q, j));
            for (int j = 0; j < nb2; ++j) add(prs(q), bub(j), blk.B_b(q, j));
            for (int r = 0; r < n; ++r) add(prs(q), prs(r), alpha * blk.C_p(q, r));
        }
        const int nk = el.dim_k();
        const Eigen::VectorXd m = el.ops.pizero_k.transpose() * el.gram.integrals.head(nk);
        for (int q = 0; q < n; ++q) sys.pressure_mean_weights(scal[static_cast<std::size_t>(q)]) += m(q);

        CellBubbleData& bd = sys.bubbles[c];
        bd.pressure_dofs = scal;
        bd.A_b = blk.A_b;
        bd.B_b = blk.B_b;
        bd.F_b = blk.F_b;
    }
    for (int s = 0; s < ns; ++s) {
        const double w = sys.pressure_mean_weights(s);
        add(lam, po + s, w);
        add(po + s, lam, w);
    }
    for (int d : sys.dirichlet_dofs) {
        trips.emplace_back(d, d, 1.0);
        sys.rhs(d) = fixed_value(d);
    }
    sys.matrix.resize(n_total, n_total);
    sys.matrix.setFromTriplets(trips.begin(), trips.end());
    sys.matrix.makeCompressed();
    return sys;
}

/// Eliminates the bubbles cell by cell: the pressure block gains B_b A_b^-1 B_b^T and the
/// pressure right-hand side gains -B_b A_b^-1 F_b.
inline GlobalSystem condense(const GlobalSystem& sys)
{
    if (sys.condensed) throw std::invalid_argument("condense: system is already condensed");
    GlobalSystem out;
    out.config = sys.config;
    out.condensed = true;
    out.dofs = sys.dofs;
    out.dirichlet_dofs = sys.dirichlet_dofs;
    out.pressure_mean_weights = sys.pressure_mean_weights;
    out.bubbles = sys.bubbles;
    out.elements = sys.elements;

    const int bo = sys.bubble_offset();
    const int nbub = sys.dofs.bubble_count();
    auto remap = [&](int i) { return i < bo ? i : (i < bo + nbub ? -1 : i - nbub); };

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(sys.matrix.nonZeros()));
    for (int col = 0; col < sys.matrix.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.matrix, col); it; ++it) {
            const int r = remap(static_cast<int>(it.row()));
            const int c = remap(static_cast<int>(it.col()));
            if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
        }
    out.rhs.resize(out.size());
    for (int i = 0; i < sys.size(); ++i)
        if (remap(i) >= 0) out.rhs(remap(i)) = sys.rhs(i);

    const int po = out.pressure_offset();
    for (std::size_t c = 0; c < sys.bubbles.size(); ++c) {
        const CellBubbleData& bd = sys.bubbles[c];
        Eigen::LDLT<Eigen::MatrixXd> ldlt(bd.A_b);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
            throw NumericalError("condense: bubble stiffness of cell " + std::to_string(c) + " is not positive definite");
        const Eigen::MatrixXd s = bd.B_b * ldlt.solve(bd.B_b.transpose());
        const Eigen::VectorXd r = bd.B_b * ldlt.solve(bd.F_b);
        const auto n = bd.pressure_dofs.size();
        for (std::size_t i = 0; i < n; ++i) {
            out.rhs(po + bd.pressure_dofs[i]) -= r(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < n; ++j)
                trips.emplace_back(po + bd.pressure_dofs[i], po + bd.pressure_dofs[j], s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    }
    out.matrix.resize(out.size(), out.size());
    out.matrix.setFromTriplets(trips.begin(), trips.end());
    out.matrix.makeCompressed();
    return out;
}

/// Bubble DOFs from the pressure: b = A_b^-1 (F_b + B_b^T p) on each cell.
inline Eigen::VectorXd recover_bubbles(const GlobalSystem& sys, const Eigen::VectorXd& pressure)
{
    const int nb2 = 2 * sys.dofs.n_bubble;
    Eigen::VectorXd b(sys.dofs.bubble_count());
    for (std::size_t c = 0; c < sys.bubbles.size(); ++c) {
        const CellBubbleData& bd = sys.bubbles[c];
        Eigen::VectorXd pc(static_cast<Eigen::Index>(bd.pressure_dofs.size()));
        for (std::size_t i = 0; i < bd.pressure_dofs.size(); ++i) pc(static_cast<Eigen::Index>(i)) = pressure(bd.pressure_dofs[i]);
        b.segment(static_cast<Eigen::Index>(c) * nb2, nb2) = bd.A_b.ldlt().solve(bd.F_b + bd.B_b.transpose() * pc);
    }
    return b;
}

struct SolveOptions {
    double tolerance = 1e-10;
    int max_refinement = 5;
};

inline std::string matrix_stats(const Eigen::SparseMatrix<double>& m)
{
    return "n=" + std::to_string(m.rows()) + ", nnz=" + std::to_string(m.nonZeros());
}

using SparseLUSolver = Eigen::UmfPackLU<Eigen::SparseMatrix<double>>;

/// Sparse LU (UMFPACK) with iterative refinement. Throws NumericalError if the
/// factorization fails; a residual above tolerance is reported as a warning.
inline Solution solve(const GlobalSystem& sys, const SolveOptions& opt = {})
{
    SparseLUSolver lu;
    lu.compute(sys.matrix);
    if (lu.info() != Eigen::Success)
        throw NumericalError("solve: sparse LU factorization failed (" + matrix_stats(sys.matrix) + ")");

    Solution sol;
    sol.k = sys.config.k;
    SolverDiagnostics& diag = sol.diagnostics;
    diag.dimension = sys.matrix.rows();
    diag.nonzeros = sys.matrix.nonZeros();

    const double bnorm = sys.rhs.norm();
    Eigen::VectorXd x = lu.solve(sys.rhs);
    Eigen::VectorXd r = sys.rhs - sys.matrix * x;
    const double scale = bnorm > 0.0 ? bnorm : 1.0;
    double rel = r.norm() / scale;
    while (rel > opt.tolerance && diag.refinement_steps < opt.max_refinement && std::isfinite(rel)) {
        const Eigen::VectorXd xn = x + lu.solve(r);
        const Eigen::VectorXd rn = sys.rhs - sys.matrix * xn;
        ++diag.refinement_steps;
        if (!(rn.norm() / scale < rel)) break;
        x = xn;
        r = rn;
        rel = r.norm() / scale;
    }
    diag.relative_residual = rel;
    diag.converged = std::isfinite(rel) && rel <= opt.tolerance && x.allFinite();
    if (!x.allFinite())
        diag.warnings.push_back("solution contains non-finite values (" + matrix_stats(sys.matrix) + ")");
    else if (!diag.converged)
        diag.warnings.push_back("relative residual " + format_double(rel) + " above tolerance " + format_double(opt.tolerance));

    const int ns = sys.dofs.scalar_count;
    sol.velocity = x.head(2 * ns);
    sol.pressure = x.segment(sys.pressure_offset(), ns);
    sol.multiplier = x(sys.multiplier_index());
    sol.bubbles = sys.condensed ? recover_bubbles(sys, sol.pressure) : Eigen::VectorXd(x.segment(sys.bubble_offset(), sys.dofs.bubble_count()));
    sol.pressure_mean = sys.pressure_mean_weights.dot(sol.pressure);
    return sol;
}

enum class ConditionMethod { dense_svd, norm_estimate };

inline constexpr Eigen::Index default_dense_limit = 6000;

/// 2-norm condition number of a dense matrix. If `row_signs` makes diag(row_signs) * M
/// symmetric, the singular values are the absolute eigenvalues of that symmetric matrix.
inline double dense_condition(Eigen::MatrixXd m, const Eigen::VectorXd& row_signs = {})
{
    const auto n = m.rows();
    if (n != m.cols()) throw std::invalid_argument("condition number: matrix must be square");
    if (n == 0) throw std::invalid_argument("condition number: empty matrix");
    if (row_signs.size() == n) m = row_signs.asDiagonal() * m;
    const double mnorm = m.cwiseAbs().maxCoeff();
    const bool symmetric = (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * mnorm;
    Eigen::VectorXd s(n);
    lapack_int info = 0;
    if (symmetric) {
        info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', static_cast<lapack_int>(n), m.data(), static_cast<lapack_int>(n), s.data());
        s = s.cwiseAbs();
    } else {
        info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(n), static_cast<lapack_int>(n), m.data(),
                              static_cast<lapack_int>(n), s.data(), nullptr, 1, nullptr, 1);
    }
    if (info != 0) throw NumericalError("condition number: LAPACK failed with info " + std::to_string(info));
    const double smin = s.minCoeff();
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s.maxCoeff() / smin;
}

/// 1-norm condition estimate ||M||_1 * est(||M^-1||_1) (Hager-Higham estimator on LU solves).
inline double estimated_condition(const Eigen::SparseMatrix<double>& m)
{
    const auto n = m.rows();
    SparseLUSolver lu(m);
    const Eigen::SparseMatrix<double> mt = m.transpose();
    SparseLUSolver lut(mt);
    if (lu.info() != Eigen::Success || lut.info() != Eigen::Success) return std::numeric_limits<double>::infinity();

    double anorm = 0.0;
    for (int c = 0; c < m.outerSize(); ++c) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) s += std::abs(it.value());
        anorm = std::max(anorm, s);
    }
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double est = 0.0;
    Eigen::Index last = -1;
    for (int iter = 0; iter < 5; ++iter) {
        const Eigen::VectorXd y = lu.solve(x);
        const double ynorm = y.lpNorm<1>();
        if (iter > 0 && ynorm <= est) break;
        est = ynorm;
        const Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
        const Eigen::VectorXd z = lut.solve(xi);
        Eigen::Index j = 0;
        z.cwiseAbs().maxCoeff(&j);
        if (iter > 0 && (j == last || std::abs(z(j)) <= z.dot(x))) break;
        last = j;
        x = Eigen::VectorXd::Unit(n, j);
    }
    Eigen::VectorXd alt(n);
    for (Eigen::Index i = 0; i < n; ++i)
        alt(i) = (i % 2 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)));
    est = std::max(est, 2.0 * lu.solve(alt).lpNorm<1>() / (3.0 * static_cast<double>(n)));
    return anorm * est;
}

inline double condition_number(const Eigen::SparseMatrix<double>& m, ConditionMethod method,
                               Eigen::Index dense_limit = default_dense_limit, const Eigen::VectorXd& row_signs = {})
{
    if (method == ConditionMethod::norm_estimate) return estimated_condition(m);
    if (m.rows() > dense_limit)
        throw std::invalid_argument("condition number: dimension " + std::to_string(m.rows()) +
                                    " exceeds the dense limit " + std::to_string(dense_limit));
    return dense_condition(Eigen::MatrixXd(m), row_signs);
}

/// Condition number of the full assembled matrix, multiplier row included.
inline double condition_number(const GlobalSystem& sys, ConditionMethod method, Eigen::Index dense_limit = default_dense_limit)
{
    Eigen::VectorXd signs = Eigen::VectorXd::Ones(sys.size());
    signs.tail(sys.size() - sys.pressure_offset()).setConstant(-1.0);
    return condition_number(sys.matrix, method, dense_limit, signs);
}

inline void write_matrix_market(const Eigen::SparseMatrix<double>& m, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (int c = 0; c < m.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it)
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
}

} // namespace minivem
