#pragma once

// Element matrices of the discrete Stokes problem.
//
// Local velocity ordering: x-component scalar DOFs, y-component scalar DOFs; bubble
// ordering: x-component bubble DOFs, y-component bubble DOFs. The velocity stiffness has
// no coupling between the two parts.

#include "minivem/vemspace.hpp"

#include <Eigen/Dense>

#include <functional>
#include <tuple>
#include <stdexcept>
#include <string>
#include <string_view>

namespace minivem {

/// Scaling of the pressure dofi-dofi form: `area` multiplies it by |K| so that it is
/// equivalent to the L2 norm squared on each cell, `none` uses the raw DOF products.
enum class PressureScaling { none, area };

inline PressureScaling parse_pressure_scaling(std::string_view s)
{
    if (s == "none" || s == "plain") return PressureScaling::none;
    if (s == "area") return PressureScaling::area;
    throw std::invalid_argument("unknown pressure scaling '" + std::string(s) + "'");
}

inline std::string to_string(PressureScaling s) { return s == PressureScaling::none ? "none" : "area"; }

struct StabilizationConfig {
    double alpha = 1.0;      // pressure stabilization weight
    double beta_sharp = 0.0; // bubble stabilization weight
    PressureScaling pressure_scaling = PressureScaling::area;

    void validate() const
    {
        if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
        if (!(beta_sharp >= 0.0)) throw std::invalid_argument("beta_sharp must be non-negative");
    }
};

struct LocalStokesBlocks {
    Eigen::MatrixXd A_u; // 2n x 2n
    Eigen::MatrixXd A_b; // 2nb x 2nb
    Eigen::MatrixXd B_u; // n x 2n
    Eigen::MatrixXd B_b; // n x 2nb
    Eigen::MatrixXd C_p; // n x n
    Eigen::VectorXd F_u; // 2n
    Eigen::VectorXd F_b; // 2nb
};

namespace detail {

inline Eigen::MatrixXd block_diag2(const Eigen::MatrixXd& m)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * m.rows(), 2 * m.cols());
    out.topLeftCorner(m.rows(), m.cols()) = m;
    out.bottomRightCorner(m.rows(), m.cols()) = m;
    return out;
}

} // namespace detail

/// Image of the scalar DOFs under (I - D Pi): DOFs of the non-polynomial remainder.
inline Eigen::MatrixXd complement_dofs(const LocalElement& el, const Eigen::MatrixXd& projector)
{
    const int n = el.layout.scalar_count();
    return Eigen::MatrixXd::Identity(n, n) - el.ops.dof_matrix * projector;
}

/// Scalar blocks of a_h: consistency via the elliptic projectors plus dofi-dofi stabilization.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> local_a_scalar(const LocalElement& el, const StabilizationConfig& cfg)
{
    const int nk = el.dim_k();
    const Eigen::MatrixXd& pin = el.ops.pinabla_k;
    const Eigen::MatrixXd stab = complement_dofs(el, pin);
    Eigen::MatrixXd a = pin.transpose() * el.gram.stiffness.topLeftCorner(nk, nk) * pin + stab.transpose() * stab;

    const Eigen::MatrixXd& bpin = el.ops.bubble_pinabla;
    Eigen::MatrixXd ab = bpin.transpose() * el.gram.stiffness * bpin;
    if (cfg.beta_sharp > 0.0) {
        // bubble DOFs are all moments against P_k; those of the polynomial Pi b are computed directly
        const int nb = el.layout.n_bubble;
        Eigen::MatrixXd rem = Eigen::MatrixXd::Zero(nk, nb);
        for (int j = 0; j < nb; ++j) rem(el.dim_km2() + j, j) = 1.0;
        rem -= (el.basis.moment_scale() / el.cell.area) * el.gram.mass.topRows(nk) * bpin;
        ab += cfg.beta_sharp * rem.transpose() * rem;
    }
    return {0.5 * (a + a.transpose()), 0.5 * (ab + ab.transpose())};
}

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> local_a(const LocalElement& el, const StabilizationConfig& cfg)
{
    auto [a, ab] = local_a_scalar(el, cfg);
    return {detail::block_diag2(a), detail::block_diag2(ab)};
}

/// b_h^K(v, q) = int_K Pi0 q div v, by parts: -int grad(Pi0 q) . Pi0 v + int_dK (v.n) Pi0 q.
/// Bubbles vanish on the boundary so only the volume term remains for them.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> local_b(const LocalElement& el)
{
    const int nk = el.dim_k();
    const int n = el.layout.scalar_count();
    const int nb = el.layout.n_bubble;
    const Eigen::MatrixXd& z = el.ops.pizero_k;
    const Eigen::MatrixXd mass = el.gram.mass.topLeftCorner(nk, nk);
    const Eigen::MatrixXd bubble_moments = mass * el.ops.bubble_pizero_k;

    Eigen::MatrixXd bu = Eigen::MatrixXd::Zero(n, 2 * n);
    Eigen::MatrixXd bb = Eigen::MatrixXd::Zero(n, 2 * nb);
    for (int c = 0; c < 2; ++c) {
        const Eigen::MatrixXd grad_q = el.basis.derivative_matrix(c).topLeftCorner(nk, nk) * z;
        bu.middleCols(c * n, n) = -grad_q.transpose() * mass * z;
        bb.middleCols(c * nb, nb) = -grad_q.transpose() * bubble_moments;
    }
    for (const auto& tr : el.edges) {
        const Eigen::MatrixXd q_at = el.basis.evaluate(tr.rule.points).leftCols(nk) * z; // gauss x n
        for (std::size_t g = 0; g < tr.rule.size(); ++g) {
            const auto gi = static_cast<Eigen::Index>(g);
            for (int m = 0; m < tr.lagrange.cols(); ++m) {
                const int dof = tr.node_dofs[static_cast<std::size_t>(m)];
                const double wl = tr.rule.weights[g] * tr.lagrange(gi, m);
                bu.col(dof) += wl * tr.normal.x() * q_at.row(gi).transpose();
                bu.col(n + dof) += wl * tr.normal.y() * q_at.row(gi).transpose();
            }
        }
    }
    return {bu, bb};
}

/// Pressure stabilization: dofi-dofi on the DOFs of (I - Pi0_k) q.
inline Eigen::MatrixXd local_c(const LocalElement& el, PressureScaling scaling = PressureScaling::area)
{
    const Eigen::MatrixXd rem = complement_dofs(el, el.ops.pizero_k);
    const double w = scaling == PressureScaling::area ? el.cell.area : 1.0;
    const Eigen::MatrixXd c = w * (rem.transpose() * rem);
    return 0.5 * (c + c.transpose());
}

using VectorFunction = std::function<Eigen::Vector2d(const Point&)>;

/// Load vectors (f, Pi0_k phi_i) for the scalar-space and bubble DOF functions.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> local_rhs(const LocalElement& el, const VectorFunction& f)
{
    const int nk = el.dim_k();
    Eigen::MatrixXd fq = Eigen::MatrixXd::Zero(nk, 2); // int f_c q_a
    for (std::size_t q = 0; q < el.rule.size(); ++q) {
        const Eigen::VectorXd v = el.basis.evaluate_at(el.rule.points[q]).head(nk);
        const Eigen::Vector2d fv = f(el.rule.points[q]);
        fq.col(0) += el.rule.weights[q] * fv.x() * v;
        fq.col(1) += el.rule.weights[q] * fv.y() * v;
    }
    const int n = el.layout.scalar_count();
    const int nb = el.layout.n_bubble;
    Eigen::VectorXd fu(2 * n), fb(2 * nb);
    for (int c = 0; c < 2; ++c) {
        fu.segment(c * n, n) = el.ops.pizero_k.transpose() * fq.col(c);
        fb.segment(c * nb, nb) = el.ops.bubble_pizero_k.transpose() * fq.col(c);
    }
    return {fu, fb};
}

inline LocalStokesBlocks local_stokes_blocks(const LocalElement& el, const StabilizationConfig& cfg, const VectorFunction& f)
{
    LocalStokesBlocks blk;
    std::tie(blk.A_u, blk.A_b) = local_a(el, cfg);
    std::tie(blk.B_u, blk.B_b) = local_b(el);
    blk.C_p = local_c(el, cfg.pressure_scaling);
    if (f)
        std::tie(blk.F_u, blk.F_b) = local_rhs(el, f);
    else {
        blk.F_u = Eigen::VectorXd::Zero(blk.A_u.rows());
        blk.F_b = Eigen::VectorXd::Zero(blk.A_b.rows());
    }
    return blk;
}

} // namespace minivem
