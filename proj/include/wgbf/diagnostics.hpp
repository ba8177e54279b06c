#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "wgbf/assembly.hpp"

namespace wgbf {

using TimeScalarField = std::function<double(const Vec2&, double)>;
using TimeMatrixField = std::function<Eigen::Matrix2d(const Vec2&, double)>;

/// L2 norm of the interior velocity. The interior bases are orthonormal
/// per cell, so this is the Euclidean norm of the interior coefficients.
inline double interior_velocity_l2(const DofMap& dof, const FieldState& s) {
  return s.x.head(dof.n_ui).norm();
}

namespace detail {

inline void component_dofs(const CellOps& op, const DofMap& dof, const Eigen::VectorXd& x, int c,
                           int comp, Eigen::VectorXd& loc) {
  loc.resize(op.n_vloc);
  for (int i = 0; i < dof.dim_vel; ++i) loc[i] = x[dof.u_interior(c, comp, i)];
  for (int le = 0; le < 3; ++le) {
    const int e = op.geom.edge_index[le];
    for (int k = 0; k < dof.dim_edge; ++k)
      loc[dof.dim_vel + le * dof.dim_edge + k] = x[dof.u_trace(e, comp, k)];
  }
}

}  // namespace detail

/// Discrete energy norm |||v|||_V: weak-gradient seminorm plus the scaled
/// interior/trace mismatch on element boundaries.
inline double energy_norm(const Mesh& mesh, const LocalOperatorCache& cache, const DofMap& dof,
                          const FieldState& s) {
  double acc = 0.0;
  Eigen::VectorXd loc;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const double eta = 1.0 / op.geom.diameter;
    for (int comp = 0; comp < 2; ++comp) {
      detail::component_dofs(op, dof, s.x, c, comp, loc);
      acc += (op.Gv * loc).squaredNorm();
      for (int le = 0; le < 3; ++le) {
        const Eigen::VectorXd vi = op.vel_edge[le] * loc.head(dof.dim_vel);
        const Eigen::VectorXd vb =
            op.psi_edge[le] * loc.segment(dof.dim_vel + le * dof.dim_edge, dof.dim_edge);
        acc += eta * (op.ew[le].array() * (vi - vb).array().square()).sum();
      }
    }
  }
  return std::sqrt(acc);
}

/// Pressure norm |||q|||_Q: interior L2 part plus h-weighted weak gradient.
inline double pressure_q_norm(const Mesh& mesh, const LocalOperatorCache& cache, const DofMap& dof,
                              const FieldState& s) {
  double acc = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    Eigen::VectorXd loc(op.n_ploc);
    for (int i = 0; i < dof.dim_pre; ++i) loc[i] = s.x[dof.p_interior(c, i)];
    for (int le = 0; le < 3; ++le) {
      const int e = op.geom.edge_index[le];
      for (int k = 0; k < dof.dim_edge; ++k)
        loc[dof.dim_pre + le * dof.dim_edge + k] = s.x[dof.p_trace(e, k)];
    }
    acc += loc.head(dof.dim_pre).squaredNorm();
    acc += op.geom.diameter * op.geom.diameter * (op.Gp * loc).squaredNorm();
  }
  return std::sqrt(acc);
}

struct DivergenceReport {
  double div_sup = 0.0;          // max |div u_hi| over cell quadrature nodes
  double max_normal_jump = 0.0;  // max |[u_hi . n_e]| over interior-edge nodes
};

/// Pointwise divergence and normal-jump check on the raw piecewise
/// polynomial velocity.
inline DivergenceReport divergence_check(const Mesh& mesh, const LocalOperatorCache& cache,
                                         const DofMap& dof, const FieldState& s) {
  DivergenceReport rep;
  std::vector<Eigen::VectorXd> normal_trace(mesh.n_edges());

  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    Eigen::VectorXd cx(dof.dim_vel), cy(dof.dim_vel);
    for (int i = 0; i < dof.dim_vel; ++i) {
      cx[i] = s.x[dof.u_interior(c, 0, i)];
      cy[i] = s.x[dof.u_interior(c, 1, i)];
    }
    const Eigen::VectorXd div = op.vel_gx * cx + op.vel_gy * cy;
    rep.div_sup = std::max(rep.div_sup, div.cwiseAbs().maxCoeff());

    for (int le = 0; le < 3; ++le) {
      const int e = op.geom.edge_index[le];
      if (mesh.edge_on_boundary[e]) continue;
      // both incident cells sample the same canonical edge nodes
      const Eigen::VectorXd un = op.geom.edge_normal[le].x() * (op.vel_edge[le] * cx) +
                                 op.geom.edge_normal[le].y() * (op.vel_edge[le] * cy);
      if (normal_trace[e].size() == 0) {
        normal_trace[e] = un;
      } else {
        rep.max_normal_jump =
            std::max(rep.max_normal_jump, (normal_trace[e] - un).cwiseAbs().maxCoeff());
      }
    }
  }
  return rep;
}

/// Final-time error measures against a known exact solution.
struct ErrorReport {
  double rel_l2_velocity = 0.0;
  double rel_h1_velocity = 0.0;    // broken H1 seminorm of the interior velocity
  double rel_grad_velocity = 0.0;  // weak-gradient error, same normalization
  double rel_l2_pressure = 0.0;
  double abs_l2_velocity = 0.0;
  double abs_h1_velocity = 0.0;
  double abs_grad_velocity = 0.0;
  double abs_l2_pressure = 0.0;
  double div_sup = 0.0;
  double energy_norm = 0.0;
  double pressure_q_norm = 0.0;
  bool degenerate_exact = false;  // exact norms vanish; relative = absolute
};

inline ErrorReport errors_vs_exact(const Mesh& mesh, const LocalOperatorCache& cache,
                                   const DofMap& dof, const FieldState& s,
                                   const TimeVectorField& exact_u, const TimeMatrixField& exact_gu,
                                   const TimeScalarField& exact_p, double t, int quad_boost = 4) {
  const int deg = std::min(cache.quad_degree + quad_boost, kMaxQuadDegree);
  const auto rule = triangle_quadrature(deg);

  double e_u2 = 0.0, e_gu2 = 0.0, e_wg2 = 0.0, e_p2 = 0.0;
  double n_u2 = 0.0, n_gu2 = 0.0, n_p2 = 0.0;
  PointList pts;
  Eigen::VectorXd w, loc;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    map_to_cell(op.geom.v, rule, pts, w);
    const MatrixXd phi = op.vel.values(pts);
    MatrixXd gx, gy;
    op.vel.gradients(pts, gx, gy);
    const MatrixXd psi = op.pre.values(pts);
    const MatrixXd chi = op.wg.values(pts);
    const int nt = op.wg.dim();

    Eigen::VectorXd cx(dof.dim_vel), cy(dof.dim_vel), cp(dof.dim_pre);
    for (int i = 0; i < dof.dim_vel; ++i) {
      cx[i] = s.x[dof.u_interior(c, 0, i)];
      cy[i] = s.x[dof.u_interior(c, 1, i)];
    }
    for (int i = 0; i < dof.dim_pre; ++i) cp[i] = s.x[dof.p_interior(c, i)];

    const Eigen::VectorXd ux = phi * cx, uy = phi * cy;
    const Eigen::VectorXd uxx = gx * cx, uxy = gy * cx, uyx = gx * cy, uyy = gy * cy;
    const Eigen::VectorXd ph = psi * cp;

    // weak gradient of each velocity component at the boosted nodes
    detail::component_dofs(op, dof, s.x, c, 0, loc);
    Eigen::VectorXd wg = op.Gv * loc;
    const Eigen::VectorXd wxx = chi * wg.head(nt), wxy = chi * wg.tail(nt);
    detail::component_dofs(op, dof, s.x, c, 1, loc);
    wg = op.Gv * loc;
    const Eigen::VectorXd wyx = chi * wg.head(nt), wyy = chi * wg.tail(nt);

    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 p = pts.row(q).transpose();
      const Vec2 ue = exact_u(p, t);
      const Eigen::Matrix2d ge = exact_gu(p, t);
      const double pe = exact_p(p, t);
      e_u2 += w[q] * ((ue.x() - ux[q]) * (ue.x() - ux[q]) + (ue.y() - uy[q]) * (ue.y() - uy[q]));
      e_gu2 += w[q] * ((ge(0, 0) - uxx[q]) * (ge(0, 0) - uxx[q]) +
                       (ge(0, 1) - uxy[q]) * (ge(0, 1) - uxy[q]) +
                       (ge(1, 0) - uyx[q]) * (ge(1, 0) - uyx[q]) +
                       (ge(1, 1) - uyy[q]) * (ge(1, 1) - uyy[q]));
      e_wg2 += w[q] * ((ge(0, 0) - wxx[q]) * (ge(0, 0) - wxx[q]) +
                       (ge(0, 1) - wxy[q]) * (ge(0, 1) - wxy[q]) +
                       (ge(1, 0) - wyx[q]) * (ge(1, 0) - wyx[q]) +
                       (ge(1, 1) - wyy[q]) * (ge(1, 1) - wyy[q]));
      e_p2 += w[q] * (pe - ph[q]) * (pe - ph[q]);
      n_u2 += w[q] * ue.squaredNorm();
      n_gu2 += w[q] * ge.squaredNorm();
      n_p2 += w[q] * pe * pe;
    }
  }

  ErrorReport rep;
  rep.abs_l2_velocity = std::sqrt(e_u2);
  rep.abs_h1_velocity = std::sqrt(e_gu2);
  rep.abs_grad_velocity = std::sqrt(e_wg2);
  rep.abs_l2_pressure = std::sqrt(e_p2);
  rep.degenerate_exact = n_u2 < 1e-28 || n_gu2 < 1e-28 || n_p2 < 1e-28;
  rep.rel_l2_velocity = rep.degenerate_exact ? rep.abs_l2_velocity : std::sqrt(e_u2 / n_u2);
  rep.rel_h1_velocity = rep.degenerate_exact ? rep.abs_h1_velocity : std::sqrt(e_gu2 / n_gu2);
  rep.rel_grad_velocity = rep.degenerate_exact ? rep.abs_grad_velocity : std::sqrt(e_wg2 / n_gu2);
  rep.rel_l2_pressure = rep.degenerate_exact ? rep.abs_l2_pressure : std::sqrt(e_p2 / n_p2);
  rep.div_sup = divergence_check(mesh, cache, dof, s).div_sup;
  rep.energy_norm = energy_norm(mesh, cache, dof, s);
  rep.pressure_q_norm = pressure_q_norm(mesh, cache, dof, s);
  return rep;
}

/// Observed orders from a refinement history (h strictly decreasing).
inline std::vector<double> convergence_rates(const std::vector<double>& h,
                                             const std::vector<double>& e) {
  if (h.size() != e.size()) throw std::invalid_argument("convergence_rates: length mismatch");
  if (h.size() < 2) throw std::invalid_argument("convergence_rates: need at least two entries");
  std::vector<double> rates;
  for (size_t i = 1; i < h.size(); ++i) {
    if (!(h[i] < h[i - 1])) throw std::invalid_argument("convergence_rates: h must decrease");
    rates.push_back(std::log(e[i - 1] / e[i]) / std::log(h[i - 1] / h[i]));
  }
  return rates;
}

struct StabilityReport {
  bool monotone = true;
  int first_violation = -1;
  double max_growth = 0.0;  // largest ||u^k|| / ||u^{k-1}||
};

/// With f = 0 and homogeneous data the discrete L2 energy must not grow.
inline StabilityReport stability_monitor(const std::vector<double>& l2_history,
                                         double tol = 1e-12) {
  StabilityReport rep;
  for (size_t k = 1; k < l2_history.size(); ++k) {
    const double prev = l2_history[k - 1];
    if (prev > 0.0) rep.max_growth = std::max(rep.max_growth, l2_history[k] / prev);
    if (l2_history[k] > prev * (1.0 + tol) + tol) {
      rep.monotone = false;
      if (rep.first_violation < 0) rep.first_violation = static_cast<int>(k);
    }
  }
  return rep;
}

/// Discrete inf-sup constant of b_h with respect to the |||.|||_V and
/// |||.|||_Q Gram matrices, by dense generalized SVD. Diagnostic only;
/// intended for small meshes. The constant pressure pair spans the kernel
/// of B, so the smallest singular value above `drop_tol` (relative to the
/// largest) is reported.
inline double inf_sup_constant(const Mesh& mesh, const LocalOperatorCache& cache,
                               const DofMap& dof, const SystemBlocks& blocks,
                               const Reduction& red, double drop_tol = 1e-10) {
  // Gram of |||.|||_V on reduced velocity DOFs: A / nu
  const int nvel = dof.n_velocity();
  std::vector<int> vred, pred;
  for (int i = 0; i < nvel; ++i)
    if (red.to_reduced[i] >= 0) vred.push_back(i);
  const int nv = static_cast<int>(vred.size()), np = dof.n_pressure();

  MatrixXd sv = MatrixXd::Zero(nv, nv);
  for (int k = 0; k < blocks.A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(blocks.A, k); it; ++it) {
      const int r = red.to_reduced[it.row()], c = red.to_reduced[it.col()];
      if (r >= 0 && c >= 0) sv(r, c) = it.value() / blocks.nu;
    }

  // Gram of |||.|||_Q over all pressure DOFs
  MatrixXd sq = MatrixXd::Zero(np, np);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const double h2 = op.geom.diameter * op.geom.diameter;
    const MatrixXd gg = h2 * op.Gp.transpose() * op.Gp;
    for (int i = 0; i < op.n_ploc; ++i) {
      const int gi = op.pmap[i] - dof.pressure_offset();
      for (int j = 0; j < op.n_ploc; ++j)
        sq(gi, op.pmap[j] - dof.pressure_offset()) += gg(i, j);
      if (i < dof.dim_pre) sq(gi, gi) += 1.0;  // orthonormal interior block
    }
  }

  MatrixXd b = MatrixXd::Zero(nv, np);
  for (int k = 0; k < blocks.B.outerSize(); ++k)
    for (SparseMat::InnerIterator it(blocks.B, k); it; ++it) {
      const int r = red.to_reduced[it.row()];
      if (r >= 0) b(r, it.col()) = it.value();
    }

  const Eigen::LLT<MatrixXd> lv(sv);
  const Eigen::LLT<MatrixXd> lq(sq);
  if (lv.info() != Eigen::Success || lq.info() != Eigen::Success)
    throw std::runtime_error("inf_sup_constant: Gram factorization failed");
  // singular values of Lv^{-1} B Lq^{-T}
  MatrixXd t = lv.matrixL().solve(b);
  t = lq.matrixL().solve(t.transpose()).transpose();
  Eigen::JacobiSVD<MatrixXd> svd(t);
  const auto& sig = svd.singularValues();
  const double top = sig[0];
  double smallest = top;
  for (int i = 0; i < sig.size(); ++i)
    if (sig[i] > drop_tol * top) smallest = sig[i];
  return smallest;
}

}  // namespace wgbf
