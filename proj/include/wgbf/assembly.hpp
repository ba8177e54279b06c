#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "wgbf/cache.hpp"

namespace wgbf {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using TimeVectorField = std::function<Vec2(const Vec2&, double)>;

namespace detail {

/// Interior velocity values of a state at the volume quadrature nodes.
inline void state_at_volume_nodes(const CellOps& op, const DofMap& dof, const Eigen::VectorXd& x,
                                  int c, Eigen::VectorXd& ux, Eigen::VectorXd& uy) {
  Eigen::VectorXd cx(dof.dim_vel), cy(dof.dim_vel);
  for (int i = 0; i < dof.dim_vel; ++i) {
    cx[i] = x[dof.u_interior(c, 0, i)];
    cy[i] = x[dof.u_interior(c, 1, i)];
  }
  ux = op.vel_val * cx;
  uy = op.vel_val * cy;
}

/// One velocity component of a_h on one cell, DOFs ordered
/// [interior | edge0 | edge1 | edge2]: weak-gradient energy plus the
/// h_K^{-1} penalty on the interior/trace mismatch.
inline MatrixXd local_stiffness(const CellOps& op, const DofMap& dof, double nu) {
  const int nv = dof.dim_vel, ne = dof.dim_edge;
  MatrixXd aloc = op.Gv.transpose() * op.Gv;
  const double eta = 1.0 / op.geom.diameter;
  for (int le = 0; le < 3; ++le) {
    const int bo = nv + le * ne;
    aloc.block(0, 0, nv, nv) += eta * op.stab_ii[le];
    aloc.block(0, bo, nv, ne) -= eta * op.stab_ib[le];
    aloc.block(bo, 0, ne, nv) -= eta * op.stab_ib[le].transpose();
    aloc.block(bo, bo, ne, ne) += eta * op.stab_bb[le];
  }
  return nu * aloc;
}

inline MatrixXd local_mass(const CellOps& op) {
  return op.vel_val.transpose() * op.qw.asDiagonal() * op.vel_val;
}

/// One component of c_h on one cell: the |kappa|^{r-2}-weighted mass.
inline MatrixXd local_damping(const CellOps& op, const DofMap& dof, const Eigen::VectorXd& kappa,
                              int c, double alpha, double r) {
  Eigen::VectorXd kx, ky;
  state_at_volume_nodes(op, dof, kappa, c, kx, ky);
  const double expo = (r - 2.0) / 2.0;
  Eigen::VectorXd wgt(op.qw.size());
  for (int q = 0; q < op.qw.size(); ++q)
    wgt[q] = alpha * op.qw[q] * std::pow(kx[q] * kx[q] + ky[q] * ky[q], expo);
  return op.vel_val.transpose() * wgt.asDiagonal() * op.vel_val;
}

/// E[b, a] realizes (weak div of {u_a kappa_hi, u_a kappa_hb}, v_b)_K for
/// one velocity component, by taking the test polynomial itself in the
/// weak-divergence defining identity. d_h is (E - E^T)/2 placed at
/// (interior test, any trial).
inline MatrixXd local_convection(const CellOps& op, const DofMap& dof, const Eigen::VectorXd& kappa,
                                 int c) {
  const int nv = dof.dim_vel, ne = dof.dim_edge;
  Eigen::VectorXd kx, ky;
  state_at_volume_nodes(op, dof, kappa, c, kx, ky);

  MatrixXd eloc(nv, op.n_vloc);
  MatrixXd conv(op.qw.size(), nv);
  for (int q = 0; q < op.qw.size(); ++q)
    for (int b = 0; b < nv; ++b)
      conv(q, b) = op.qw[q] * (kx[q] * op.vel_gx(q, b) + ky[q] * op.vel_gy(q, b));
  eloc.block(0, 0, nv, nv) = -conv.transpose() * op.vel_val;

  for (int le = 0; le < 3; ++le) {
    const int e = op.geom.edge_index[le];
    Eigen::VectorXd kbx(ne), kby(ne);
    for (int k = 0; k < ne; ++k) {
      kbx[k] = kappa[dof.u_trace(e, 0, k)];
      kby[k] = kappa[dof.u_trace(e, 1, k)];
    }
    const Eigen::VectorXd kn = op.geom.edge_sign[le] *
                               (op.geom.edge_normal[le].x() * (op.psi_edge[le] * kbx) +
                                op.geom.edge_normal[le].y() * (op.psi_edge[le] * kby));
    const Eigen::VectorXd w = op.ew[le].cwiseProduct(kn);
    eloc.block(0, nv + le * ne, nv, ne) =
        op.vel_edge[le].transpose() * w.asDiagonal() * op.psi_edge[le];
  }
  return eloc;
}

}  // namespace detail

/// Matrices of the time-independent forms over the velocity/pressure DOF
/// blocks. A is symmetric, M is SPD on the interior block, B couples the
/// interior velocity to both pressure blocks through the pressure weak
/// gradient, and mean_row integrates the interior pressure.
struct SystemBlocks {
  SparseMat M;               // n_vel x n_vel
  SparseMat A;               // n_vel x n_vel
  SparseMat B;               // n_vel x n_pre
  Eigen::VectorXd mean_row;  // length n_pre, zero outside interior entries
  double nu = 1.0;
};

inline SystemBlocks assemble_constant_blocks(const Mesh& mesh, const LocalOperatorCache& cache,
                                             const DofMap& dof, double nu) {
  const int nvel = dof.n_velocity();
  std::vector<Triplet> tm, ta, tb;
  SystemBlocks out;
  out.nu = nu;
  out.mean_row = Eigen::VectorXd::Zero(dof.n_pressure());

  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const int nv = dof.dim_vel;
    const MatrixXd aloc = detail::local_stiffness(op, dof, nu);
    const MatrixXd mloc = detail::local_mass(op);

    for (int comp = 0; comp < 2; ++comp) {
      const auto& vm = op.vmap[comp];
      for (int i = 0; i < op.n_vloc; ++i)
        for (int j = 0; j < op.n_vloc; ++j) ta.emplace_back(vm[i], vm[j], aloc(i, j));
      for (int i = 0; i < nv; ++i)
        for (int j = 0; j < nv; ++j) tm.emplace_back(vm[i], vm[j], mloc(i, j));
      // b_h: the pressure weak gradient tested against the interior velocity
      for (int i = 0; i < nv; ++i)
        for (int j = 0; j < op.n_ploc; ++j)
          tb.emplace_back(vm[i], op.pmap[j] - dof.pressure_offset(),
                          op.Gp(comp * nv + i, j));
    }
    for (int i = 0; i < dof.dim_pre; ++i)
      out.mean_row[op.pmap[i] - dof.pressure_offset()] += op.pre_one[i];
  }

  out.M.resize(nvel, nvel);
  out.M.setFromTriplets(tm.begin(), tm.end());
  out.A.resize(nvel, nvel);
  out.A.setFromTriplets(ta.begin(), ta.end());
  out.B.resize(nvel, dof.n_pressure());
  out.B.setFromTriplets(tb.begin(), tb.end());
  return out;
}

/// Nonlinear damping form: alpha (|kappa_hi|^{r-2} u_hi, v_hi). Symmetric
/// positive semidefinite, interior-velocity block only.
inline SparseMat assemble_damping(const Mesh& mesh, const LocalOperatorCache& cache,
                                  const DofMap& dof, const FieldState& kappa, double alpha,
                                  double r) {
  const int nvel = dof.n_velocity();
  SparseMat out(nvel, nvel);
  if (alpha == 0.0) return out;

  std::vector<Triplet> tc;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const MatrixXd cloc = detail::local_damping(op, dof, kappa.x, c, alpha, r);
    for (int comp = 0; comp < 2; ++comp) {
      const auto& vm = op.vmap[comp];
      for (int i = 0; i < dof.dim_vel; ++i)
        for (int j = 0; j < dof.dim_vel; ++j) tc.emplace_back(vm[i], vm[j], cloc(i, j));
    }
  }
  out.setFromTriplets(tc.begin(), tc.end());
  return out;
}

/// Skew-symmetrized convection form built from row-wise weak divergences of
/// u (x) kappa; the transposed half swaps trial and test, so the assembled
/// matrix is exactly skew.
inline SparseMat assemble_convection(const Mesh& mesh, const LocalOperatorCache& cache,
                                     const DofMap& dof, const FieldState& kappa) {
  const int nvel = dof.n_velocity();
  std::vector<Triplet> td;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const MatrixXd eloc = detail::local_convection(op, dof, kappa.x, c);
    for (int comp = 0; comp < 2; ++comp) {
      const auto& vm = op.vmap[comp];
      for (int b = 0; b < dof.dim_vel; ++b)
        for (int a = 0; a < op.n_vloc; ++a) {
          const double v = 0.5 * eloc(b, a);
          td.emplace_back(vm[b], vm[a], v);
          td.emplace_back(vm[a], vm[b], -v);
        }
    }
  }
  SparseMat out(nvel, nvel);
  out.setFromTriplets(td.begin(), td.end());
  return out;
}

/// Load vector (f(.,t), v_hi); entries only on interior velocity DOFs.
inline Eigen::VectorXd assemble_load(const Mesh& mesh, const LocalOperatorCache& cache,
                                     const DofMap& dof, const TimeVectorField& f, double t) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dof.n_velocity());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    Eigen::VectorXd fx(op.qw.size()), fy(op.qw.size());
    for (int q = 0; q < op.qw.size(); ++q) {
      const Vec2 v = f(op.qpts.row(q).transpose(), t);
      fx[q] = v.x();
      fy[q] = v.y();
    }
    const Eigen::VectorXd lx = op.vel_val.transpose() * (op.qw.asDiagonal() * fx);
    const Eigen::VectorXd ly = op.vel_val.transpose() * (op.qw.asDiagonal() * fy);
    for (int i = 0; i < dof.dim_vel; ++i) {
      out[dof.u_interior(c, 0, i)] += lx[i];
      out[dof.u_interior(c, 1, i)] += ly[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dirichlet data and elimination
// ---------------------------------------------------------------------------

/// Projected boundary values: full-length vector, nonzero only at velocity
/// trace DOFs of boundary edges.
inline Eigen::VectorXd project_dirichlet(const Mesh& mesh, const LocalOperatorCache& cache,
                                         const DofMap& dof, const TimeVectorField& g, double t) {
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(dof.total);
  const int qd = cache.quad_degree_edge;
  for (int e : mesh.boundary_edges) {
    EdgeBasis eb(dof.m, mesh.edge_h[e]);
    const Vec2 a = mesh.vertices[mesh.edges[e][0]], b = mesh.vertices[mesh.edges[e][1]];
    for (int comp = 0; comp < 2; ++comp) {
      const VectorXd coef = l2_project_edge(
          [&](const Vec2& p) { return g(p, t)[comp]; }, a, b, eb, qd);
      for (int k = 0; k < dof.dim_edge; ++k) bc[dof.u_trace(e, comp, k)] = coef[k];
    }
  }
  return bc;
}

/// Index reduction that removes boundary velocity-trace DOFs (the test
/// space has zero boundary traces; the trial values come from the data).
struct Reduction {
  std::vector<int> to_reduced;  // -1 on eliminated DOFs
  std::vector<int> to_full;
  int n = 0;
};

inline Reduction build_reduction(const Mesh& mesh, const DofMap& dof) {
  Reduction red;
  red.to_reduced.assign(dof.total, 0);
  for (int e : mesh.boundary_edges)
    for (int comp = 0; comp < 2; ++comp)
      for (int k = 0; k < dof.dim_edge; ++k) red.to_reduced[dof.u_trace(e, comp, k)] = -1;
  red.to_full.reserve(dof.total);
  for (int i = 0; i < dof.total; ++i) {
    if (red.to_reduced[i] == 0) {
      red.to_reduced[i] = red.n++;
      red.to_full.push_back(i);
    }
  }
  return red;
}

/// The bordered saddle system of one linearized step, in full indexing:
///   [ M/dt + A + C + D    B    0 ] [u]   [rhs_vel]
///   [ B^T                 0    z ] [p] = [0]
///   [ 0                  z^T   0 ] [l]   [0]
/// Dirichlet trace values are eliminated against `bc`; rows of eliminated
/// test DOFs are dropped.
struct ReducedSystem {
  SparseMat matrix;
  Eigen::VectorXd rhs;
};

inline ReducedSystem build_saddle_system(const SystemBlocks& blocks, const SparseMat& C,
                                         const SparseMat& D, double inv_dt, const DofMap& dof,
                                         const Reduction& red, const Eigen::VectorXd& bc,
                                         const Eigen::VectorXd& rhs_vel) {
  const int poff = dof.pressure_offset();
  const int lam = dof.multiplier();

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(red.n);
  std::vector<Triplet> ts;
  ts.reserve(static_cast<size_t>(blocks.A.nonZeros() + blocks.M.nonZeros() + C.nonZeros() +
                                 D.nonZeros() + 2 * blocks.B.nonZeros() + 2 * dof.n_pi + 8));

  auto add = [&](int r, int c, double v) {
    const int rr = red.to_reduced[r];
    if (rr < 0) return;
    const int cc = red.to_reduced[c];
    if (cc < 0)
      rhs[rr] -= v * bc[c];
    else
      ts.emplace_back(rr, cc, v);
  };

  auto add_sparse = [&](const SparseMat& mat, double scale, int row_off, int col_off) {
    for (int k = 0; k < mat.outerSize(); ++k)
      for (SparseMat::InnerIterator it(mat, k); it; ++it)
        add(static_cast<int>(it.row()) + row_off, static_cast<int>(it.col()) + col_off,
            scale * it.value());
  };

  add_sparse(blocks.M, inv_dt, 0, 0);
  add_sparse(blocks.A, 1.0, 0, 0);
  add_sparse(C, 1.0, 0, 0);
  add_sparse(D, 1.0, 0, 0);
  for (int k = 0; k < blocks.B.outerSize(); ++k)
    for (SparseMat::InnerIterator it(blocks.B, k); it; ++it) {
      add(static_cast<int>(it.row()), poff + static_cast<int>(it.col()), it.value());
      add(poff + static_cast<int>(it.col()), static_cast<int>(it.row()), it.value());
    }
  for (int p = 0; p < dof.n_pressure(); ++p) {
    if (blocks.mean_row[p] == 0.0) continue;
    add(poff + p, lam, blocks.mean_row[p]);
    add(lam, poff + p, blocks.mean_row[p]);
  }

  for (int i = 0; i < dof.n_velocity(); ++i) {
    const int rr = red.to_reduced[i];
    if (rr >= 0) rhs[rr] += rhs_vel[i];
  }

  ReducedSystem sys;
  sys.matrix.resize(red.n, red.n);
  sys.matrix.setFromTriplets(ts.begin(), ts.end());
  sys.rhs = std::move(rhs);
  return sys;
}

}  // namespace wgbf
