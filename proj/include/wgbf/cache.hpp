#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wgbf/basis.hpp"
#include "wgbf/dof_map.hpp"
#include "wgbf/weak_ops.hpp"

namespace wgbf {

/// Everything assembly needs from one cell, precomputed once per run:
/// bases, quadrature values, weak-operator matrices and the edge coupling
/// blocks of the stabilization. The nonlinear forms are reassembled every
/// Picard iteration from these dense pieces.
struct CellOps {
  CellGeometry geom;

  ScalarBasis vel;  // velocity component space P_m
  ScalarBasis pre;  // interior pressure space P_{m-1}
  ScalarBasis wg;   // weak-gradient target space P_l
  std::array<EdgeBasis, 3> trace;

  // volume quadrature on this cell
  PointList qpts;
  Eigen::VectorXd qw;
  MatrixXd vel_val, vel_gx, vel_gy;  // nq x dim_vel
  MatrixXd pre_val;                  // nq x dim_pre

  // edge quadrature, per local edge (canonical parameterization)
  std::array<PointList, 3> epts;
  std::array<Eigen::VectorXd, 3> ew;
  std::array<MatrixXd, 3> vel_edge;  // interior basis restricted to the edge
  std::array<MatrixXd, 3> psi_edge;  // edge basis at the edge nodes

  // weak operators: velocity component gradient (target P_l) and pressure
  // gradient (target = the velocity basis, so b_h contracts directly)
  MatrixXd Gv;  // 2*dim(P_l) x (dim_vel + 3(m+1))
  MatrixXd Gp;  // 2*dim_vel  x (dim_pre + 3(m+1))

  // stabilization couplings per local edge
  std::array<MatrixXd, 3> stab_ii, stab_ib, stab_bb;

  Eigen::VectorXd pre_one;  // (pre basis, 1)_K, the mean-constraint row piece

  // local-to-global: velocity component dofs [interior | edge0 | edge1 |
  // edge2] and pressure dofs in the same layout
  std::array<std::vector<int>, 2> vmap;
  std::vector<int> pmap;

  int n_vloc = 0, n_ploc = 0;
};

struct LocalOperatorCache {
  int m = 1, l = 0;
  int quad_degree = 0, quad_degree_edge = 0;
  std::vector<CellOps> cell;
};

/// Builds the per-cell cache. `quad_degree` / `quad_degree_edge` of 0 pick
/// the defaults 3m+4.
inline LocalOperatorCache build_cache(const Mesh& mesh, const DofMap& dof, int l,
                                      int quad_degree = 0, int quad_degree_edge = 0) {
  const int m = dof.m;
  if (l != m && l != m - 1) throw std::invalid_argument("build_cache: l must be m-1 or m");

  LocalOperatorCache cache;
  cache.m = m;
  cache.l = l;
  cache.quad_degree = quad_degree > 0 ? quad_degree : 3 * m + 4;
  cache.quad_degree_edge = quad_degree_edge > 0 ? quad_degree_edge : 3 * m + 4;

  const auto vrule = triangle_quadrature(cache.quad_degree);
  const auto erule = edge_quadrature(cache.quad_degree_edge);

  cache.cell.resize(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellOps& op = cache.cell[c];
    op.geom = cell_geometry(mesh, c);
    op.vel = build_scalar_basis(m, op.geom);
    op.pre = build_scalar_basis(m - 1, op.geom);
    op.wg = build_scalar_basis(l, op.geom);
    for (int le = 0; le < 3; ++le) op.trace[le] = EdgeBasis(m, op.geom.edge_len[le]);

    map_to_cell(op.geom.v, vrule, op.qpts, op.qw);
    op.vel_val = op.vel.values(op.qpts);
    op.vel.gradients(op.qpts, op.vel_gx, op.vel_gy);
    op.pre_val = op.pre.values(op.qpts);

    for (int le = 0; le < 3; ++le) {
      map_to_edge(op.geom.edge_a[le], op.geom.edge_b[le], erule, op.epts[le], op.ew[le]);
      op.vel_edge[le] = op.vel.values(op.epts[le]);
      op.psi_edge[le] = op.trace[le].values(erule.points);
    }

    op.Gv = weak_gradient_matrix(op.geom, op.vel, op.trace, op.wg, cache.quad_degree);
    op.Gp = weak_gradient_matrix(op.geom, op.pre, op.trace, op.vel, cache.quad_degree);

    for (int le = 0; le < 3; ++le) {
      const auto& w = op.ew[le];
      op.stab_ii[le] = op.vel_edge[le].transpose() * w.asDiagonal() * op.vel_edge[le];
      op.stab_ib[le] = op.vel_edge[le].transpose() * w.asDiagonal() * op.psi_edge[le];
      op.stab_bb[le] = op.psi_edge[le].transpose() * w.asDiagonal() * op.psi_edge[le];
    }

    op.pre_one = op.pre_val.transpose() * op.qw;

    op.n_vloc = dof.dim_vel + 3 * dof.dim_edge;
    op.n_ploc = dof.dim_pre + 3 * dof.dim_edge;
    for (int comp = 0; comp < 2; ++comp) {
      auto& vm = op.vmap[comp];
      vm.resize(op.n_vloc);
      for (int i = 0; i < dof.dim_vel; ++i) vm[i] = dof.u_interior(c, comp, i);
      for (int le = 0; le < 3; ++le)
        for (int k = 0; k < dof.dim_edge; ++k)
          vm[dof.dim_vel + le * dof.dim_edge + k] = dof.u_trace(op.geom.edge_index[le], comp, k);
    }
    op.pmap.resize(op.n_ploc);
    for (int i = 0; i < dof.dim_pre; ++i) op.pmap[i] = dof.p_interior(c, i);
    for (int le = 0; le < 3; ++le)
      for (int k = 0; k < dof.dim_edge; ++k)
        op.pmap[dof.dim_pre + le * dof.dim_edge + k] = dof.p_trace(op.geom.edge_index[le], k);
  }
  return cache;
}

}  // namespace wgbf
