#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "wgbf/mesh.hpp"

namespace wgbf {

/// Global indexing of the discrete unknowns. Layout:
///   [ interior velocity | trace velocity | interior pressure | trace
///     pressure | mean-constraint multiplier ]
/// Interior blocks are cell-major, trace blocks edge-major; within a block
/// the x-component coefficients precede the y-component ones.
struct DofMap {
  int m = 1;
  int n_cells = 0, n_edges = 0;
  int dim_vel = 0;   // dim P_m per component
  int dim_pre = 0;   // dim P_{m-1}
  int dim_edge = 0;  // m+1 per component
  int n_ui = 0, n_ub = 0, n_pi = 0, n_pb = 0;
  int total = 0;

  int u_interior(int c, int comp, int i) const { return c * 2 * dim_vel + comp * dim_vel + i; }
  int u_trace(int e, int comp, int k) const {
    return n_ui + e * 2 * dim_edge + comp * dim_edge + k;
  }
  int p_interior(int c, int i) const { return n_ui + n_ub + c * dim_pre + i; }
  int p_trace(int e, int k) const { return n_ui + n_ub + n_pi + e * dim_edge + k; }
  int multiplier() const { return total - 1; }

  int n_velocity() const { return n_ui + n_ub; }
  int n_pressure() const { return n_pi + n_pb; }
  int pressure_offset() const { return n_ui + n_ub; }
};

inline DofMap build_dof_map(const Mesh& mesh, int m) {
  if (m < 1) throw std::invalid_argument("build_dof_map: m must be >= 1");
  DofMap d;
  d.m = m;
  d.n_cells = mesh.n_cells();
  d.n_edges = mesh.n_edges();
  d.dim_vel = (m + 1) * (m + 2) / 2;
  d.dim_pre = m * (m + 1) / 2;
  d.dim_edge = m + 1;
  d.n_ui = d.n_cells * 2 * d.dim_vel;
  d.n_ub = d.n_edges * 2 * d.dim_edge;
  d.n_pi = d.n_cells * d.dim_pre;
  d.n_pb = d.n_edges * d.dim_edge;
  d.total = d.n_ui + d.n_ub + d.n_pi + d.n_pb + 1;
  return d;
}

/// One coefficient vector over a DofMap at a time level.
struct FieldState {
  Eigen::VectorXd x;
  double time = 0.0;

  static FieldState zero(const DofMap& dof, double t = 0.0) {
    return {Eigen::VectorXd::Zero(dof.total), t};
  }
};

}  // namespace wgbf
