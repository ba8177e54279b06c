#pragma once

#include <Eigen/Dense>
#include <functional>

#include "wgbf/basis.hpp"

namespace wgbf {

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

/// Trace data of one weak function on the three edges of a cell, as
/// coefficients in the canonical edge bases.
struct TraceCoeffs {
  std::array<VectorXd, 3> edge;
};

/// Matrix of the discrete weak gradient on one cell.
///
/// Maps the stacked DOFs of a scalar weak function {v_i, v_b} (interior
/// coefficients first, then the three edge-trace coefficient blocks in the
/// cell's local edge order) to the coefficients of its weak gradient in the
/// orthonormal basis of [P_gamma]^2 (x-component block first). The defining
/// identity is solved exactly: the target basis is orthonormal, so the mass
/// solve reduces to evaluating the right-hand side moments.
inline MatrixXd weak_gradient_matrix(const CellGeometry& g, const ScalarBasis& interior,
                                     const std::array<EdgeBasis, 3>& traces,
                                     const ScalarBasis& target, int quad_degree) {
  const int ni = interior.dim();
  const int nt = target.dim();
  std::array<int, 3> toff{};
  int ncols = ni;
  for (int le = 0; le < 3; ++le) {
    toff[le] = ncols;
    ncols += traces[le].dim();
  }
  MatrixXd grad = MatrixXd::Zero(2 * nt, ncols);

  const auto vrule = triangle_quadrature(quad_degree);
  PointList pts;
  VectorXd w;
  map_to_cell(g.v, vrule, pts, w);
  const MatrixXd phi = interior.values(pts);
  MatrixXd tgx, tgy;
  target.gradients(pts, tgx, tgy);
  // -(v_i, d/dx chi) and -(v_i, d/dy chi)
  grad.block(0, 0, nt, ni) = -tgx.transpose() * w.asDiagonal() * phi;
  grad.block(nt, 0, nt, ni) = -tgy.transpose() * w.asDiagonal() * phi;

  const auto erule = edge_quadrature(quad_degree);
  for (int le = 0; le < 3; ++le) {
    PointList epts;
    VectorXd ew;
    map_to_edge(g.edge_a[le], g.edge_b[le], erule, epts, ew);
    const MatrixXd chi = target.values(epts);
    const MatrixXd psi = traces[le].values(erule.points);
    const MatrixXd moments = chi.transpose() * ew.asDiagonal() * psi;  // nt x (deg+1)
    const Vec2 nk = g.edge_sign[le] * g.edge_normal[le];
    grad.block(0, toff[le], nt, traces[le].dim()) += nk.x() * moments;
    grad.block(nt, toff[le], nt, traces[le].dim()) += nk.y() * moments;
  }
  return grad;
}

/// Discrete weak gradient of one scalar weak function; returns coefficients
/// in [P_gamma]^2 over the target basis (x block, then y block).
inline VectorXd weak_gradient(const CellGeometry& g, const ScalarBasis& interior,
                              const std::array<EdgeBasis, 3>& traces, const ScalarBasis& target,
                              const VectorXd& interior_coeffs, const TraceCoeffs& trace_coeffs,
                              int quad_degree) {
  const int ncols = interior.dim() + traces[0].dim() + traces[1].dim() + traces[2].dim();
  VectorXd dofs(ncols);
  if (interior_coeffs.size() != interior.dim())
    throw std::invalid_argument("weak_gradient: interior coefficient length mismatch");
  dofs.head(interior.dim()) = interior_coeffs;
  int off = interior.dim();
  for (int le = 0; le < 3; ++le) {
    if (trace_coeffs.edge[le].size() != traces[le].dim())
      throw std::invalid_argument("weak_gradient: trace coefficient length mismatch");
    dofs.segment(off, traces[le].dim()) = trace_coeffs.edge[le];
    off += traces[le].dim();
  }
  return weak_gradient_matrix(g, interior, traces, target, quad_degree) * dofs;
}

/// Discrete weak divergence of a vector weak function {w_i, w_b}.
///
/// Interior data: coefficients of the two components in `interior`
/// (x block then y block). Boundary data: either per-edge vector
/// coefficients, or samples of w_b . n_e at the nodes of `erule` (the
/// canonical edge normal; the cell's outward sign is applied here). The
/// result is expressed in the orthonormal scalar `target` basis.
inline VectorXd weak_divergence(const CellGeometry& g, const ScalarBasis& interior,
                                const ScalarBasis& target, const VectorXd& interior_coeffs,
                                const std::array<VectorXd, 3>& normal_trace_samples,
                                const EdgeQuadrature& erule, int quad_degree) {
  const int ni = interior.dim();
  if (interior_coeffs.size() != 2 * ni)
    throw std::invalid_argument("weak_divergence: interior coefficient length mismatch");

  const auto vrule = triangle_quadrature(quad_degree);
  PointList pts;
  VectorXd w;
  map_to_cell(g.v, vrule, pts, w);
  const MatrixXd phi = interior.values(pts);
  MatrixXd tgx, tgy;
  target.gradients(pts, tgx, tgy);
  const VectorXd wx = phi * interior_coeffs.head(ni);
  const VectorXd wy = phi * interior_coeffs.tail(ni);
  VectorXd out = -tgx.transpose() * (w.asDiagonal() * wx) - tgy.transpose() * (w.asDiagonal() * wy);

  for (int le = 0; le < 3; ++le) {
    if (normal_trace_samples[le].size() != erule.size())
      throw std::invalid_argument("weak_divergence: edge sample count mismatch");
    PointList epts;
    VectorXd ew;
    map_to_edge(g.edge_a[le], g.edge_b[le], erule, epts, ew);
    const MatrixXd chi = target.values(epts);
    out += g.edge_sign[le] * chi.transpose() * (ew.asDiagonal() * normal_trace_samples[le]);
  }
  return out;
}

/// Convenience overload taking per-edge vector-valued trace coefficients.
inline VectorXd weak_divergence(const CellGeometry& g, const ScalarBasis& interior,
                                const std::array<EdgeBasis, 3>& traces, const ScalarBasis& target,
                                const VectorXd& interior_coeffs,
                                const std::array<VectorXd, 3>& trace_coeffs, int quad_degree) {
  const auto erule = edge_quadrature(quad_degree);
  std::array<VectorXd, 3> samples;
  for (int le = 0; le < 3; ++le) {
    const int nd = traces[le].dim();
    if (trace_coeffs[le].size() != 2 * nd)
      throw std::invalid_argument("weak_divergence: trace coefficient length mismatch");
    const MatrixXd psi = traces[le].values(erule.points);
    const VectorXd tx = psi * trace_coeffs[le].head(nd);
    const VectorXd ty = psi * trace_coeffs[le].tail(nd);
    samples[le] = tx * g.edge_normal[le].x() + ty * g.edge_normal[le].y();
  }
  return weak_divergence(g, interior, target, interior_coeffs, samples, erule, quad_degree);
}

/// Element L2 projection onto the span of `basis`.
inline VectorXd l2_project_element(const ScalarField& f, const CellGeometry& g,
                                   const ScalarBasis& basis, int quad_degree) {
  const auto rule = triangle_quadrature(quad_degree);
  PointList pts;
  VectorXd w;
  map_to_cell(g.v, rule, pts, w);
  VectorXd fv(rule.size());
  for (int i = 0; i < rule.size(); ++i) fv[i] = f(pts.row(i).transpose());
  return basis.values(pts).transpose() * (w.asDiagonal() * fv);
}

/// Edge L2 projection; `a`, `b` are the canonical endpoints.
inline VectorXd l2_project_edge(const ScalarField& f, const Vec2& a, const Vec2& b,
                                const EdgeBasis& basis, int quad_degree) {
  const auto rule = edge_quadrature(quad_degree);
  PointList pts;
  VectorXd w;
  map_to_edge(a, b, rule, pts, w);
  VectorXd fv(rule.size());
  for (int i = 0; i < rule.size(); ++i) fv[i] = f(pts.row(i).transpose());
  return basis.values(rule.points).transpose() * (w.asDiagonal() * fv);
}

/// RT projection of a smooth vector field on one cell.
inline VectorXd rt_project(const VectorField& omega, const RTBasis& rt, int quad_boost = 0) {
  return rt.interpolate(omega, quad_boost);
}

}  // namespace wgbf
