#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

#include "wgbf/mesh.hpp"
#include "wgbf/quadrature.hpp"

namespace wgbf {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using PointList = Eigen::Matrix<double, Eigen::Dynamic, 2>;

inline int poly_space_dim(int degree) { return (degree + 1) * (degree + 2) / 2; }

/// Geometry of one cell in canonical form. Edge endpoints are ordered by
/// vertex index (matching the mesh-wide edge orientation) and `edge_sign`
/// converts the canonical edge normal into the outward normal of this cell.
struct CellGeometry {
  int index = -1;
  std::array<Vec2, 3> v;
  double area = 0.0;
  double diameter = 0.0;
  Vec2 centroid;
  std::array<int, 3> edge_index{};
  std::array<double, 3> edge_sign{};
  std::array<Vec2, 3> edge_a, edge_b;  // canonical endpoints
  std::array<Vec2, 3> edge_normal;     // canonical unit normal
  std::array<double, 3> edge_len{};
};

inline CellGeometry cell_geometry(const Mesh& m, int c) {
  CellGeometry g;
  g.index = c;
  g.v = m.cell_vertices(c);
  g.area = m.cell_area[c];
  g.diameter = m.cell_h[c];
  g.centroid = m.cell_centroid[c];
  for (int k = 0; k < 3; ++k) {
    const auto& ce = m.cell_edges[c][k];
    g.edge_index[k] = ce.edge;
    g.edge_sign[k] = ce.sign;
    g.edge_a[k] = m.vertices[m.edges[ce.edge][0]];
    g.edge_b[k] = m.vertices[m.edges[ce.edge][1]];
    g.edge_normal[k] = m.edge_normal[ce.edge];
    g.edge_len[k] = m.edge_h[ce.edge];
  }
  return g;
}

/// Maps a reference-triangle rule to a physical cell; weights sum to area(K).
inline void map_to_cell(const std::array<Vec2, 3>& v, const TriQuadrature& q, PointList& pts,
                        VectorXd& w) {
  const int n = q.size();
  pts.resize(n, 2);
  w.resize(n);
  const double area2 = std::abs((v[1] - v[0]).x() * (v[2] - v[0]).y() -
                                (v[2] - v[0]).x() * (v[1] - v[0]).y());
  for (int i = 0; i < n; ++i) {
    const Vec2 p = q.bary(i, 0) * v[0] + q.bary(i, 1) * v[1] + q.bary(i, 2) * v[2];
    pts.row(i) = p.transpose();
    w[i] = q.weights[i] * area2;
  }
}

/// Maps a [0,1] rule to the segment a->b; weights sum to |b-a|.
inline void map_to_edge(const Vec2& a, const Vec2& b, const EdgeQuadrature& q, PointList& pts,
                        VectorXd& w) {
  const int n = q.size();
  pts.resize(n, 2);
  w.resize(n);
  const double len = (b - a).norm();
  for (int i = 0; i < n; ++i) {
    pts.row(i) = (a + q.points[i] * (b - a)).transpose();
    w[i] = q.weights[i] * len;
  }
}

namespace detail {

// monomial exponents of P_degree, graded order
inline std::vector<std::array<int, 2>> monomial_exponents(int degree) {
  std::vector<std::array<int, 2>> e;
  e.reserve(poly_space_dim(degree));
  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a) e.push_back({a, d - a});
  return e;
}

}  // namespace detail

/// L2-orthonormal polynomial basis on one cell, built by orthonormalizing
/// centered and scaled monomials against the cell inner product.
class ScalarBasis {
 public:
  ScalarBasis() = default;

  ScalarBasis(int degree, const std::array<Vec2, 3>& tri, Vec2 center, double scale)
      : degree_(degree), center_(center), scale_(scale), exps_(detail::monomial_exponents(degree)) {
    if (degree < 0) throw std::invalid_argument("ScalarBasis: degree must be >= 0");
    const auto rule = triangle_quadrature(std::max(2 * degree, 1));
    PointList pts;
    VectorXd w;
    map_to_cell(tri, rule, pts, w);
    const MatrixXd mono = monomial_values(pts);
    const MatrixXd gram = mono.transpose() * w.asDiagonal() * mono;
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("ScalarBasis: Gram factorization failed (degenerate cell?)");
    // columns of coeff_ express the orthonormal functions over monomials
    coeff_ = MatrixXd::Identity(dim(), dim());
    llt.matrixU().solveInPlace(coeff_);
  }

  int degree() const { return degree_; }
  int dim() const { return poly_space_dim(degree_); }

  /// Basis values at physical points, one column per function.
  MatrixXd values(const PointList& pts) const { return monomial_values(pts) * coeff_; }

  /// Basis gradients at physical points.
  void gradients(const PointList& pts, MatrixXd& gx, MatrixXd& gy) const {
    MatrixXd mx, my;
    monomial_gradients(pts, mx, my);
    gx = mx * coeff_;
    gy = my * coeff_;
  }

  /// Expands a function given by coefficients: values = V * c.
  VectorXd evaluate(const PointList& pts, const VectorXd& c) const { return values(pts) * c; }

 private:
  MatrixXd monomial_values(const PointList& pts) const {
    const int n = static_cast<int>(pts.rows()), nm = dim();
    MatrixXd out(n, nm);
    for (int i = 0; i < n; ++i) {
      const double x = (pts(i, 0) - center_.x()) / scale_;
      const double y = (pts(i, 1) - center_.y()) / scale_;
      for (int k = 0; k < nm; ++k)
        out(i, k) = std::pow(x, exps_[k][0]) * std::pow(y, exps_[k][1]);
    }
    return out;
  }

  void monomial_gradients(const PointList& pts, MatrixXd& gx, MatrixXd& gy) const {
    const int n = static_cast<int>(pts.rows()), nm = dim();
    gx.resize(n, nm);
    gy.resize(n, nm);
    for (int i = 0; i < n; ++i) {
      const double x = (pts(i, 0) - center_.x()) / scale_;
      const double y = (pts(i, 1) - center_.y()) / scale_;
      for (int k = 0; k < nm; ++k) {
        const int a = exps_[k][0], b = exps_[k][1];
        gx(i, k) = a == 0 ? 0.0 : a * std::pow(x, a - 1) * std::pow(y, b) / scale_;
        gy(i, k) = b == 0 ? 0.0 : b * std::pow(x, a) * std::pow(y, b - 1) / scale_;
      }
    }
  }

  int degree_ = 0;
  Vec2 center_ = Vec2::Zero();
  double scale_ = 1.0;
  std::vector<std::array<int, 2>> exps_;
  MatrixXd coeff_;
};

inline ScalarBasis build_scalar_basis(int degree, const CellGeometry& g) {
  return ScalarBasis(degree, g.v, g.centroid, g.diameter);
}

/// Orthonormal basis on an edge with respect to the arclength measure,
/// parameterized by s in [0,1] along the canonical edge direction.
class EdgeBasis {
 public:
  EdgeBasis() = default;
  EdgeBasis(int degree, double edge_length) : degree_(degree), len_(edge_length) {
    if (degree < 0) throw std::invalid_argument("EdgeBasis: degree must be >= 0");
    if (!(edge_length > 0.0)) throw std::invalid_argument("EdgeBasis: degenerate edge");
  }

  int degree() const { return degree_; }
  int dim() const { return degree_ + 1; }

  /// Values at parameters s in [0,1]; column k is sqrt((2k+1)/len) P_k(2s-1).
  MatrixXd values(const VectorXd& s) const {
    const int n = static_cast<int>(s.size());
    MatrixXd out(n, dim());
    for (int i = 0; i < n; ++i) {
      const double t = 2.0 * s[i] - 1.0;
      double pkm1 = 1.0, pk = t;
      for (int k = 0; k <= degree_; ++k) {
        double p;
        if (k == 0)
          p = 1.0;
        else if (k == 1)
          p = t;
        else {
          p = ((2.0 * k - 1.0) * t * pk - (k - 1.0) * pkm1) / k;
          pkm1 = pk;
          pk = p;
        }
        out(i, k) = std::sqrt((2.0 * k + 1.0) / len_) * p;
      }
    }
    return out;
  }

 private:
  int degree_ = 0;
  double len_ = 1.0;
};

/// Local Raviart-Thomas space [P_m]^2 + x P_m on one cell, with the usual
/// edge-moment and interior-moment degrees of freedom.
class RTBasis {
 public:
  RTBasis(int degree, const CellGeometry& g)
      : degree_(degree), geom_(g), exps_(detail::monomial_exponents(degree)) {
    if (degree < 1) throw std::invalid_argument("RTBasis: degree must be >= 1");
    interior_ = build_scalar_basis(degree - 1, g);

    // DOF rows: per edge, moments of v.n_e against the edge basis; then
    // interior moments against the orthonormal [P_{m-1}]^2 basis.
    const int n = dim();
    MatrixXd dof = MatrixXd::Zero(n, n);
    const auto erule = edge_quadrature(2 * degree + 2);
    int row = 0;
    for (int le = 0; le < 3; ++le) {
      EdgeBasis eb(degree, g.edge_len[le]);
      PointList pts;
      VectorXd w;
      map_to_edge(g.edge_a[le], g.edge_b[le], erule, pts, w);
      MatrixXd vx, vy;
      values(pts, vx, vy);
      const MatrixXd vn = vx * g.edge_normal[le].x() + vy * g.edge_normal[le].y();
      const MatrixXd psi = eb.values(erule.points);
      dof.block(row, 0, degree + 1, n) = psi.transpose() * w.asDiagonal() * vn;
      row += degree + 1;
    }
    const auto trule = triangle_quadrature(2 * degree + 2);
    PointList pts;
    VectorXd w;
    map_to_cell(g.v, trule, pts, w);
    MatrixXd vx, vy;
    values(pts, vx, vy);
    const MatrixXd phi = interior_.values(pts);
    const int ni = interior_.dim();
    dof.block(row, 0, ni, n) = phi.transpose() * w.asDiagonal() * vx;
    dof.block(row + ni, 0, ni, n) = phi.transpose() * w.asDiagonal() * vy;

    lu_.compute(dof);
    const double rcond = lu_.rcond();
    if (!(rcond > 1e-14))
      throw std::runtime_error("RTBasis: singular DOF matrix (degenerate cell?)");
    dof_condition_ = 1.0 / rcond;
  }

  int degree() const { return degree_; }
  int dim() const { return (degree_ + 1) * (degree_ + 3); }
  double dof_condition() const { return dof_condition_; }

  /// Member values at physical points, one column per spanning function:
  /// first the 2*dim(P_m) vector monomials, then the m+1 terms x*q, q
  /// homogeneous of degree m.
  void values(const PointList& pts, MatrixXd& vx, MatrixXd& vy) const {
    const int n = static_cast<int>(pts.rows());
    const int nm = poly_space_dim(degree_);
    vx = MatrixXd::Zero(n, dim());
    vy = MatrixXd::Zero(n, dim());
    for (int i = 0; i < n; ++i) {
      const double x = (pts(i, 0) - geom_.centroid.x()) / geom_.diameter;
      const double y = (pts(i, 1) - geom_.centroid.y()) / geom_.diameter;
      for (int k = 0; k < nm; ++k) {
        const double mono = std::pow(x, exps_[k][0]) * std::pow(y, exps_[k][1]);
        vx(i, k) = mono;
        vy(i, nm + k) = mono;
      }
      for (int j = 0; j <= degree_; ++j) {
        // homogeneous monomials x^(m-j) y^j
        const double mono = std::pow(x, degree_ - j) * std::pow(y, j);
        vx(i, 2 * nm + j) = x * mono;
        vy(i, 2 * nm + j) = y * mono;
      }
    }
  }

  /// Divergence of each member; a polynomial of degree <= m.
  MatrixXd divergence(const PointList& pts) const {
    const int n = static_cast<int>(pts.rows());
    const int nm = poly_space_dim(degree_);
    MatrixXd out = MatrixXd::Zero(n, dim());
    const double inv_h = 1.0 / geom_.diameter;
    for (int i = 0; i < n; ++i) {
      const double x = (pts(i, 0) - geom_.centroid.x()) / geom_.diameter;
      const double y = (pts(i, 1) - geom_.centroid.y()) / geom_.diameter;
      for (int k = 0; k < nm; ++k) {
        const int a = exps_[k][0], b = exps_[k][1];
        out(i, k) = a == 0 ? 0.0 : a * std::pow(x, a - 1) * std::pow(y, b) * inv_h;
        out(i, nm + k) = b == 0 ? 0.0 : b * std::pow(x, a) * std::pow(y, b - 1) * inv_h;
      }
      for (int j = 0; j <= degree_; ++j) {
        // div(x q) = 2q + x.grad(q) = (2 + m) q for homogeneous q of degree m
        const double mono = std::pow(x, degree_ - j) * std::pow(y, j);
        out(i, 2 * nm + j) = (2.0 + degree_) * mono * inv_h;
      }
    }
    return out;
  }

  /// RT interpolation of a smooth field through the edge and interior
  /// moments; returns coefficients over the spanning set.
  VectorXd interpolate(const std::function<Vec2(const Vec2&)>& omega, int quad_boost = 0) const {
    VectorXd rhs(dim());
    const auto erule = edge_quadrature(2 * degree_ + 2 + quad_boost);
    int row = 0;
    for (int le = 0; le < 3; ++le) {
      EdgeBasis eb(degree_, geom_.edge_len[le]);
      PointList pts;
      VectorXd w;
      map_to_edge(geom_.edge_a[le], geom_.edge_b[le], erule, pts, w);
      VectorXd wn(erule.size());
      for (int i = 0; i < erule.size(); ++i)
        wn[i] = omega(pts.row(i).transpose()).dot(geom_.edge_normal[le]);
      const MatrixXd psi = eb.values(erule.points);
      rhs.segment(row, degree_ + 1) = psi.transpose() * (w.asDiagonal() * wn);
      row += degree_ + 1;
    }
    const auto trule = triangle_quadrature(2 * degree_ + 2 + quad_boost);
    PointList pts;
    VectorXd w;
    map_to_cell(geom_.v, trule, pts, w);
    VectorXd fx(trule.size()), fy(trule.size());
    for (int i = 0; i < trule.size(); ++i) {
      const Vec2 val = omega(pts.row(i).transpose());
      fx[i] = val.x();
      fy[i] = val.y();
    }
    const MatrixXd phi = interior_.values(pts);
    const int ni = interior_.dim();
    rhs.segment(row, ni) = phi.transpose() * (w.asDiagonal() * fx);
    rhs.segment(row + ni, ni) = phi.transpose() * (w.asDiagonal() * fy);
    return lu_.solve(rhs);
  }

  /// Interpolation from explicit moment values (same DOF ordering).
  VectorXd from_moments(const VectorXd& moments) const { return lu_.solve(moments); }

 private:
  int degree_ = 1;
  CellGeometry geom_;
  std::vector<std::array<int, 2>> exps_;
  ScalarBasis interior_;
  Eigen::FullPivLU<MatrixXd> lu_;
  double dof_condition_ = 0.0;
};

inline RTBasis build_rt_basis(int degree, const CellGeometry& g) { return RTBasis(degree, g); }

}  // namespace wgbf
