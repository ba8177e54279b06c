#pragma once

#include <Eigen/SparseLU>
#ifdef WGBF_HAVE_KLU
#include <Eigen/KLUSupport>
#endif

#include "wgbf/assembly.hpp"

namespace wgbf {

/// Static condensation of the linearized saddle systems onto the edge-trace
/// skeleton (trace velocity + trace pressure).
///
/// Interior velocity and pressure couple only within their cell, so each
/// Picard iteration eliminates them by dense local solves and factorizes
/// the much better-structured skeleton system. The pressure-mean condition
/// is imposed by pinning one trace-pressure DOF during the solve and then
/// shifting by the constant pressure pair (the kernel direction), which
/// reproduces the Lagrange-multiplier solution exactly (the multiplier
/// vanishes at it).
class CondensedSolver {
 public:
  CondensedSolver(const Mesh& mesh, const LocalOperatorCache& cache, const DofMap& dof, double nu,
                  double inv_dt, bool reuse_pattern = true)
      : mesh_(mesh), cache_(cache), dof_(dof), inv_dt_(inv_dt), reuse_(reuse_pattern) {
    const int nc = mesh.n_cells();
    aloc_.reserve(nc);
    mloc_.reserve(nc);
    for (int c = 0; c < nc; ++c) {
      aloc_.push_back(detail::local_stiffness(cache.cell[c], dof, nu));
      mloc_.push_back(detail::local_mass(cache.cell[c]));
      domain_area_ += mesh.cell_area[c];
    }

    // skeleton numbering: all trace velocity then all trace pressure
    n_sk_ = dof.n_ub + dof.n_pb;
    sk_red_.assign(n_sk_, 0);
    for (int e : mesh.boundary_edges)
      for (int comp = 0; comp < 2; ++comp)
        for (int k = 0; k < dof.dim_edge; ++k)
          sk_red_[sk_of_full(dof.u_trace(e, comp, k))] = -1;
    pinned_full_ = dof.p_trace(0, 0);
    sk_red_[sk_of_full(pinned_full_)] = -1;
    for (int i = 0; i < n_sk_; ++i)
      if (sk_red_[i] == 0) sk_red_[i] = n_red_++;

    cell_sk_.resize(nc);
    for (int c = 0; c < nc; ++c) {
      const CellOps& op = cache.cell[c];
      auto& sk = cell_sk_[c];
      sk.reserve(9 * dof.dim_edge);
      for (int comp = 0; comp < 2; ++comp)
        for (int le = 0; le < 3; ++le)
          for (int k = 0; k < dof.dim_edge; ++k)
            sk.push_back(dof.u_trace(op.geom.edge_index[le], comp, k));
      for (int le = 0; le < 3; ++le)
        for (int k = 0; k < dof.dim_edge; ++k)
          sk.push_back(dof.p_trace(op.geom.edge_index[le], k));
    }
  }

  /// Solves one frozen-coefficient step; returns the full DOF vector with
  /// mean-zero interior pressure and zero multiplier entry.
  Eigen::VectorXd solve(const Eigen::VectorXd& kappa, double alpha, double r, bool convection,
                        const Eigen::VectorXd& bc, const Eigen::VectorXd& rhs_vel) {
    const int nv = dof_.dim_vel, np = dof_.dim_pre, ne = dof_.dim_edge;
    const int ni = 2 * nv + np;
    const int ns = 9 * ne;
    const int nc = mesh_.n_cells();

    std::vector<MatrixXd> rec_x(nc);  // L^{-1} Q, for interior recovery
    std::vector<Eigen::VectorXd> rec_y(nc);

    std::vector<Triplet> ts;
    ts.reserve(static_cast<size_t>(nc) * ns * ns);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_red_);

    MatrixXd vloc(dof_.dim_vel + 3 * ne, dof_.dim_vel + 3 * ne);
    MatrixXd L(ni, ni), Q(ni, ns), R(ns, ni), S(ns, ns);
    Eigen::VectorXd bI(ni);

    for (int c = 0; c < nc; ++c) {
      const CellOps& op = cache_.cell[c];
      const int nvloc = op.n_vloc;

      vloc = aloc_[c];
      vloc.block(0, 0, nv, nv) += inv_dt_ * mloc_[c];
      if (alpha != 0.0)
        vloc.block(0, 0, nv, nv) += detail::local_damping(op, dof_, kappa, c, alpha, r);
      if (convection) {
        const MatrixXd eloc = detail::local_convection(op, dof_, kappa, c);
        vloc.block(0, 0, nv, nvloc) += 0.5 * eloc;
        vloc.block(0, 0, nvloc, nv) -= 0.5 * eloc.transpose();
      }

      L.setZero();
      Q.setZero();
      R.setZero();
      S.setZero();
      L.block(0, 0, nv, nv) = vloc.block(0, 0, nv, nv);
      L.block(nv, nv, nv, nv) = vloc.block(0, 0, nv, nv);
      L.block(0, 2 * nv, nv, np) = op.Gp.block(0, 0, nv, np);
      L.block(nv, 2 * nv, nv, np) = op.Gp.block(nv, 0, nv, np);
      L.block(2 * nv, 0, np, nv) = op.Gp.block(0, 0, nv, np).transpose();
      L.block(2 * nv, nv, np, nv) = op.Gp.block(nv, 0, nv, np).transpose();

      for (int comp = 0; comp < 2; ++comp) {
        Q.block(comp * nv, comp * 3 * ne, nv, 3 * ne) = vloc.block(0, nv, nv, 3 * ne);
        Q.block(comp * nv, 6 * ne, nv, 3 * ne) = op.Gp.block(comp * nv, np, nv, 3 * ne);
        R.block(comp * 3 * ne, comp * nv, 3 * ne, nv) = vloc.block(nv, 0, 3 * ne, nv);
        R.block(6 * ne, comp * nv, 3 * ne, nv) =
            op.Gp.block(comp * nv, np, nv, 3 * ne).transpose();
        S.block(comp * 3 * ne, comp * 3 * ne, 3 * ne, 3 * ne) =
            vloc.block(nv, nv, 3 * ne, 3 * ne);
      }

      for (int i = 0; i < nv; ++i) {
        bI[i] = rhs_vel[dof_.u_interior(c, 0, i)];
        bI[nv + i] = rhs_vel[dof_.u_interior(c, 1, i)];
      }
      bI.tail(np).setZero();

      Eigen::FullPivLU<MatrixXd> lu(L);
      if (lu.rank() < ni)
        throw std::runtime_error("condensed solve: local rank defect in cell " +
                                 std::to_string(c));
      rec_x[c] = lu.solve(Q);
      rec_y[c] = lu.solve(bI);

      const MatrixXd ssch = S - R * rec_x[c];
      const Eigen::VectorXd gsch = -(R * rec_y[c]);
      const auto& sk = cell_sk_[c];
      for (int i = 0; i < ns; ++i) {
        const int ri = sk_red_[sk_of_full(sk[i])];
        if (ri < 0) continue;
        rhs[ri] += gsch[i];
        for (int j = 0; j < ns; ++j) {
          const int rj = sk_red_[sk_of_full(sk[j])];
          const double v = ssch(i, j);
          if (rj < 0)
            rhs[ri] -= v * bound_value(sk[j], bc);
          else
            ts.emplace_back(ri, rj, v);
        }
      }
    }

    SparseMat skel(n_red_, n_red_);
    skel.setFromTriplets(ts.begin(), ts.end());
    if (!analyzed_ || !reuse_) {
      lu_.analyzePattern(skel);
      analyzed_ = true;
    }
    lu_.factorize(skel);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("condensed solve: singular skeleton factorization");
    Eigen::VectorXd xr = lu_.solve(rhs);
    {
      Eigen::VectorXd resid = rhs - skel * xr;
      const double scale = std::max(rhs.norm(), 1e-300);
      if (resid.norm() > 1e-14 * scale) xr += lu_.solve(resid);
      resid = rhs - skel * xr;
      if (resid.norm() > 1e-10 * scale)
        throw std::runtime_error("condensed solve: skeleton residual above tolerance");
    }

    // expand: skeleton values (with boundary data), then interior recovery
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dof_.total);
    for (int e = 0; e < dof_.n_edges; ++e) {
      for (int comp = 0; comp < 2; ++comp)
        for (int k = 0; k < ne; ++k) {
          const int f = dof_.u_trace(e, comp, k);
          const int rr = sk_red_[sk_of_full(f)];
          x[f] = rr >= 0 ? xr[rr] : bc[f];
        }
      for (int k = 0; k < ne; ++k) {
        const int f = dof_.p_trace(e, k);
        const int rr = sk_red_[sk_of_full(f)];
        x[f] = rr >= 0 ? xr[rr] : 0.0;
      }
    }
    Eigen::VectorXd xsk(ns);
    for (int c = 0; c < nc; ++c) {
      const auto& sk = cell_sk_[c];
      for (int i = 0; i < ns; ++i) xsk[i] = x[sk[i]];
      const Eigen::VectorXd xi = rec_y[c] - rec_x[c] * xsk;
      for (int i = 0; i < nv; ++i) {
        x[dof_.u_interior(c, 0, i)] = xi[i];
        x[dof_.u_interior(c, 1, i)] = xi[nv + i];
      }
      for (int i = 0; i < np; ++i) x[dof_.p_interior(c, i)] = xi[2 * nv + i];
    }

    // shift by the constant pressure pair to zero the interior mean
    double mean = 0.0;
    for (int c = 0; c < nc; ++c) {
      const CellOps& op = cache_.cell[c];
      for (int i = 0; i < np; ++i) mean += op.pre_one[i] * x[dof_.p_interior(c, i)];
    }
    const double shift = mean / domain_area_;
    for (int c = 0; c < nc; ++c) {
      const CellOps& op = cache_.cell[c];
      for (int i = 0; i < np; ++i) x[dof_.p_interior(c, i)] -= shift * op.pre_one[i];
    }
    for (int e = 0; e < dof_.n_edges; ++e)
      x[dof_.p_trace(e, 0)] -= shift * std::sqrt(mesh_.edge_h[e]);
    return x;
  }

 private:
  int sk_of_full(int f) const {
    if (f < dof_.n_ui + dof_.n_ub) return f - dof_.n_ui;
    return dof_.n_ub + (f - (dof_.n_ui + dof_.n_ub + dof_.n_pi));
  }
  double bound_value(int f, const Eigen::VectorXd& bc) const {
    return f == pinned_full_ ? 0.0 : bc[f];
  }

  const Mesh& mesh_;
  const LocalOperatorCache& cache_;
  const DofMap& dof_;
  double inv_dt_ = 1.0;
  double domain_area_ = 0.0;
  std::vector<MatrixXd> aloc_, mloc_;
  int n_sk_ = 0, n_red_ = 0, pinned_full_ = -1;
  std::vector<int> sk_red_;
  std::vector<std::vector<int>> cell_sk_;
#ifdef WGBF_HAVE_KLU
  Eigen::KLU<SparseMat> lu_;
#else
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu_;
#endif
  bool reuse_ = true, analyzed_ = false;
};

}  // namespace wgbf
