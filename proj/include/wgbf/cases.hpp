#pragma once

#include <cmath>
#include <random>
#include <string>

#include "wgbf/solver.hpp"

namespace wgbf {

/// A manufactured flow with closed-form derivatives. The forcing follows
/// from the momentum equation, so overriding the physical parameters keeps
/// the pair (u, p) exact for the modified run.
struct ManufacturedCase {
  std::string name;
  double nu = 1.0, alpha = 1.0, r = 5.0, T = 1.0;

  TimeVectorField u;
  TimeMatrixField grad_u;   // (i,j) = d u_i / d x_j
  TimeVectorField du_dt;
  TimeVectorField laplace_u;
  TimeScalarField p;
  TimeVectorField grad_p;

  TimeVectorField forcing(double nu_, double alpha_, double r_) const {
    auto uf = u;
    auto gf = grad_u;
    auto ut = du_dt;
    auto lap = laplace_u;
    auto gp = grad_p;
    return [=](const Vec2& x, double t) -> Vec2 {
      const Vec2 uv = uf(x, t);
      const Eigen::Matrix2d g = gf(x, t);
      const double mag = uv.norm();
      const double damp = alpha_ == 0.0 ? 0.0 : alpha_ * std::pow(mag, r_ - 2.0);
      return ut(x, t) - nu_ * lap(x, t) + g * uv + damp * uv + gp(x, t);
    };
  }

  Problem problem(double nu_, double alpha_, double r_) const {
    Problem pr;
    pr.forcing = forcing(nu_, alpha_, r_);
    pr.dirichlet = u;
    auto uf = u;
    pr.initial = [uf](const Vec2& x) { return uf(x, 0.0); };
    return pr;
  }
  Problem problem() const { return problem(nu, alpha, r); }
};

namespace detail {

// the quartic bubble g(s) = s^2 (s-1)^2 and its derivatives
inline double bub(double s) { return s * s * (s - 1.0) * (s - 1.0); }
inline double bub1(double s) { return 2.0 * s * (s - 1.0) * (2.0 * s - 1.0); }
inline double bub2(double s) { return 12.0 * s * s - 12.0 * s + 2.0; }
inline double bub3(double s) { return 24.0 * s - 12.0; }

/// Stream-function family amp * g(x) g(y) tau(t); both tabulated examples
/// are instances with different amplitude, time factor and pressure.
inline ManufacturedCase stream_case(std::string name, double amp,
                                    const std::function<double(double)>& tau,
                                    const std::function<double(double)>& dtau,
                                    const TimeScalarField& pressure,
                                    const TimeVectorField& pressure_grad) {
  ManufacturedCase mc;
  mc.name = std::move(name);
  mc.u = [=](const Vec2& x, double t) -> Vec2 {
    return {amp * bub(x.x()) * bub1(x.y()) * tau(t), -amp * bub1(x.x()) * bub(x.y()) * tau(t)};
  };
  mc.grad_u = [=](const Vec2& x, double t) -> Eigen::Matrix2d {
    Eigen::Matrix2d g;
    g(0, 0) = amp * bub1(x.x()) * bub1(x.y()) * tau(t);
    g(0, 1) = amp * bub(x.x()) * bub2(x.y()) * tau(t);
    g(1, 0) = -amp * bub2(x.x()) * bub(x.y()) * tau(t);
    g(1, 1) = -amp * bub1(x.x()) * bub1(x.y()) * tau(t);
    return g;
  };
  mc.du_dt = [=](const Vec2& x, double t) -> Vec2 {
    return {amp * bub(x.x()) * bub1(x.y()) * dtau(t), -amp * bub1(x.x()) * bub(x.y()) * dtau(t)};
  };
  mc.laplace_u = [=](const Vec2& x, double t) -> Vec2 {
    return {amp * (bub2(x.x()) * bub1(x.y()) + bub(x.x()) * bub3(x.y())) * tau(t),
            -amp * (bub3(x.x()) * bub(x.y()) + bub1(x.x()) * bub2(x.y())) * tau(t)};
  };
  mc.p = pressure;
  mc.grad_p = pressure_grad;
  return mc;
}

/// Load checks: pointwise solenoidality and homogeneous boundary values.
inline void verify_case(const ManufacturedCase& mc) {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 x(unif(rng), unif(rng));
    const double t = unif(rng);
    const Eigen::Matrix2d g = mc.grad_u(x, t);
    if (std::abs(g(0, 0) + g(1, 1)) > 1e-12)
      throw std::logic_error(mc.name + ": manufactured velocity is not divergence-free");
  }
  for (int i = 0; i < 100; ++i) {
    const double s = unif(rng), t = unif(rng);
    for (const Vec2& x : {Vec2(s, 0.0), Vec2(s, 1.0), Vec2(0.0, s), Vec2(1.0, s)})
      if (mc.u(x, t).norm() > 1e-12)
        throw std::logic_error(mc.name + ": manufactured velocity does not vanish on the boundary");
  }
}

}  // namespace detail

/// Manufactured-solution registry. Both cases live on the unit square with
/// homogeneous Dirichlet data.
inline ManufacturedCase registry(const std::string& name) {
  ManufacturedCase mc;
  if (name == "ex81") {
    mc = detail::stream_case(
        "ex81", 2.5, [](double t) { return std::cos(t); }, [](double t) { return -std::sin(t); },
        [](const Vec2& x, double t) {
          return 10.0 * (2.0 * x.x() - 1.0) * (2.0 * x.y() - 1.0) * std::cos(t);
        },
        [](const Vec2& x, double t) -> Vec2 {
          return {20.0 * (2.0 * x.y() - 1.0) * std::cos(t),
                  20.0 * (2.0 * x.x() - 1.0) * std::cos(t)};
        });
    mc.nu = 1.0;
    mc.alpha = 1.0;
    mc.r = 5.0;
    mc.T = 1.0;
  } else if (name == "ex82") {
    mc = detail::stream_case(
        "ex82", 0.5, [](double t) { return std::exp(-t); }, [](double t) { return -std::exp(-t); },
        [](const Vec2& x, double t) {
          return (x.x() * x.x() - x.y() * x.y()) * std::exp(-t);
        },
        [](const Vec2& x, double t) -> Vec2 {
          return {2.0 * x.x() * std::exp(-t), -2.0 * x.y() * std::exp(-t)};
        });
    mc.nu = 1.0;
    mc.alpha = 0.1;
    mc.r = 3.5;
    mc.T = 1.0;
  } else {
    throw std::invalid_argument("unknown manufactured case: " + name);
  }
  detail::verify_case(mc);
  return mc;
}

/// Lid-driven cavity on the unit square: no forcing, unit lid speed along
/// y=1, homogeneous walls, fluid at rest initially.
inline Problem cavity_problem() {
  Problem pr;
  pr.forcing = [](const Vec2&, double) { return Vec2::Zero().eval(); };
  pr.dirichlet = [](const Vec2& x, double) -> Vec2 {
    return x.y() > 1.0 - 1e-12 ? Vec2(1.0, 0.0) : Vec2(0.0, 0.0);
  };
  pr.initial = [](const Vec2&) { return Vec2::Zero().eval(); };
  return pr;
}

/// Baseline cavity-demo configuration (parameters vary per scenario).
inline RunConfig cavity_defaults() {
  RunConfig cfg;
  cfg.problem = "cavity";
  cfg.m = 2;
  cfg.l = 2;
  cfg.nu = 0.1;
  cfg.alpha = 1.0;
  cfg.r = 3.0;
  cfg.T = 0.5;
  cfg.dt = 0.01;
  cfg.nx = 20;
  cfg.ny = 20;
  return cfg;
}

}  // namespace wgbf
