#include <catch2/catch.hpp>
#include <random>

#include "form_oracle.hpp"
#include "test_helpers.hpp"
#include "wgbf/cases.hpp"

using namespace wgbf;
using wgbf::testing::Discretization;
using wgbf::testing::FormOracle;
using wgbf::testing::jiggled_mesh;
using wgbf::testing::Poly2;
using wgbf::testing::random_state;
using wgbf::testing::smooth_state;

TEST_CASE("DOF counts match the closed-form formulas") {
  {
    const Mesh m1 = compute_topology({{0, 0}, {1, 0}, {0, 1}}, {{{0, 1, 2}}});
    CHECK(build_dof_map(m1, 1).total == 26);
  }
  const Mesh m4 = generate_uniform(4, 4);
  CHECK(build_dof_map(m4, 1).total == 561);
  CHECK(build_dof_map(m4, 2).total == 985);
  CHECK_THROWS_AS(build_dof_map(m4, 0), std::invalid_argument);
}

TEST_CASE("viscous form equals the energy norm (a2)") {
  std::mt19937 rng(101);
  for (int m : {1, 2}) {
    for (int l : {m - 1, m}) {
      const Discretization d(jiggled_mesh(3, 23), m, l);
      const double nu = 0.7;
      const auto blocks = assemble_constant_blocks(d.mesh, d.cache, d.dof, nu);
      for (int trial = 0; trial < 20; ++trial) {
        FieldState s = FieldState::zero(d.dof);
        s.x = random_state(d.dof, rng);
        const double quad = s.x.head(d.dof.n_velocity())
                                .dot(blocks.A * s.x.head(d.dof.n_velocity()));
        const double nrm = energy_norm(d.mesh, d.cache, d.dof, s);
        CHECK(quad == Approx(nu * nrm * nrm).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("A is symmetric and kills global constants") {
  std::mt19937 rng(103);
  const Discretization d(jiggled_mesh(2, 29), 2, 1);
  const auto blocks = assemble_constant_blocks(d.mesh, d.cache, d.dof, 1.0);

  const SparseMat at = SparseMat(blocks.A.transpose());
  double asym = 0.0;
  for (int k = 0; k < blocks.A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(blocks.A, k); it; ++it)
      asym = std::max(asym, std::abs(it.value() - at.coeff(it.row(), it.col())));
  CHECK(asym < 1e-12);

  // v_i = v_b = (c1, c2) everywhere
  FieldState s = FieldState::zero(d.dof);
  const Vec2 cvec(1.3, -0.4);
  for (int c = 0; c < d.mesh.n_cells(); ++c) {
    const CellOps& op = d.cache.cell[c];
    for (int comp = 0; comp < 2; ++comp) {
      const Eigen::VectorXd ci = l2_project_element(
          [&](const Vec2&) { return cvec[comp]; }, op.geom, op.vel, 4);
      for (int i = 0; i < d.dof.dim_vel; ++i) s.x[d.dof.u_interior(c, comp, i)] = ci[i];
    }
  }
  for (int e = 0; e < d.mesh.n_edges(); ++e) {
    EdgeBasis eb(d.dof.m, d.mesh.edge_h[e]);
    const Vec2 a = d.mesh.vertices[d.mesh.edges[e][0]], b = d.mesh.vertices[d.mesh.edges[e][1]];
    for (int comp = 0; comp < 2; ++comp) {
      const Eigen::VectorXd cb =
          l2_project_edge([&](const Vec2&) { return cvec[comp]; }, a, b, eb, 4);
      for (int k = 0; k < d.dof.dim_edge; ++k) s.x[d.dof.u_trace(e, comp, k)] = cb[k];
    }
  }
  const Eigen::VectorXd av = blocks.A * s.x.head(d.dof.n_velocity());
  CHECK(av.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("divergence-free interpolants lie in the kernel of the coupling form") {
  std::mt19937 rng(107);
  for (int m : {1, 2}) {
    const Discretization d(jiggled_mesh(3, 31), m, m - 1);
    const auto blocks = assemble_constant_blocks(d.mesh, d.cache, d.dof, 1.0);
    const FieldState s = smooth_state(d, rng);
    const Eigen::VectorXd resid = blocks.B.transpose() * s.x.head(d.dof.n_velocity());
    const double scale = 1.0 + s.x.head(d.dof.n_velocity()).norm();
    INFO("m=" << m);
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-9 * scale);
  }
}

TEST_CASE("damping form: zero cases and the r-norm identity (c2)") {
  std::mt19937 rng(109);
  const Discretization d(generate_uniform(8, 8), 1, 0);

  SECTION("kappa = 0 and alpha = 0 give vanishing matrices") {
    FieldState zero = FieldState::zero(d.dof);
    const SparseMat c0 = assemble_damping(d.mesh, d.cache, d.dof, zero, 1.0, 5.0);
    CHECK(c0.coeffs().cwiseAbs().maxCoeff() == 0.0);
    FieldState s = FieldState::zero(d.dof);
    s.x = random_state(d.dof, rng);
    const SparseMat ca = assemble_damping(d.mesh, d.cache, d.dof, s, 0.0, 5.0);
    CHECK(ca.nonZeros() == 0);
  }

  SECTION("C is symmetric positive semidefinite on the interior block") {
    FieldState kappa = FieldState::zero(d.dof);
    kappa.x = random_state(d.dof, rng);
    const SparseMat C = assemble_damping(d.mesh, d.cache, d.dof, kappa, 1.3, 3.5);
    const MatrixXd dense = MatrixXd(C);
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-12 * dense.cwiseAbs().maxCoeff());
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd v = random_state(d.dof, rng).head(d.dof.n_velocity());
      CHECK(v.dot(C * v) >= -1e-12 * v.squaredNorm());
    }
    // trace DOFs never enter
    for (int i = d.dof.n_ui; i < d.dof.n_velocity(); ++i)
      CHECK(dense.row(i).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("u' C(u) u equals alpha ||u_hi||_{0,r}^r against boosted quadrature") {
    // fine enough that the default-rule approximation of the smooth
    // |u|^{r-2} weight is converged past the tolerance
    const Discretization d16(generate_uniform(16, 16), 1, 0);
    const Discretization& d = d16;
    for (double r : {5.0, 3.5}) {
      const double alpha = 0.8;
      const FieldState s = smooth_state(d, rng, 2.0);
      const SparseMat C = assemble_damping(d.mesh, d.cache, d.dof, s, alpha, r);
      const double lhs = s.x.head(d.dof.n_velocity())
                             .dot(C * s.x.head(d.dof.n_velocity()));
      // independent finer-quadrature r-norm
      const auto rule = triangle_quadrature(kMaxQuadDegree);
      double rnorm = 0.0;
      PointList pts;
      Eigen::VectorXd w;
      for (int c = 0; c < d.mesh.n_cells(); ++c) {
        const CellOps& op = d.cache.cell[c];
        map_to_cell(op.geom.v, rule, pts, w);
        const MatrixXd phi = op.vel.values(pts);
        Eigen::VectorXd cx(d.dof.dim_vel), cy(d.dof.dim_vel);
        for (int i = 0; i < d.dof.dim_vel; ++i) {
          cx[i] = s.x[d.dof.u_interior(c, 0, i)];
          cy[i] = s.x[d.dof.u_interior(c, 1, i)];
        }
        const Eigen::VectorXd ux = phi * cx, uy = phi * cy;
        for (int q = 0; q < rule.size(); ++q)
          rnorm += w[q] * std::pow(ux[q] * ux[q] + uy[q] * uy[q], r / 2.0);
      }
      INFO("r = " << r);
      CHECK(lhs == Approx(alpha * rnorm).epsilon(1e-8));
    }
  }
}

TEST_CASE("damping assembly is insensitive to a quadrature boost on smooth fields") {
  const Mesh mesh = generate_uniform(8, 8);
  const DofMap dof = build_dof_map(mesh, 1);
  const auto cache = build_cache(mesh, dof, 0);  // default 3m+4
  const auto boosted = build_cache(mesh, dof, 0, 3 * 1 + 8, 3 * 1 + 8);

  // smooth frozen field bounded away from zero, so |kappa|^{r-2} is analytic
  FieldState s = FieldState::zero(dof);
  const auto k1 = [](const Vec2& p) { return 2.0 + p.x() * p.x() * p.y() - 0.5 * p.y(); };
  const auto k2 = [](const Vec2& p) { return 1.5 + p.x() * p.y(); };
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const Eigen::VectorXd c1 = l2_project_element(k1, op.geom, op.vel, 8);
    const Eigen::VectorXd c2 = l2_project_element(k2, op.geom, op.vel, 8);
    for (int i = 0; i < dof.dim_vel; ++i) {
      s.x[dof.u_interior(c, 0, i)] = c1[i];
      s.x[dof.u_interior(c, 1, i)] = c2[i];
    }
  }
  for (double r : {5.0, 3.5}) {
    const MatrixXd c1 = MatrixXd(assemble_damping(mesh, cache, dof, s, 1.0, r));
    const MatrixXd c2 = MatrixXd(assemble_damping(mesh, boosted, dof, s, 1.0, r));
    const double scale = c1.cwiseAbs().maxCoeff();
    const double diff = (c1 - c2).cwiseAbs().maxCoeff();
    INFO("r = " << r << " scale " << scale << " diff " << diff);
    CHECK(diff < 1e-8 * scale);
  }
}

TEST_CASE("convection form: skew symmetry (d0) and zero cases") {
  std::mt19937 rng(113);
  const Discretization d(jiggled_mesh(2, 37), 2, 2);

  FieldState zero = FieldState::zero(d.dof);
  const SparseMat d0 = assemble_convection(d.mesh, d.cache, d.dof, zero);
  CHECK(d0.coeffs().cwiseAbs().maxCoeff() == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    FieldState kappa = FieldState::zero(d.dof);
    kappa.x = random_state(d.dof, rng);
    const SparseMat D = assemble_convection(d.mesh, d.cache, d.dof, kappa);
    const Eigen::VectorXd v = random_state(d.dof, rng).head(d.dof.n_velocity());
    const double quad = v.dot(D * v);
    const double scale = v.squaredNorm() * (1.0 + kappa.x.cwiseAbs().maxCoeff());
    CHECK(std::abs(quad) < 1e-12 * scale);
  }
}

TEST_CASE("single-cell convection form matches the mass-solve oracle tightly") {
  std::mt19937 rng(2251);
  for (int m : {1, 2}) {
    const Discretization d(compute_topology({{0, 0}, {1, 0}, {0.2, 0.9}}, {{{0, 1, 2}}}), m,
                           m - 1);
    const FormOracle oracle(d);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd xu = random_state(d.dof, rng);
      const Eigen::VectorXd xv = random_state(d.dof, rng);
      FieldState kappa = FieldState::zero(d.dof);
      kappa.x = random_state(d.dof, rng);
      const SparseMat D = assemble_convection(d.mesh, d.cache, d.dof, kappa);
      const double main =
          xv.head(d.dof.n_velocity()).dot(D * xu.head(d.dof.n_velocity()));
      const double ref = oracle.convection(kappa.x, xu, xv);
      INFO("m=" << m);
      CHECK(std::abs(main - ref) < 1e-10 * (1.0 + std::abs(ref)));
    }
  }
}

TEST_CASE("every assembled form matches the dense-quadrature oracle") {
  std::mt19937 rng(127);
  for (int m : {1, 2}) {
    const int l = m - 1;
    const Discretization d(generate_uniform(1, 1), m, l);  // 2-cell mesh
    const FormOracle oracle(d);
    const double nu = 0.6, alpha = 0.9, r = 4.0;  // r=4: polynomial damping weight
    const auto blocks = assemble_constant_blocks(d.mesh, d.cache, d.dof, nu);

    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd xu = random_state(d.dof, rng);
      const Eigen::VectorXd xv = random_state(d.dof, rng);
      const Eigen::VectorXd xk = random_state(d.dof, rng);
      FieldState kappa = FieldState::zero(d.dof);
      kappa.x = xk;
      const auto u = xu.head(d.dof.n_velocity());
      const auto v = xv.head(d.dof.n_velocity());
      const auto qp = xv.segment(d.dof.pressure_offset(), d.dof.n_pressure());

      INFO("m=" << m << " trial=" << trial);
      {
        const double main = v.dot(blocks.M * u);
        const double ref = oracle.mass(xu, xv);
        CHECK(main == Approx(ref).margin(1e-9 * (1 + std::abs(ref))));
      }
      {
        const double main = v.dot(blocks.A * u);
        const double ref = oracle.viscous(xu, xv, l, nu);
        CHECK(main == Approx(ref).margin(1e-9 * (1 + std::abs(ref))));
      }
      {
        const double main = u.dot(blocks.B * qp);
        const double ref = oracle.pressure_coupling(xu, xv);
        CHECK(main == Approx(ref).margin(1e-9 * (1 + std::abs(ref))));
      }
      {
        const SparseMat C = assemble_damping(d.mesh, d.cache, d.dof, kappa, alpha, r);
        const double main = v.dot(C * u);
        const double ref = oracle.damping(xk, xu, xv, alpha, r);
        CHECK(main == Approx(ref).margin(1e-9 * (1 + std::abs(ref))));
      }
      {
        const SparseMat D = assemble_convection(d.mesh, d.cache, d.dof, kappa);
        const double main = v.dot(D * u);
        const double ref = oracle.convection(xk, xu, xv);
        CHECK(main == Approx(ref).margin(1e-9 * (1 + std::abs(ref))));
      }
    }
  }
}

TEST_CASE("load vector") {
  const Discretization d(jiggled_mesh(2, 41), 1, 0);

  SECTION("zero forcing") {
    const auto f = assemble_load(d.mesh, d.cache, d.dof,
                                 [](const Vec2&, double) { return Vec2::Zero().eval(); }, 0.0);
    CHECK(f.norm() == 0.0);
  }

  SECTION("constant forcing against the quadrature oracle") {
    const auto f = assemble_load(d.mesh, d.cache, d.dof,
                                 [](const Vec2&, double) { return Vec2(1.0, 0.0).eval(); }, 0.0);
    for (int c = 0; c < d.mesh.n_cells(); ++c) {
      const CellOps& op = d.cache.cell[c];
      // the constant basis function is 1/sqrt(area): entry = sqrt(area)
      CHECK(f[d.dof.u_interior(c, 0, 0)] == Approx(std::sqrt(op.geom.area)).epsilon(1e-12));
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(op.qw.size());
      const Eigen::VectorXd ref = op.vel_val.transpose() * (op.qw.asDiagonal() * ones);
      for (int i = 0; i < d.dof.dim_vel; ++i) {
        CHECK(f[d.dof.u_interior(c, 0, i)] == Approx(ref[i]).margin(1e-12));
        CHECK(f[d.dof.u_interior(c, 1, i)] == 0.0);
      }
    }
  }

  SECTION("manufactured forcing against an independent evaluation") {
    const auto mc = registry("ex81");
    const auto ffield = mc.forcing(mc.nu, mc.alpha, mc.r);
    const auto f = assemble_load(d.mesh, d.cache, d.dof, ffield, 0.0);
    double worst = 0.0, scale = 0.0;
    for (int c = 0; c < d.mesh.n_cells(); ++c) {
      const CellOps& op = d.cache.cell[c];
      const auto basis = build_scalar_basis(d.dof.m, op.geom);  // fresh basis, same span
      const MatrixXd phi = basis.values(op.qpts);
      for (int i = 0; i < d.dof.dim_vel; ++i) {
        double ex = 0.0, ey = 0.0;
        for (int q = 0; q < op.qw.size(); ++q) {
          const Vec2 fv = ffield(op.qpts.row(q).transpose(), 0.0);
          ex += op.qw[q] * fv.x() * phi(q, i);
          ey += op.qw[q] * fv.y() * phi(q, i);
        }
        worst = std::max({worst, std::abs(f[d.dof.u_interior(c, 0, i)] - ex),
                          std::abs(f[d.dof.u_interior(c, 1, i)] - ey)});
        scale = std::max({scale, std::abs(ex), std::abs(ey)});
      }
    }
    CHECK(worst < 1e-10 * (1.0 + scale));
  }
}

TEST_CASE("Dirichlet handling") {
  const Discretization d(generate_uniform(4, 4), 1, 0);
  const auto blocks = assemble_constant_blocks(d.mesh, d.cache, d.dof, 1.0);
  const auto red = build_reduction(d.mesh, d.dof);
  const SparseMat empty(d.dof.n_velocity(), d.dof.n_velocity());
  const Eigen::VectorXd rhs_vel = Eigen::VectorXd::Ones(d.dof.n_velocity());

  SECTION("homogeneous data is pure elimination") {
    const Eigen::VectorXd bc = Eigen::VectorXd::Zero(d.dof.total);
    const auto sys = build_saddle_system(blocks, empty, empty, 1.0, d.dof, red, bc, rhs_vel);
    for (int i = 0; i < red.n; ++i) {
      const int f = red.to_full[i];
      const double expect = f < d.dof.n_velocity() ? rhs_vel[f] : 0.0;
      CHECK(sys.rhs[i] == expect);
    }
  }

  SECTION("exact-solution trace of the manufactured case behaves like zero data") {
    const auto mc = registry("ex81");
    const Eigen::VectorXd bc = project_dirichlet(d.mesh, d.cache, d.dof, mc.u, 0.37);
    CHECK(bc.cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("cavity lid values are represented exactly") {
    const Eigen::VectorXd bc = project_dirichlet(
        d.mesh, d.cache, d.dof, cavity_problem().dirichlet, 0.0);
    const auto rule = edge_quadrature(6);
    int lid_edges = 0;
    for (int e : d.mesh.boundary_edges) {
      EdgeBasis eb(d.dof.m, d.mesh.edge_h[e]);
      const MatrixXd psi = eb.values(rule.points);
      Eigen::VectorXd cx(d.dof.dim_edge), cy(d.dof.dim_edge);
      for (int k = 0; k < d.dof.dim_edge; ++k) {
        cx[k] = bc[d.dof.u_trace(e, 0, k)];
        cy[k] = bc[d.dof.u_trace(e, 1, k)];
      }
      const bool on_lid = d.mesh.edge_midpoint[e].y() > 1.0 - 1e-12;
      if (on_lid) ++lid_edges;
      for (int q = 0; q < rule.size(); ++q) {
        CHECK((psi.row(q) * cx)(0) == Approx(on_lid ? 1.0 : 0.0).margin(1e-12));
        CHECK((psi.row(q) * cy)(0) == Approx(0.0).margin(1e-12));
      }
    }
    CHECK(lid_edges == 4);
  }
}
