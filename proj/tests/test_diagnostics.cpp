#include <catch2/catch.hpp>
#include <random>

#include "test_helpers.hpp"
#include "wgbf/cases.hpp"

using namespace wgbf;
using wgbf::testing::jiggled_mesh;

TEST_CASE("energy norm") {
  const Mesh mesh = jiggled_mesh(3, 61);
  const DofMap dof = build_dof_map(mesh, 2);
  const auto cache = build_cache(mesh, dof, 2);  // l = m

  SECTION("zero state") {
    CHECK(energy_norm(mesh, cache, dof, FieldState::zero(dof)) == 0.0);
  }

  SECTION("conforming linear field reduces to the classical gradient norm") {
    // v = (2x + 3y, x - y) with matching traces: no jumps, weak = classical
    FieldState s = FieldState::zero(dof);
    const auto f1 = [](const Vec2& p) { return 2 * p.x() + 3 * p.y(); };
    const auto f2 = [](const Vec2& p) { return p.x() - p.y(); };
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const CellOps& op = cache.cell[c];
      const Eigen::VectorXd c1 = l2_project_element(f1, op.geom, op.vel, 6);
      const Eigen::VectorXd c2 = l2_project_element(f2, op.geom, op.vel, 6);
      for (int i = 0; i < dof.dim_vel; ++i) {
        s.x[dof.u_interior(c, 0, i)] = c1[i];
        s.x[dof.u_interior(c, 1, i)] = c2[i];
      }
    }
    for (int e = 0; e < mesh.n_edges(); ++e) {
      EdgeBasis eb(dof.m, mesh.edge_h[e]);
      const Vec2 a = mesh.vertices[mesh.edges[e][0]], b = mesh.vertices[mesh.edges[e][1]];
      const Eigen::VectorXd c1 = l2_project_edge(f1, a, b, eb, 6);
      const Eigen::VectorXd c2 = l2_project_edge(f2, a, b, eb, 6);
      for (int k = 0; k < dof.dim_edge; ++k) {
        s.x[dof.u_trace(e, 0, k)] = c1[k];
        s.x[dof.u_trace(e, 1, k)] = c2[k];
      }
    }
    // ||grad v||^2 = (4 + 9) + (1 + 1) = 15 on the unit square
    CHECK(energy_norm(mesh, cache, dof, s) == Approx(std::sqrt(15.0)).epsilon(1e-10));
  }
}

TEST_CASE("error report") {
  const auto mc = registry("ex81");
  const Mesh mesh = generate_uniform(8, 8);
  const DofMap dof = build_dof_map(mesh, 1);
  const auto cache = build_cache(mesh, dof, 0);

  SECTION("projection of the exact solution sits at projection accuracy") {
    auto project_all = [&](const Mesh& msh, const DofMap& dm, const LocalOperatorCache& ca) {
      FieldState s =
          project_initial(msh, ca, dm, [&](const Vec2& p) { return mc.u(p, 0.0); }).state;
      for (int c = 0; c < msh.n_cells(); ++c) {
        const CellOps& op = ca.cell[c];
        const Eigen::VectorXd cp = l2_project_element(
            [&](const Vec2& p) { return mc.p(p, 0.0); }, op.geom, op.pre, ca.quad_degree);
        for (int i = 0; i < dm.dim_pre; ++i) s.x[dm.p_interior(c, i)] = cp[i];
      }
      return errors_vs_exact(msh, ca, dm, s, mc.u, mc.grad_u, mc.p, 0.0);
    };
    const auto rep = project_all(mesh, dof, cache);
    // L2 velocity at the O(h^2) projection level, far below the ~0.22
    // solver error of the same mesh
    CHECK(rep.rel_l2_velocity > 0.0);
    CHECK(rep.rel_l2_velocity < 0.05);

    // refinement scales like O(h^{m+1}) / O(h^m)
    const Mesh fine = generate_uniform(16, 16);
    const DofMap fdof = build_dof_map(fine, 1);
    const auto fcache = build_cache(fine, fdof, 0);
    const auto frep = project_all(fine, fdof, fcache);
    const double rate_u = std::log2(rep.rel_l2_velocity / frep.rel_l2_velocity);
    const double rate_p = std::log2(rep.rel_l2_pressure / frep.rel_l2_pressure);
    CHECK(rate_u == Approx(2.0).margin(0.4));
    CHECK(rate_p == Approx(1.0).margin(0.4));

    // insensitive to a further quadrature boost
    const auto rep2 = errors_vs_exact(
        mesh, cache, dof,
        project_initial(mesh, cache, dof, [&](const Vec2& p) { return mc.u(p, 0.0); }).state,
        mc.u, mc.grad_u, mc.p, 0.0, 8);
    const auto rep1 = errors_vs_exact(
        mesh, cache, dof,
        project_initial(mesh, cache, dof, [&](const Vec2& p) { return mc.u(p, 0.0); }).state,
        mc.u, mc.grad_u, mc.p, 0.0, 4);
    CHECK(rep2.rel_l2_velocity == Approx(rep1.rel_l2_velocity).epsilon(1e-8));
    CHECK(rep2.rel_h1_velocity == Approx(rep1.rel_h1_velocity).epsilon(1e-8));
    CHECK(rep2.rel_grad_velocity == Approx(rep1.rel_grad_velocity).epsilon(1e-8));
  }

  SECTION("zero against zero reports absolute errors with the degenerate flag") {
    const auto zerov = [](const Vec2&, double) { return Vec2::Zero().eval(); };
    const auto zerog = [](const Vec2&, double) { return Eigen::Matrix2d::Zero().eval(); };
    const auto zeros = [](const Vec2&, double) { return 0.0; };
    const auto rep =
        errors_vs_exact(mesh, cache, dof, FieldState::zero(dof), zerov, zerog, zeros, 0.0);
    CHECK(rep.degenerate_exact);
    CHECK(rep.rel_l2_velocity == 0.0);
    CHECK(rep.rel_l2_pressure == 0.0);
  }
}

TEST_CASE("divergence check flags a manufactured defect") {
  const Mesh mesh = generate_uniform(2, 2);
  const DofMap dof = build_dof_map(mesh, 1);
  const auto cache = build_cache(mesh, dof, 0);
  FieldState s = FieldState::zero(dof);
  // u_hi = (x, 0) on cell 0 only: div = 1 there
  const CellOps& op = cache.cell[0];
  const Eigen::VectorXd cx =
      l2_project_element([](const Vec2& p) { return p.x(); }, op.geom, op.vel, 4);
  for (int i = 0; i < dof.dim_vel; ++i) s.x[dof.u_interior(0, 0, i)] = cx[i];
  const auto rep = divergence_check(mesh, cache, dof, s);
  CHECK(rep.div_sup == Approx(1.0).epsilon(1e-12));
  CHECK(rep.max_normal_jump > 0.0);
}

TEST_CASE("convergence rates") {
  SECTION("halving h, quartering e gives rate two") {
    const auto r = convergence_rates({1.0, 0.5}, {1.0, 0.25});
    REQUIRE(r.size() == 1);
    CHECK(r[0] == Approx(2.0).epsilon(1e-14));
  }

  SECTION("tabulated velocity error columns reproduce the tabulated rates") {
    // degree-1 scheme, L2 velocity
    const std::vector<double> h5{1.0, 0.5, 0.25, 0.125, 0.0625};
    const auto r1 = convergence_rates(h5, {6.1174e-01, 1.6218e-01, 4.2348e-02, 1.0847e-02,
                                           2.7506e-03});
    const std::vector<double> want1{1.92, 1.94, 1.97, 1.98};
    REQUIRE(r1.size() == want1.size());
    for (size_t i = 0; i < want1.size(); ++i)
      CHECK(r1[i] == Approx(want1[i]).margin(0.011));

    // degree-2 scheme, L2 velocity
    const auto r2 = convergence_rates(h5, {4.5784e-01, 6.0385e-02, 7.6249e-03, 9.5935e-04,
                                           1.2103e-04});
    const std::vector<double> want2{2.92, 2.99, 2.99, 2.99};
    for (size_t i = 0; i < want2.size(); ++i)
      CHECK(r2[i] == Approx(want2[i]).margin(0.011));
  }

  SECTION("bad input is rejected") {
    CHECK_THROWS_AS(convergence_rates({1.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(convergence_rates({1.0, 1.0}, {1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(convergence_rates({0.5, 1.0}, {1.0, 0.5}), std::invalid_argument);
  }
}

TEST_CASE("stability monitor") {
  SECTION("zero trajectory passes") {
    const auto rep = stability_monitor({0.0, 0.0, 0.0});
    CHECK(rep.monotone);
  }
  SECTION("decay passes, growth is flagged") {
    CHECK(stability_monitor({1.0, 0.9, 0.85, 0.85}).monotone);
    const auto rep = stability_monitor({1.0, 0.9, 0.95, 0.8});
    CHECK_FALSE(rep.monotone);
    CHECK(rep.first_violation == 2);
    CHECK(rep.max_growth == Approx(0.95 / 0.9));
  }
}

TEST_CASE("discrete inf-sup constant stays bounded under refinement") {
  double prev = -1.0;
  for (int n : {2, 4, 8}) {
    const Mesh mesh = generate_uniform(n, n);
    const DofMap dof = build_dof_map(mesh, 1);
    const auto cache = build_cache(mesh, dof, 0);
    const auto blocks = assemble_constant_blocks(mesh, cache, dof, 1.0);
    const auto red = build_reduction(mesh, dof);
    const double beta = inf_sup_constant(mesh, cache, dof, blocks, red);
    INFO("n=" << n << " beta=" << beta);
    CHECK(beta > 0.01);
    if (prev > 0) CHECK(beta > 0.5 * prev);  // no collapse under refinement
    prev = beta;
  }
}
