#include <catch2/catch.hpp>
#include <random>

#include "test_helpers.hpp"
#include "wgbf/cases.hpp"

using namespace wgbf;
using wgbf::testing::jiggled_mesh;

namespace {

VectorField stream_bubble(double a, double b, double c) {
  const auto gx = [](double s) { return s * s * (s - 1) * (s - 1); };
  const auto gp = [](double s) { return 2 * s * (s - 1) * (2 * s - 1); };
  return [=](const Vec2& p) {
    const double fx = gx(p.x()), fy = gx(p.y()), fpx = gp(p.x()), fpy = gp(p.y());
    const double wgt = a + b * p.x() + c * p.y();
    // curl of wgt * gx * gy
    return Vec2(wgt * fx * fpy + c * fx * fy, -(wgt * fpx * fy + b * fx * fy));
  };
}

Problem decay_problem(const VectorField& u0) {
  Problem pr;
  pr.forcing = [](const Vec2&, double) { return Vec2::Zero().eval(); };
  pr.dirichlet = [](const Vec2&, double) { return Vec2::Zero().eval(); };
  pr.initial = u0;
  return pr;
}

}  // namespace

TEST_CASE("initial projection") {
  const Mesh mesh = jiggled_mesh(3, 51);
  const DofMap dof = build_dof_map(mesh, 2);
  const auto cache = build_cache(mesh, dof, 1);

  SECTION("zero data gives the zero state") {
    const auto out =
        project_initial(mesh, cache, dof, [](const Vec2&) { return Vec2::Zero().eval(); });
    CHECK(out.state.x.norm() == 0.0);
    CHECK_FALSE(out.l2_fallback);
  }

  SECTION("manufactured initial data is pointwise divergence-free") {
    const auto mc = registry("ex81");
    const auto out = project_initial(mesh, cache, dof,
                                     [&](const Vec2& p) { return mc.u(p, 0.0); });
    CHECK_FALSE(out.l2_fallback);
    CHECK(out.max_rt_residual < 1e-10);
    const auto div = divergence_check(mesh, cache, dof, out.state);
    CHECK(div.div_sup < 1e-10);
  }

  SECTION("discrete divergence-free fields are reproduced exactly") {
    // (y, x) is linear and solenoidal with matching traces
    const auto out =
        project_initial(mesh, cache, dof, [](const Vec2& p) { return Vec2(p.y(), p.x()); });
    CHECK_FALSE(out.l2_fallback);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const CellOps& op = cache.cell[c];
      Eigen::VectorXd cx(dof.dim_vel), cy(dof.dim_vel);
      for (int i = 0; i < dof.dim_vel; ++i) {
        cx[i] = out.state.x[dof.u_interior(c, 0, i)];
        cy[i] = out.state.x[dof.u_interior(c, 1, i)];
      }
      const Eigen::VectorXd ux = op.vel_val * cx, uy = op.vel_val * cy;
      for (int q = 0; q < op.qw.size(); ++q) {
        CHECK(ux[q] == Approx(op.qpts(q, 1)).margin(1e-11));
        CHECK(uy[q] == Approx(op.qpts(q, 0)).margin(1e-11));
      }
    }
  }

  SECTION("non-solenoidal data falls back to the plain projection") {
    // the divergence 3(x^2 + y^2) has degree-m content, so the RT image
    // leaves [P_m]^2 and the re-expression defect must trip the fallback
    const auto out = project_initial(
        mesh, cache, dof,
        [](const Vec2& p) { return Vec2(p.x() * p.x() * p.x(), p.y() * p.y() * p.y()); });
    CHECK(out.l2_fallback);
    CHECK(out.max_rt_residual > 1e-8);
  }
}

TEST_CASE("saddle solves") {
  SECTION("identity system returns the right-hand side") {
    std::vector<Triplet> ts;
    for (int i = 0; i < 10; ++i) ts.emplace_back(i, i, 1.0);
    SparseMat eye(10, 10);
    eye.setFromTriplets(ts.begin(), ts.end());
    Eigen::VectorXd rhs = Eigen::VectorXd::LinSpaced(10, 0, 9);
    CHECK((solve_saddle(eye, rhs) - rhs).norm() < 1e-14);
  }

  SECTION("assembled system against a dense oracle") {
    const Mesh mesh = generate_uniform(2, 2);
    const DofMap dof = build_dof_map(mesh, 1);
    const auto cache = build_cache(mesh, dof, 0);
    const auto blocks = assemble_constant_blocks(mesh, cache, dof, 1.0);
    const auto red = build_reduction(mesh, dof);
    const SparseMat empty(dof.n_velocity(), dof.n_velocity());
    std::mt19937 rng(53);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd rhs_vel = Eigen::VectorXd::Zero(dof.n_velocity());
    for (int i = 0; i < dof.n_ui; ++i) rhs_vel[i] = gauss(rng);
    const auto sys = build_saddle_system(blocks, empty, empty, 1.0, dof, red,
                                         Eigen::VectorXd::Zero(dof.total), rhs_vel);
    REQUIRE(sys.matrix.rows() <= 200);
    const Eigen::VectorXd x = solve_saddle(sys.matrix, sys.rhs);
    const Eigen::VectorXd xd = Eigen::FullPivLU<MatrixXd>(MatrixXd(sys.matrix)).solve(sys.rhs);
    CHECK((x - xd).norm() < 1e-10 * (1 + xd.norm()));

    // the multiplier row is satisfied: interior pressure has zero mean
    double mean = 0.0;
    for (int i = 0; i < dof.n_pressure(); ++i) {
      const int rr = red.to_reduced[dof.pressure_offset() + i];
      if (rr >= 0) mean += blocks.mean_row[i] * x[rr];
    }
    CHECK(std::abs(mean) < 1e-11 * (1 + x.norm()));
  }

  SECTION("singular system is reported") {
    std::vector<Triplet> ts;
    ts.emplace_back(0, 0, 1.0);
    ts.emplace_back(0, 1, 1.0);
    ts.emplace_back(1, 0, 1.0);
    ts.emplace_back(1, 1, 1.0);  // rank 1
    SparseMat bad(2, 2);
    bad.setFromTriplets(ts.begin(), ts.end());
    CHECK_THROWS(solve_saddle(bad, Eigen::VectorXd::Ones(2)));
  }
}

TEST_CASE("condensed and assembled paths produce the same step") {
  const auto mc = registry("ex81");
  const Mesh mesh = jiggled_mesh(3, 59);
  for (int m : {1, 2}) {
    RunConfig cfg;
    cfg.m = m;
    cfg.l = m - 1;
    cfg.nu = 1.0;
    cfg.alpha = 1.0;
    cfg.r = 5.0;
    cfg.T = 1.0;
    cfg.dt = 0.05;
    const DofMap dof = build_dof_map(mesh, cfg.m);
    const auto cache = build_cache(mesh, dof, cfg.l);
    const Problem prob = mc.problem(cfg.nu, cfg.alpha, cfg.r);
    const FieldState init = project_initial(mesh, cache, dof, prob.initial).state;

    RunConfig ccfg = cfg;
    ccfg.condensed = true;
    RunConfig dcfg = cfg;
    dcfg.condensed = false;
    TransientStepper cond(mesh, cache, dof, prob, ccfg);
    TransientStepper direct(mesh, cache, dof, prob, dcfg);
    auto [sc, stc] = cond.step(init, cfg.dt);
    auto [sd, std_] = direct.step(init, cfg.dt);

    INFO("m=" << m);
    CHECK(stc.iterations == std_.iterations);
    const double scale = 1.0 + sd.x.cwiseAbs().maxCoeff();
    CHECK((sc.x.head(dof.n_velocity()) - sd.x.head(dof.n_velocity())).cwiseAbs().maxCoeff() <
          1e-9 * scale);
    // pressures agree once both are mean-zero (the multiplier path already is)
    CHECK((sc.x.segment(dof.pressure_offset(), dof.n_pressure()) -
           sd.x.segment(dof.pressure_offset(), dof.n_pressure()))
              .cwiseAbs()
              .maxCoeff() < 1e-8 * scale);
  }
}

TEST_CASE("condensed and assembled paths agree under nonzero boundary data") {
  // first cavity step: zero load and zero previous state, the system is
  // driven purely by the eliminated lid values
  const Mesh mesh = generate_uniform(4, 4);
  RunConfig cfg = cavity_defaults();
  cfg.nx = 4;
  cfg.m = 2;
  cfg.l = 2;
  cfg.dt = 0.01;
  cfg.T = 0.02;
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const Problem prob = cavity_problem();
  const FieldState init = project_initial(mesh, cache, dof, prob.initial).state;

  RunConfig ccfg = cfg;
  ccfg.condensed = true;
  RunConfig dcfg = cfg;
  dcfg.condensed = false;
  TransientStepper cond(mesh, cache, dof, prob, ccfg);
  TransientStepper direct(mesh, cache, dof, prob, dcfg);
  auto [sc, stc] = cond.step(init, cfg.dt);
  auto [sd, std_] = direct.step(init, cfg.dt);
  const double scale = 1.0 + sd.x.cwiseAbs().maxCoeff();
  CHECK((sc.x - sd.x).cwiseAbs().maxCoeff() < 1e-8 * scale);
  CHECK(interior_velocity_l2(dof, sc) > 1e-3);  // the lid actually drives flow
}

TEST_CASE("the linear limit converges in exactly one iteration") {
  const Mesh mesh = generate_uniform(4, 4);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.nu = 1.0;
  cfg.alpha = 0.0;  // no damping
  cfg.convection = false;
  cfg.dt = 0.1;
  cfg.T = 1.0;
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const auto mc = registry("ex81");
  const Problem prob = mc.problem(cfg.nu, 0.0, cfg.r);
  const FieldState init = project_initial(mesh, cache, dof, prob.initial).state;

  TransientStepper stepper(mesh, cache, dof, prob, cfg);
  const auto [state, stats] = stepper.step(init, cfg.dt);
  CHECK(stats.iterations == 1);
  CHECK(stats.linear_shortcut);
}

TEST_CASE("picard iteration: counts, contraction, and consistency") {
  const auto mc = registry("ex81");
  const Mesh mesh = generate_uniform(8, 8);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.nu = mc.nu;
  cfg.alpha = mc.alpha;
  cfg.r = mc.r;
  cfg.T = 1.0;
  cfg.dt = 1.0 / 32;
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const Problem prob = mc.problem(cfg.nu, cfg.alpha, cfg.r);

  auto [traj, final_state] = run_transient(mesh, cache, dof, prob, cfg);
  for (size_t k = 1; k < traj.steps.size(); ++k) {
    const auto& st = traj.steps[k].stats;
    CHECK(st.iterations <= 9);  // single digits expected near the fixed point
    CHECK(st.last_increment < cfg.picard_tol);
    if (st.iterations >= 2) CHECK(st.last_ratio < 1.0);
    // nonlinear residual consistent with the stopping tolerance
    CHECK(st.nonlinear_residual <= 10.0 * cfg.picard_tol / cfg.dt);
  }
}

TEST_CASE("coarse manufactured run lands near the reference error row") {
  // tabulated degree-1 reference values for the 8x8 mesh at T = 1
  const auto mc = registry("ex81");
  const Mesh mesh = generate_uniform(8, 8);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.nu = mc.nu;
  cfg.alpha = mc.alpha;
  cfg.r = mc.r;
  cfg.T = 1.0;
  cfg.dt = 1.0 / 32;  // h^2 for the computed mesh size
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  auto [traj, state] = run_transient(mesh, cache, dof, mc.problem(), cfg);
  const auto rep = errors_vs_exact(mesh, cache, dof, state, mc.u, mc.grad_u, mc.p, cfg.T);
  CHECK(rep.rel_l2_velocity == Approx(1.6218e-01).epsilon(1.0));   // within a factor of 2
  CHECK(rep.rel_grad_velocity == Approx(2.7342e-01).epsilon(1.0));
  CHECK(rep.rel_l2_pressure == Approx(1.4410e-01).epsilon(1.0));
  CHECK(rep.div_sup < 1e-10);
}

TEST_CASE("nonconvergence carries the failing step") {
  const auto mc = registry("ex81");
  const Mesh mesh = generate_uniform(4, 4);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.nu = mc.nu;
  cfg.alpha = mc.alpha;
  cfg.r = mc.r;
  cfg.T = 1.0;
  cfg.dt = 0.125;
  cfg.picard_max = 1;  // impossible budget
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const Problem prob = mc.problem(cfg.nu, cfg.alpha, cfg.r);
  try {
    run_transient(mesh, cache, dof, prob, cfg);
    FAIL("expected nonconvergence");
  } catch (const PicardNonconvergence& e) {
    CHECK(e.step == 1);
    CHECK(e.iterations == 1);
    CHECK(e.last_increment > 0.0);
  }
}

TEST_CASE("zero data stays zero") {
  const Mesh mesh = generate_uniform(4, 4);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.dt = 0.25;
  cfg.T = 1.0;
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const Problem prob = decay_problem([](const Vec2&) { return Vec2::Zero().eval(); });
  auto [traj, final_state] = run_transient(mesh, cache, dof, prob, cfg);
  CHECK(final_state.x.norm() < 1e-12);
  for (const auto& rec : traj.steps) CHECK(rec.l2_velocity < 1e-12);
}

TEST_CASE("free decay is monotone in the interior L2 norm") {
  const Mesh mesh = generate_uniform(8, 8);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.nu = 1.0;
  cfg.alpha = 1.0;
  cfg.r = 3.0;
  cfg.dt = 0.01;
  cfg.T = 1.0;  // 100 steps
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const Problem prob = decay_problem(stream_bubble(40.0, 25.0, -35.0));

  auto [traj, final_state] = run_transient(mesh, cache, dof, prob, cfg);
  REQUIRE(traj.steps.size() == 101);
  CHECK(traj.steps.front().l2_velocity > 0.1);
  std::vector<double> hist;
  for (const auto& rec : traj.steps) {
    hist.push_back(rec.l2_velocity);
    CHECK(rec.div_sup < 1e-10);
    CHECK(rec.max_normal_jump < 1e-10);
  }
  const auto rep = stability_monitor(hist);
  CHECK(rep.monotone);
  CHECK(rep.max_growth <= 1.0 + 1e-12);
}

TEST_CASE("higher-degree spaces run and keep the velocity solenoidal") {
  const auto mc = registry("ex81");
  const Mesh mesh = generate_uniform(2, 2);
  for (int m : {3, 4}) {
    RunConfig cfg;
    cfg.m = m;
    cfg.l = m - 1;
    cfg.nu = mc.nu;
    cfg.alpha = mc.alpha;
    cfg.r = mc.r;
    cfg.dt = 0.05;
    cfg.T = 0.1;
    const DofMap dof = build_dof_map(mesh, cfg.m);
    const auto cache = build_cache(mesh, dof, cfg.l);
    auto [traj, fin] = run_transient(mesh, cache, dof, mc.problem(), cfg);
    const auto rep = errors_vs_exact(mesh, cache, dof, fin, mc.u, mc.grad_u, mc.p, cfg.T);
    INFO("m=" << m);
    CHECK(rep.div_sup < 1e-10);
    CHECK(traj.steps.back().max_normal_jump < 1e-10);
    CHECK(rep.rel_l2_velocity < 0.5);
  }
}

TEST_CASE("transient runs are bit-reproducible") {
  const auto mc = registry("ex82");
  const Mesh mesh = generate_uniform(4, 4);
  RunConfig cfg;
  cfg.m = 1;
  cfg.l = 0;
  cfg.nu = mc.nu;
  cfg.alpha = mc.alpha;
  cfg.r = mc.r;
  cfg.T = 0.5;
  cfg.dt = 0.125;
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l);
  const Problem prob = mc.problem(cfg.nu, cfg.alpha, cfg.r);

  auto [t1, s1] = run_transient(mesh, cache, dof, prob, cfg);
  auto [t2, s2] = run_transient(mesh, cache, dof, prob, cfg);
  REQUIRE(t1.steps.size() == t2.steps.size());
  CHECK((s1.x - s2.x).cwiseAbs().maxCoeff() == 0.0);
  for (size_t k = 0; k < t1.steps.size(); ++k) {
    CHECK(t1.steps[k].l2_velocity == t2.steps[k].l2_velocity);
    CHECK(t1.steps[k].div_sup == t2.steps[k].div_sup);
    CHECK(t1.steps[k].stats.last_increment == t2.steps[k].stats.last_increment);
  }
}
