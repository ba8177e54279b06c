#pragma once

#include <Eigen/SparseLU>
#include <functional>
#include <optional>
#include <string>

#include "wgbf/condensed.hpp"
#include "wgbf/diagnostics.hpp"

namespace wgbf {

/// All scheme, time and driver parameters of one run.
struct RunConfig {
  // scheme
  int m = 1;
  int l = 0;              // weak-gradient degree for the velocity, m-1 or m
  double nu = 1.0;
  double alpha = 1.0;
  double r = 5.0;
  bool convection = true;  // include the skew convection form
  int quad_degree = 0;     // 0 = default 3m+4
  int quad_degree_edge = 0;

  // time
  double dt = 0.0;
  double T = 1.0;

  // nonlinear and linear solve
  double picard_tol = 1e-8;
  int picard_max = 50;
  bool reuse_symbolic = true;
  bool condensed = true;  // eliminate cell interiors onto the edge skeleton

  // problem / driver
  std::string problem;    // ex81 | ex82 | cavity
  std::string mesh_file;  // alternative to the uniform generator
  int nx = 0, ny = 0;
  std::string dt_rule;  // "h2" | "h3" | "" when dt is explicit
  std::string output_dir = ".";
  int vtk_every = 0;

  int steps() const { return static_cast<int>(std::llround(T / dt)); }

  void validate() const {
    if (m < 1) throw std::invalid_argument("config: m must be >= 1");
    if (l != m && l != m - 1) throw std::invalid_argument("config: l must be m-1 or m");
    if (!(nu > 0.0)) throw std::invalid_argument("config: nu must be positive");
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be nonnegative");
    if (alpha > 0.0 && r < 3.0) throw std::invalid_argument("config: r must be >= 3");
    if (!(dt > 0.0)) throw std::invalid_argument("config: dt must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("config: T must be positive");
    const double n = T / dt;
    if (std::abs(n - std::llround(n)) > 1e-12 * std::max(1.0, n))
      throw std::invalid_argument("config: T must be an integer multiple of dt");
    if (!(picard_tol > 0.0)) throw std::invalid_argument("config: picard_tol must be positive");
    if (picard_max < 1) throw std::invalid_argument("config: picard_max must be >= 1");
  }
};

/// Problem data as callables; manufactured cases and the cavity demo both
/// reduce to this.
struct Problem {
  TimeVectorField forcing;
  TimeVectorField dirichlet;
  VectorField initial;
};

struct StepStats {
  int iterations = 0;
  double last_increment = 0.0;
  double last_ratio = 0.0;  // increment contraction at the accepted iterate
  double nonlinear_residual = 0.0;
  bool linear_shortcut = false;
};

struct StepRecord {
  int step = 0;
  double t = 0.0;
  double l2_velocity = 0.0;
  double energy = 0.0;
  double div_sup = 0.0;
  double max_normal_jump = 0.0;
  StepStats stats;
};

struct Trajectory {
  std::vector<StepRecord> steps;  // entry 0 is the initial state
  int total_picard = 0;
  int max_picard_per_step = 0;
};

struct PicardNonconvergence : std::runtime_error {
  PicardNonconvergence(int iters, double inc)
      : std::runtime_error("Picard iteration did not converge after " + std::to_string(iters) +
                           " iterations (last increment " + std::to_string(inc) + ")"),
        iterations(iters),
        last_increment(inc) {}
  int iterations;
  double last_increment;
  int step = -1;
};

/// Direct sparse solver for the bordered saddle systems. The sparsity
/// pattern is identical across Picard iterations and time steps, so the
/// symbolic analysis can be reused; every solve is residual-checked and
/// gets one step of iterative refinement.
class SaddleSolver {
 public:
  explicit SaddleSolver(bool reuse_pattern = true) : reuse_(reuse_pattern) {}

  Eigen::VectorXd solve(const SparseMat& mat, const Eigen::VectorXd& rhs) {
    if (!analyzed_ || !reuse_) {
      lu_.analyzePattern(mat);
      analyzed_ = true;
    }
    lu_.factorize(mat);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("saddle solve: singular or rank-deficient factorization");
    Eigen::VectorXd x = lu_.solve(rhs);
    Eigen::VectorXd resid = rhs - mat * x;
    const double scale = std::max(rhs.norm(), 1e-300);
    if (resid.norm() > 1e-14 * scale) {
      x += lu_.solve(resid);
      resid = rhs - mat * x;
    }
    if (resid.norm() > 1e-10 * scale)
      throw std::runtime_error("saddle solve: residual " + std::to_string(resid.norm() / scale) +
                               " above tolerance");
    return x;
  }

 private:
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu_;
  bool reuse_ = true;
  bool analyzed_ = false;
};

/// One-shot residual-checked solve (tests and small systems).
inline Eigen::VectorXd solve_saddle(const SparseMat& mat, const Eigen::VectorXd& rhs) {
  SaddleSolver s(false);
  return s.solve(mat, rhs);
}

struct InitialProjection {
  FieldState state;
  double max_rt_residual = 0.0;  // worst relative P_m re-expression defect
  bool l2_fallback = false;      // used componentwise L2 instead of RT
};

/// Initial data: interior velocity from the RT projection re-expressed in
/// the P_m basis (exact when u0 is divergence-free), traces from the edge
/// L2 projection, pressure zero. Falls back to a plain L2 projection when
/// the re-expression defect exceeds `rt_tol`.
inline InitialProjection project_initial(const Mesh& mesh, const LocalOperatorCache& cache,
                                         const DofMap& dof, const VectorField& u0,
                                         double rt_tol = 1e-8) {
  InitialProjection out;
  out.state = FieldState::zero(dof, 0.0);

  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    const RTBasis rt(dof.m, op.geom);
    const Eigen::VectorXd rc = rt.interpolate(u0, 4);
    MatrixXd vx, vy;
    rt.values(op.qpts, vx, vy);
    const Eigen::VectorXd fx = vx * rc, fy = vy * rc;
    const Eigen::VectorXd cx = op.vel_val.transpose() * (op.qw.asDiagonal() * fx);
    const Eigen::VectorXd cy = op.vel_val.transpose() * (op.qw.asDiagonal() * fy);
    const double resid2 = (op.qw.array() * ((fx - op.vel_val * cx).array().square() +
                                            (fy - op.vel_val * cy).array().square()))
                              .sum();
    const double norm2 = (op.qw.array() * (fx.array().square() + fy.array().square())).sum();
    out.max_rt_residual =
        std::max(out.max_rt_residual, std::sqrt(resid2 / std::max(norm2, 1e-300)));
    for (int i = 0; i < dof.dim_vel; ++i) {
      out.state.x[dof.u_interior(c, 0, i)] = cx[i];
      out.state.x[dof.u_interior(c, 1, i)] = cy[i];
    }
  }

  if (out.max_rt_residual > rt_tol) {
    // non-divergence-free data: the RT field leaves [P_m]^2
    out.l2_fallback = true;
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const CellOps& op = cache.cell[c];
      Eigen::VectorXd fx(op.qw.size()), fy(op.qw.size());
      for (int q = 0; q < op.qw.size(); ++q) {
        const Vec2 v = u0(op.qpts.row(q).transpose());
        fx[q] = v.x();
        fy[q] = v.y();
      }
      const Eigen::VectorXd cx = op.vel_val.transpose() * (op.qw.asDiagonal() * fx);
      const Eigen::VectorXd cy = op.vel_val.transpose() * (op.qw.asDiagonal() * fy);
      for (int i = 0; i < dof.dim_vel; ++i) {
        out.state.x[dof.u_interior(c, 0, i)] = cx[i];
        out.state.x[dof.u_interior(c, 1, i)] = cy[i];
      }
    }
  }

  for (int e = 0; e < mesh.n_edges(); ++e) {
    EdgeBasis eb(dof.m, mesh.edge_h[e]);
    const Vec2 a = mesh.vertices[mesh.edges[e][0]], b = mesh.vertices[mesh.edges[e][1]];
    for (int comp = 0; comp < 2; ++comp) {
      const Eigen::VectorXd coef = l2_project_edge(
          [&](const Vec2& p) { return u0(p)[comp]; }, a, b, eb, cache.quad_degree_edge + 4);
      for (int k = 0; k < dof.dim_edge; ++k) out.state.x[dof.u_trace(e, comp, k)] = coef[k];
    }
  }
  return out;
}

namespace detail {

inline FieldState expand_reduced(const DofMap& dof, const Reduction& red,
                                 const Eigen::VectorXd& x_red, const Eigen::VectorXd& bc,
                                 double t) {
  FieldState s = FieldState::zero(dof, t);
  for (int i = 0; i < dof.total; ++i)
    s.x[i] = red.to_reduced[i] >= 0 ? x_red[red.to_reduced[i]] : bc[i];
  return s;
}

}  // namespace detail

/// Residual of the bordered system at a full state (boundary values are
/// part of the state, eliminated test rows are skipped). Split into the
/// interior-velocity part (the L2-dual measure of the momentum equation)
/// and the total over all kept rows.
struct BorderedResidual {
  double momentum_interior = 0.0;
  double total = 0.0;
  double scale = 0.0;  // largest contributing term; nonzero even when rhs_vel = 0
};

inline BorderedResidual bordered_residual(const SystemBlocks& blocks, const SparseMat& C,
                                          const SparseMat& D, double inv_dt, const DofMap& dof,
                                          const Reduction& red, const Eigen::VectorXd& rhs_vel,
                                          const Eigen::VectorXd& x) {
  const auto u = x.head(dof.n_velocity());
  const auto p = x.segment(dof.pressure_offset(), dof.n_pressure());
  const double lam = x[dof.multiplier()];

  const Eigen::VectorXd tm = inv_dt * (blocks.M * u);
  const Eigen::VectorXd ta = blocks.A * u;
  const Eigen::VectorXd tb = blocks.B * p;
  Eigen::VectorXd rv = rhs_vel - tm - ta - tb;
  double scale = std::max({rhs_vel.norm(), tm.norm(), ta.norm(), tb.norm()});
  if (C.nonZeros() > 0) {
    const Eigen::VectorXd tc = C * u;
    rv -= tc;
    scale = std::max(scale, tc.norm());
  }
  if (D.nonZeros() > 0) {
    const Eigen::VectorXd td = D * u;
    rv -= td;
    scale = std::max(scale, td.norm());
  }
  const Eigen::VectorXd cont = blocks.B.transpose() * u;
  const Eigen::VectorXd rp = -cont - lam * blocks.mean_row;
  const double rmean = -blocks.mean_row.dot(p);
  scale = std::max({scale, cont.norm(), blocks.mean_row.norm() * p.norm()});

  BorderedResidual out;
  double tot = rmean * rmean;
  for (int i = 0; i < dof.n_velocity(); ++i) {
    if (red.to_reduced[i] < 0) continue;
    tot += rv[i] * rv[i];
    if (i < dof.n_ui) out.momentum_interior += rv[i] * rv[i];
  }
  tot += rp.squaredNorm();
  out.momentum_interior = std::sqrt(out.momentum_interior);
  out.total = std::sqrt(tot);
  out.scale = scale;
  return out;
}

/// Drives the linearized iteration for one backward-Euler step, through
/// either the condensed (skeleton) path or the assembled bordered system.
/// Every linear solve on the condensed path is verified against the
/// independently assembled blocks.
class TransientStepper {
 public:
  TransientStepper(const Mesh& mesh, const LocalOperatorCache& cache, const DofMap& dof,
                   const Problem& problem, const RunConfig& config)
      : mesh_(mesh), cache_(cache), dof_(dof), problem_(problem), config_(config) {
    config.validate();
    blocks_ = assemble_constant_blocks(mesh, cache, dof, config.nu);
    red_ = build_reduction(mesh, dof);
    if (config.condensed)
      cond_.emplace(mesh, cache, dof, config.nu, 1.0 / config.dt, config.reuse_symbolic);
    else
      direct_.emplace(config.reuse_symbolic);
  }

  const SystemBlocks& blocks() const { return blocks_; }
  const Reduction& reduction() const { return red_; }

  /// One step: warm start from `prev`, iterate to the increment tolerance.
  std::pair<FieldState, StepStats> step(const FieldState& prev, double t_new) {
    const double inv_dt = 1.0 / config_.dt;
    const Eigen::VectorXd bc = project_dirichlet(mesh_, cache_, dof_, problem_.dirichlet, t_new);
    const Eigen::VectorXd rhs_vel =
        assemble_load(mesh_, cache_, dof_, problem_.forcing, t_new) +
        inv_dt * (blocks_.M * prev.x.head(dof_.n_velocity()));

    const bool linear = config_.alpha == 0.0 && !config_.convection;
    const SparseMat empty(dof_.n_velocity(), dof_.n_velocity());

    StepStats stats;
    FieldState iterate = prev;
    double prev_inc = 0.0;

    for (int it = 1; it <= config_.picard_max; ++it) {
      const SparseMat C = assemble_damping(mesh_, cache_, dof_, iterate, config_.alpha, config_.r);
      const SparseMat D =
          config_.convection ? assemble_convection(mesh_, cache_, dof_, iterate) : empty;

      FieldState next = FieldState::zero(dof_, t_new);
      if (cond_) {
        next.x = cond_->solve(iterate.x, config_.alpha, config_.r, config_.convection, bc,
                              rhs_vel);
        // independent check of the condensation algebra
        const auto res = bordered_residual(blocks_, C, D, inv_dt, dof_, red_, rhs_vel, next.x);
        if (res.total > 1e-10 * std::max(res.scale, 1e-30))
          throw std::runtime_error("condensed solve: assembled residual " +
                                   std::to_string(res.total / std::max(res.scale, 1e-30)) +
                                   " above tolerance");
      } else {
        ReducedSystem sys = build_saddle_system(blocks_, C, D, inv_dt, dof_, red_, bc, rhs_vel);
        const Eigen::VectorXd x_red = direct_->solve(sys.matrix, sys.rhs);
        next = detail::expand_reduced(dof_, red_, x_red, bc, t_new);
      }

      const double inc = (next.x.head(dof_.n_ui) - iterate.x.head(dof_.n_ui)).norm();
      stats.iterations = it;
      stats.last_increment = inc;
      stats.last_ratio = prev_inc > 0.0 ? inc / prev_inc : 0.0;
      prev_inc = inc;
      iterate = std::move(next);

      if (linear) {
        stats.linear_shortcut = true;
        break;
      }
      if (inc < config_.picard_tol) break;
      if (it == config_.picard_max) throw PicardNonconvergence(it, inc);
    }

    // consistency of the accepted iterate with the nonlinear equation
    {
      const SparseMat C = assemble_damping(mesh_, cache_, dof_, iterate, config_.alpha, config_.r);
      const SparseMat D =
          config_.convection ? assemble_convection(mesh_, cache_, dof_, iterate) : empty;
      stats.nonlinear_residual =
          bordered_residual(blocks_, C, D, inv_dt, dof_, red_, rhs_vel, iterate.x)
              .momentum_interior;
    }
    return {std::move(iterate), stats};
  }

 private:
  const Mesh& mesh_;
  const LocalOperatorCache& cache_;
  const DofMap& dof_;
  const Problem& problem_;
  RunConfig config_;
  SystemBlocks blocks_;
  Reduction red_;
  std::optional<CondensedSolver> cond_;
  std::optional<SaddleSolver> direct_;
};

using StepCallback = std::function<void(int step, const FieldState&)>;

/// Runs the fully discrete scheme from t=0 to t=T and records per-step
/// diagnostics. Solver failures are rethrown with the failing step attached.
inline std::pair<Trajectory, FieldState> run_transient(const Mesh& mesh,
                                                       const LocalOperatorCache& cache,
                                                       const DofMap& dof, const Problem& problem,
                                                       const RunConfig& config,
                                                       const StepCallback& on_step = {}) {
  config.validate();
  const int nsteps = config.steps();

  TransientStepper stepper(mesh, cache, dof, problem, config);
  FieldState state = project_initial(mesh, cache, dof, problem.initial).state;

  Trajectory traj;
  auto record = [&](int k, double t, const StepStats& stats) {
    StepRecord rec;
    rec.step = k;
    rec.t = t;
    rec.l2_velocity = interior_velocity_l2(dof, state);
    rec.energy = energy_norm(mesh, cache, dof, state);
    const auto div = divergence_check(mesh, cache, dof, state);
    rec.div_sup = div.div_sup;
    rec.max_normal_jump = div.max_normal_jump;
    rec.stats = stats;
    traj.steps.push_back(rec);
  };
  record(0, 0.0, {});
  if (on_step) on_step(0, state);

  for (int k = 1; k <= nsteps; ++k) {
    const double t = k * config.dt;
    try {
      auto [next, stats] = stepper.step(state, t);
      state = std::move(next);
      traj.total_picard += stats.iterations;
      traj.max_picard_per_step = std::max(traj.max_picard_per_step, stats.iterations);
      record(k, t, stats);
    } catch (const PicardNonconvergence& e) {
      PicardNonconvergence tagged = e;
      tagged.step = k;
      throw tagged;
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(k) + " (t=" + std::to_string(t) +
                               "): " + e.what());
    }
    if (on_step) on_step(k, state);
  }
  return {std::move(traj), std::move(state)};
}

}  // namespace wgbf
