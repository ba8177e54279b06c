#pragma once

#include <cmath>
#include <filesystem>

#include "wgbf/config.hpp"
#include "wgbf/io.hpp"

namespace wgbf {

namespace detail {
inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}
}  // namespace detail

/// One manufactured-solution refinement study.
struct ExperimentSpec {
  std::string case_name;    // ex81 | ex82
  std::vector<int> meshes;  // nx of the square uniform meshes, decreasing h
  int m = 1;
  int l = 0;
  std::string dt_rule;  // defaults to h2 (m=1) / h3 (m=2) when empty
  RunConfig base;       // physical and solver overrides
  std::string out_dir = ".";
  std::string csv_name;  // default derived from case/m/l
};

struct ConvergenceRow {
  int n = 0;
  double h = 0.0, dt = 0.0;
  int dofs = 0, steps = 0;
  ErrorReport err;
  double rate_l2 = std::nan(""), rate_grad = std::nan(""), rate_h1 = std::nan("");
  double rate_p = std::nan("");
  double max_normal_jump = 0.0;
  int picard_total = 0, picard_max_step = 0;
  // aggregated over every accepted step of the run
  double worst_div_sup = 0.0, worst_jump = 0.0;
  double worst_final_ratio = 0.0;  // contraction at the accepted iterate
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  CsvTable table;
  std::string csv_path;
};

namespace detail {

inline CsvTable convergence_table(const std::vector<ConvergenceRow>& rows) {
  CsvTable t;
  t.header = {"mesh",      "h",           "dofs",        "steps",    "dt",
              "err_u_l2",  "rate_u_l2",   "err_u_grad",  "rate_u_grad",
              "err_u_h1",  "rate_u_h1",   "err_p_l2",    "rate_p_l2",
              "div_sup",   "max_normal_jump", "picard_total", "picard_max_step"};
  for (const auto& r : rows) {
    auto rate = [](double v) { return std::isnan(v) ? std::string() : format_sci(v); };
    t.rows.push_back({std::to_string(r.n) + "x" + std::to_string(r.n),
                      format_sci(r.h),
                      std::to_string(r.dofs),
                      std::to_string(r.steps),
                      format_sci(r.dt),
                      format_sci(r.err.rel_l2_velocity),
                      rate(r.rate_l2),
                      format_sci(r.err.rel_grad_velocity),
                      rate(r.rate_grad),
                      format_sci(r.err.rel_h1_velocity),
                      rate(r.rate_h1),
                      format_sci(r.err.rel_l2_pressure),
                      rate(r.rate_p),
                      format_sci(r.err.div_sup),
                      format_sci(r.max_normal_jump),
                      std::to_string(r.picard_total),
                      std::to_string(r.picard_max_step)});
  }
  return t;
}

}  // namespace detail

/// Runs the refinement study, computes observed rates, and writes one CSV
/// row per mesh. Solver failures carry the failing mesh in the message.
inline ConvergenceResult run_convergence(const ExperimentSpec& spec) {
  if (spec.meshes.empty()) throw ConfigError("convergence: no meshes given");
  const ManufacturedCase mc = registry(spec.case_name);

  RunConfig cfg = spec.base;
  cfg.problem = spec.case_name;
  cfg.m = spec.m;
  cfg.l = spec.l;
  if (cfg.nu <= 0) cfg.nu = mc.nu;
  cfg.dt_rule = spec.dt_rule.empty() ? (spec.m >= 2 ? "h3" : "h2") : spec.dt_rule;

  ConvergenceResult out;
  const Problem problem = mc.problem(cfg.nu, cfg.alpha, cfg.r);
  for (int n : spec.meshes) {
    ConvergenceRow row;
    row.n = n;
    try {
      const Mesh mesh = generate_uniform(n, n);
      RunConfig rc = cfg;
      rc.nx = rc.ny = n;
      resolve_time_step(rc, mesh.h);
      rc.validate();
      const DofMap dof = build_dof_map(mesh, rc.m);
      const auto cache = build_cache(mesh, dof, rc.l, rc.quad_degree, rc.quad_degree_edge);
      auto [traj, final_state] = run_transient(mesh, cache, dof, problem, rc);
      row.h = mesh.h;
      row.dt = rc.dt;
      row.dofs = dof.total;
      row.steps = rc.steps();
      row.err = errors_vs_exact(mesh, cache, dof, final_state, mc.u, mc.grad_u, mc.p, rc.T);
      row.max_normal_jump = traj.steps.back().max_normal_jump;
      row.picard_total = traj.total_picard;
      row.picard_max_step = traj.max_picard_per_step;
      for (const auto& rec : traj.steps) {
        row.worst_div_sup = std::max(row.worst_div_sup, rec.div_sup);
        row.worst_jump = std::max(row.worst_jump, rec.max_normal_jump);
        if (rec.stats.iterations >= 2)
          row.worst_final_ratio = std::max(row.worst_final_ratio, rec.stats.last_ratio);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("convergence mesh " + std::to_string(n) + "x" +
                               std::to_string(n) + ": " + e.what());
    }
    if (!out.rows.empty()) {
      const auto& prev = out.rows.back();
      const double lh = std::log(prev.h / row.h);
      row.rate_l2 = std::log(prev.err.rel_l2_velocity / row.err.rel_l2_velocity) / lh;
      row.rate_grad = std::log(prev.err.rel_grad_velocity / row.err.rel_grad_velocity) / lh;
      row.rate_h1 = std::log(prev.err.rel_h1_velocity / row.err.rel_h1_velocity) / lh;
      row.rate_p = std::log(prev.err.rel_l2_pressure / row.err.rel_l2_pressure) / lh;
    }
    out.rows.push_back(row);
  }

  out.table = detail::convergence_table(out.rows);
  std::string name = spec.csv_name.empty()
                         ? "convergence_" + spec.case_name + "_m" + std::to_string(spec.m) +
                               "_l" + std::to_string(spec.l) + ".csv"
                         : spec.csv_name;
  detail::ensure_dir(spec.out_dir);
  out.csv_path = (std::filesystem::path(spec.out_dir) / name).string();
  write_csv(out.table, out.csv_path);
  return out;
}

struct TransientResult {
  Trajectory trajectory;
  FieldState final_state;
  std::string csv_path;
  int vtk_written = 0;
};

/// Generic transient driver: runs the configured problem, writes per-step
/// diagnostics CSV and VTK snapshots at the configured cadence.
inline TransientResult run_problem(const RunConfig& cfg, const Mesh& mesh,
                                   const LocalOperatorCache& cache, const DofMap& dof) {
  const Problem problem = make_problem(cfg);
  detail::ensure_dir(cfg.output_dir);

  TransientResult out;
  const std::string stem = cfg.problem.empty() ? "run" : cfg.problem;
  StepCallback cb;
  if (cfg.vtk_every > 0) {
    cb = [&](int step, const FieldState& s) {
      if (step % cfg.vtk_every != 0 && step != cfg.steps()) return;
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05d.vtk", stem.c_str(), step);
      write_vtk(mesh, cache, dof, s, (std::filesystem::path(cfg.output_dir) / name).string());
      ++out.vtk_written;
    };
  }

  auto [traj, final_state] = run_transient(mesh, cache, dof, problem, cfg, cb);

  CsvTable t;
  t.header = {"step",    "t",        "l2_velocity",    "energy_norm", "div_sup",
              "max_normal_jump", "picard_iters", "last_increment", "last_ratio",
              "nonlinear_residual"};
  for (const auto& rec : traj.steps)
    t.rows.push_back({std::to_string(rec.step), format_sci(rec.t), format_sci(rec.l2_velocity),
                      format_sci(rec.energy), format_sci(rec.div_sup),
                      format_sci(rec.max_normal_jump), std::to_string(rec.stats.iterations),
                      format_sci(rec.stats.last_increment), format_sci(rec.stats.last_ratio),
                      format_sci(rec.stats.nonlinear_residual)});
  out.csv_path = (std::filesystem::path(cfg.output_dir) / (stem + "_diagnostics.csv")).string();
  write_csv(t, out.csv_path);
  out.trajectory = std::move(traj);
  out.final_state = std::move(final_state);
  return out;
}

/// The lid-driven cavity demo.
inline TransientResult run_cavity(const RunConfig& cfg) {
  if (cfg.problem != "cavity") throw ConfigError("run_cavity: config case must be 'cavity'");
  const Mesh mesh = make_mesh(cfg);
  const DofMap dof = build_dof_map(mesh, cfg.m);
  const auto cache = build_cache(mesh, dof, cfg.l, cfg.quad_degree, cfg.quad_degree_edge);
  return run_problem(cfg, mesh, cache, dof);
}

}  // namespace wgbf
