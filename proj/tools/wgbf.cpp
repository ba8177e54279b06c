// wgbf - globally divergence-free weak Galerkin solver for the unsteady
// incompressible convective Brinkman-Forchheimer equations.
//
// Subcommands:
//   run          one transient solve from a config file
//   convergence  manufactured-solution refinement study
//   cavity       lid-driven cavity demo from a config file

#include <CLI11.hpp>
#include <cstdio>

#include "wgbf/experiment.hpp"

namespace {

std::vector<int> parse_mesh_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      throw wgbf::ConfigError("bad mesh list entry '" + tok + "'");
    }
  }
  if (out.empty()) throw wgbf::ConfigError("empty mesh list");
  return out;
}

void print_final_errors(const wgbf::RunConfig& cfg, const wgbf::Mesh& mesh,
                        const wgbf::LocalOperatorCache& cache, const wgbf::DofMap& dof,
                        const wgbf::FieldState& state) {
  const auto mc = wgbf::registry(cfg.problem);
  const auto rep = wgbf::errors_vs_exact(mesh, cache, dof, state, mc.u, mc.grad_u, mc.p, cfg.T);
  std::printf("final-time relative errors (t = %g):\n", cfg.T);
  std::printf("  velocity L2     %.6e\n", rep.rel_l2_velocity);
  std::printf("  velocity grad   %.6e   (broken H1 %.6e)\n", rep.rel_grad_velocity,
              rep.rel_h1_velocity);
  std::printf("  pressure L2     %.6e\n", rep.rel_l2_pressure);
  std::printf("  div sup-norm    %.6e\n", rep.div_sup);
}

int dispatch(const CLI::App& run, const CLI::App& cav,
             const std::string& config_path, const std::string& case_name,
             const std::string& meshes_str, int m, int l, const std::string& dt_rule,
             const std::string& out_dir) {
  if (run.parsed() || cav.parsed()) {
    wgbf::RunConfig cfg = wgbf::parse_config(config_path);
    if (cav.parsed() && cfg.problem != "cavity")
      throw wgbf::ConfigError("cavity subcommand expects [problem] case = cavity");
    const wgbf::Mesh mesh = wgbf::make_mesh(cfg);
    wgbf::resolve_time_step(cfg, mesh.h);
    cfg.validate();
    const wgbf::DofMap dof = wgbf::build_dof_map(mesh, cfg.m);
    const auto cache =
        wgbf::build_cache(mesh, dof, cfg.l, cfg.quad_degree, cfg.quad_degree_edge);
    const auto result = wgbf::run_problem(cfg, mesh, cache, dof);
    std::printf("completed %d steps to T=%g (%d Picard iterations; max %d per step)\n",
                cfg.steps(), cfg.T, result.trajectory.total_picard,
                result.trajectory.max_picard_per_step);
    const auto& last = result.trajectory.steps.back();
    std::printf("divergence sup-norm %.3e, max normal jump %.3e\n", last.div_sup,
                last.max_normal_jump);
    std::printf("diagnostics: %s\n", result.csv_path.c_str());
    if (result.vtk_written > 0)
      std::printf("wrote %d VTK snapshots to %s\n", result.vtk_written, cfg.output_dir.c_str());
    if (cfg.problem == "ex81" || cfg.problem == "ex82")
      print_final_errors(cfg, mesh, cache, dof, result.final_state);
    return 0;
  }

  // convergence
  wgbf::ExperimentSpec spec;
  spec.case_name = case_name;
  spec.meshes = parse_mesh_list(meshes_str);
  spec.m = m;
  spec.l = l >= 0 ? l : m - 1;
  spec.dt_rule = dt_rule;
  spec.out_dir = out_dir;
  const auto result = wgbf::run_convergence(spec);
  std::printf("%-8s %-22s %-22s %-22s %-10s %s\n", "mesh", "err_u_l2 (rate)",
              "err_u_grad (rate)", "err_p_l2 (rate)", "div_sup", "picard");
  for (const auto& row : result.rows) {
    auto cell = [](double err, double rate) {
      char buf[32];
      if (std::isnan(rate))
        std::snprintf(buf, sizeof buf, "%.6e   -  ", err);
      else
        std::snprintf(buf, sizeof buf, "%.6e (%.2f)", err, rate);
      return std::string(buf);
    };
    std::printf("%-8s %-22s %-22s %-22s %.3e %d\n",
                (std::to_string(row.n) + "x" + std::to_string(row.n)).c_str(),
                cell(row.err.rel_l2_velocity, row.rate_l2).c_str(),
                cell(row.err.rel_grad_velocity, row.rate_grad).c_str(),
                cell(row.err.rel_l2_pressure, row.rate_p).c_str(), row.err.div_sup,
                row.picard_total);
  }
  std::printf("table: %s\n", result.csv_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"globally divergence-free weak Galerkin Brinkman-Forchheimer solver"};
  app.require_subcommand(1);

  std::string config_path, case_name = "ex81", meshes_str = "4,8,16,32", dt_rule, out_dir = ".";
  int m = 1, l = -1;

  auto* run = app.add_subcommand("run", "run one transient solve from a config file");
  run->add_option("--config", config_path, "path to the INI run configuration")->required();

  auto* conv = app.add_subcommand("convergence", "manufactured-solution refinement study");
  conv->add_option("--case", case_name, "manufactured case (ex81 or ex82)")
      ->check(CLI::IsMember({"ex81", "ex82"}));
  conv->add_option("--m", m, "velocity polynomial degree");
  conv->add_option("--l", l, "weak-gradient degree (default m-1)");
  conv->add_option("--meshes", meshes_str, "comma-separated uniform mesh sizes");
  conv->add_option("--dt-rule", dt_rule, "time-step rule (default h2 for m=1, h3 for m>=2)")
      ->check(CLI::IsMember({"h2", "h3"}));
  conv->add_option("--out", out_dir, "output directory");

  auto* cav = app.add_subcommand("cavity", "lid-driven cavity demo from a config file");
  cav->add_option("--config", config_path, "path to the INI cavity configuration")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    return dispatch(*run, *cav, config_path, case_name, meshes_str, m, l, dt_rule,
                    out_dir);
  } catch (const wgbf::PicardNonconvergence& e) {
    std::fprintf(stderr, "error: %s (step %d)\n", e.what(), e.step);
    return 2;
  } catch (const wgbf::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const wgbf::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
