#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "wgbf/cases.hpp"

namespace wgbf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using Ini = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Ini parse_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Ini ini;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto pos = line.find('#');
    if (pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      ini[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key or value");
    if (!ini[section].emplace(key, val).second)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return ini;
}

/// Typed lookup that consumes keys, so leftovers can be rejected.
struct KeyReader {
  std::map<std::string, std::string>& kv;
  const std::string& section;

  bool take(const std::string& key, std::string& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return false;
    out = it->second;
    kv.erase(it);
    return true;
  }
  template <class T>
  bool take_num(const std::string& key, T& out) {
    std::string s;
    if (!take(key, s)) return false;
    std::istringstream ss(s);
    T v{};
    if (!(ss >> v) || !(ss >> std::ws).eof())
      throw ConfigError("[" + section + "] " + key + ": expected a number, got '" + s + "'");
    out = v;
    return true;
  }
  bool take_bool(const std::string& key, bool& out) {
    std::string s;
    if (!take(key, s)) return false;
    if (s == "true" || s == "on" || s == "1")
      out = true;
    else if (s == "false" || s == "off" || s == "0")
      out = false;
    else
      throw ConfigError("[" + section + "] " + key + ": expected true/false, got '" + s + "'");
    return true;
  }
};

}  // namespace detail

/// Applies a dt rule ("h2" or "h3") against the computed mesh size; N is
/// rounded up so that N*dt = T exactly and dt <= h^p.
inline void resolve_time_step(RunConfig& cfg, double mesh_h) {
  if (cfg.dt_rule.empty()) return;
  int p = 0;
  if (cfg.dt_rule == "h2")
    p = 2;
  else if (cfg.dt_rule == "h3")
    p = 3;
  else
    throw ConfigError("unknown dt_rule '" + cfg.dt_rule + "' (expected h2 or h3)");
  const double raw = std::pow(mesh_h, p);
  const int n = static_cast<int>(std::ceil(cfg.T / raw * (1.0 - 1e-12)));
  cfg.dt = cfg.T / n;
}

/// Parses the INI-style run configuration. Unknown sections or keys are
/// errors; values omitted for a known case fall back to its defaults.
inline RunConfig parse_config(const std::string& path) {
  auto ini = detail::parse_ini(path);

  RunConfig cfg;
  // [problem]
  std::string mesh_kind;
  {
    auto it = ini.find("problem");
    if (it == ini.end()) throw ConfigError(path + ": missing [problem] section");
    detail::KeyReader r{it->second, "problem"};
    if (!r.take("case", cfg.problem)) throw ConfigError("[problem] case is required");
    r.take("mesh", mesh_kind);  // optional: uniform | file
    r.take_num("nx", cfg.nx);
    r.take_num("ny", cfg.ny);
    r.take("mesh_file", cfg.mesh_file);
  }
  if (!mesh_kind.empty() && mesh_kind != "uniform" && mesh_kind != "file")
    throw ConfigError("[problem] mesh must be 'uniform' or 'file', got '" + mesh_kind + "'");
  if (mesh_kind == "file" && cfg.mesh_file.empty())
    throw ConfigError("[problem] mesh = file requires mesh_file");
  if (mesh_kind == "uniform" && !cfg.mesh_file.empty())
    throw ConfigError("[problem] mesh = uniform conflicts with mesh_file");
  if (cfg.problem == "ex81" || cfg.problem == "ex82") {
    const auto mc = registry(cfg.problem);
    cfg.nu = mc.nu;
    cfg.alpha = mc.alpha;
    cfg.r = mc.r;
    cfg.T = mc.T;
  } else if (cfg.problem == "cavity") {
    const RunConfig cav = cavity_defaults();
    cfg.m = cav.m;
    cfg.l = cav.l;
    cfg.nu = cav.nu;
    cfg.alpha = cav.alpha;
    cfg.r = cav.r;
    cfg.T = cav.T;
    cfg.dt = cav.dt;
    if (cfg.nx == 0) cfg.nx = cav.nx;
  } else {
    throw ConfigError("[problem] unknown case '" + cfg.problem + "'");
  }
  if (cfg.ny == 0) cfg.ny = cfg.nx;
  if (cfg.mesh_file.empty() && cfg.nx <= 0)
    throw ConfigError("[problem] needs nx (uniform mesh) or mesh_file");

  bool m_given = false, l_given = false;
  // [scheme]
  if (auto it = ini.find("scheme"); it != ini.end()) {
    detail::KeyReader r{it->second, "scheme"};
    m_given = r.take_num("m", cfg.m);
    l_given = r.take_num("l", cfg.l);
    r.take_num("nu", cfg.nu);
    r.take_num("alpha", cfg.alpha);
    r.take_num("r", cfg.r);
    r.take_bool("convection", cfg.convection);
    r.take_num("quad_degree", cfg.quad_degree);
    r.take_num("quad_degree_edge", cfg.quad_degree_edge);
  }
  if (m_given && !l_given) cfg.l = cfg.problem == "cavity" ? cfg.m : cfg.m - 1;
  if (cfg.l != cfg.m && cfg.l != cfg.m - 1)
    throw ConfigError("[scheme] l must be m-1 or m (got l=" + std::to_string(cfg.l) +
                      ", m=" + std::to_string(cfg.m) + ")");

  // [time]
  bool dt_given = false;
  if (auto it = ini.find("time"); it != ini.end()) {
    detail::KeyReader r{it->second, "time"};
    dt_given = r.take_num("dt", cfg.dt);
    const bool rule_given = r.take("dt_rule", cfg.dt_rule);
    if (dt_given && rule_given)
      throw ConfigError("[time] give either dt or dt_rule, not both");
    if (dt_given) cfg.dt_rule.clear();
    r.take_num("T", cfg.T);
  }

  // [solver]
  if (auto it = ini.find("solver"); it != ini.end()) {
    detail::KeyReader r{it->second, "solver"};
    r.take_num("picard_tol", cfg.picard_tol);
    r.take_num("picard_max", cfg.picard_max);
    r.take_bool("reuse_symbolic", cfg.reuse_symbolic);
    r.take_bool("condensed", cfg.condensed);
  }

  // [output]
  if (auto it = ini.find("output"); it != ini.end()) {
    detail::KeyReader r{it->second, "output"};
    r.take("dir", cfg.output_dir);
    r.take_num("vtk_every", cfg.vtk_every);
  }

  static const std::array<std::string, 5> known{"problem", "scheme", "time", "solver", "output"};
  for (auto& [section, kv] : ini) {
    if (std::find(known.begin(), known.end(), section) == known.end())
      throw ConfigError(path + ": unknown section [" + section + "]");
    if (!kv.empty())
      throw ConfigError(path + ": unknown key '" + kv.begin()->first + "' in [" + section + "]");
  }
  return cfg;
}

/// Mesh and problem construction from a parsed configuration.
inline Mesh make_mesh(const RunConfig& cfg) {
  if (!cfg.mesh_file.empty()) return import_mesh(cfg.mesh_file);
  return generate_uniform(cfg.nx, cfg.ny);
}

inline Problem make_problem(const RunConfig& cfg) {
  if (cfg.problem == "cavity") return cavity_problem();
  return registry(cfg.problem).problem(cfg.nu, cfg.alpha, cfg.r);
}

}  // namespace wgbf
