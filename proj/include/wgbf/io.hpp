#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wgbf/cache.hpp"

namespace wgbf {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

/// Rectangular table; cells are preformatted strings (empty cells allowed,
/// e.g. the first row of a rate column).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const CsvTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV file: " + path);
  for (size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

namespace detail {

// lattice triangulation of one cell with n_sub subdivisions per edge
inline int lattice_index(int i, int j, int n_sub) {
  return j * (n_sub + 1) - j * (j - 1) / 2 + i;
}

}  // namespace detail

inline int vtk_points_per_cell(int m) { return (m + 2) * (m + 3) / 2; }

/// Legacy ASCII VTK snapshot. Each cell is subdivided into (m+1)^2
/// sub-triangles with duplicated shared points, so the discontinuous
/// velocity, pressure and pointwise divergence render faithfully.
inline void write_vtk(const Mesh& mesh, const LocalOperatorCache& cache, const DofMap& dof,
                      const FieldState& s, const std::string& path) {
  const int n_sub = dof.m + 1;
  const int ppc = vtk_points_per_cell(dof.m);
  const int tpc = n_sub * n_sub;
  const int n_pts = mesh.n_cells() * ppc;
  const int n_tris = mesh.n_cells() * tpc;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write VTK file: " + path);
  char buf[160];

  out << "# vtk DataFile Version 3.0\n";
  std::snprintf(buf, sizeof buf, "wgbf snapshot t=%.9e\n", s.time);
  out << buf;
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n_pts << " double\n";

  std::vector<double> vel_x(n_pts), vel_y(n_pts), pres(n_pts), divg(n_pts);
  int pt = 0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellOps& op = cache.cell[c];
    PointList pts(ppc, 2);
    int k = 0;
    for (int j = 0; j <= n_sub; ++j)
      for (int i = 0; i + j <= n_sub; ++i, ++k)
        pts.row(k) = (op.geom.v[0] + (double(i) / n_sub) * (op.geom.v[1] - op.geom.v[0]) +
                      (double(j) / n_sub) * (op.geom.v[2] - op.geom.v[0]))
                         .transpose();
    const MatrixXd phi = op.vel.values(pts);
    MatrixXd gx, gy;
    op.vel.gradients(pts, gx, gy);
    const MatrixXd psi = op.pre.values(pts);

    Eigen::VectorXd cx(dof.dim_vel), cy(dof.dim_vel), cp(dof.dim_pre);
    for (int i = 0; i < dof.dim_vel; ++i) {
      cx[i] = s.x[dof.u_interior(c, 0, i)];
      cy[i] = s.x[dof.u_interior(c, 1, i)];
    }
    for (int i = 0; i < dof.dim_pre; ++i) cp[i] = s.x[dof.p_interior(c, i)];
    const Eigen::VectorXd ux = phi * cx, uy = phi * cy;
    const Eigen::VectorXd dv = gx * cx + gy * cy;
    const Eigen::VectorXd ph = psi * cp;

    for (int i = 0; i < ppc; ++i, ++pt) {
      std::snprintf(buf, sizeof buf, "%.9e %.9e 0\n", pts(i, 0), pts(i, 1));
      out << buf;
      vel_x[pt] = ux[i];
      vel_y[pt] = uy[i];
      pres[pt] = ph[i];
      divg[pt] = dv[i];
    }
  }

  out << "CELLS " << n_tris << " " << 4 * n_tris << "\n";
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int off = c * ppc;
    for (int j = 0; j < n_sub; ++j)
      for (int i = 0; i + j < n_sub; ++i) {
        out << "3 " << off + detail::lattice_index(i, j, n_sub) << " "
            << off + detail::lattice_index(i + 1, j, n_sub) << " "
            << off + detail::lattice_index(i, j + 1, n_sub) << "\n";
        if (i + j < n_sub - 1)
          out << "3 " << off + detail::lattice_index(i + 1, j, n_sub) << " "
              << off + detail::lattice_index(i + 1, j + 1, n_sub) << " "
              << off + detail::lattice_index(i, j + 1, n_sub) << "\n";
      }
  }
  out << "CELL_TYPES " << n_tris << "\n";
  for (int i = 0; i < n_tris; ++i) out << "5\n";

  out << "POINT_DATA " << n_pts << "\n";
  out << "VECTORS velocity double\n";
  for (int i = 0; i < n_pts; ++i) {
    std::snprintf(buf, sizeof buf, "%.9e %.9e 0\n", vel_x[i], vel_y[i]);
    out << buf;
  }
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < n_pts; ++i) {
    std::snprintf(buf, sizeof buf, "%.9e\n", pres[i]);
    out << buf;
  }
  out << "SCALARS divergence double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < n_pts; ++i) {
    std::snprintf(buf, sizeof buf, "%.9e\n", divg[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace wgbf
