#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgbf {

using Vec2 = Eigen::Vector2d;

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

/// Triangular mesh with full edge topology. Immutable after construction.
///
/// Edges carry a canonical orientation (lower vertex index first) and a
/// canonical unit normal (tangent rotated by -90 degrees). Each cell stores,
/// for each of its three edges, the edge index and the sign that turns the
/// canonical normal into the outward normal of the cell.
struct Mesh {
  struct CellEdge {
    int edge = -1;
    double sign = 1.0;  // outward normal of the cell = sign * edge_normal
  };

  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;  // counter-clockwise
  std::vector<std::array<int, 2>> edges;  // lower vertex index first
  std::vector<std::array<CellEdge, 3>> cell_edges;  // local edges (v0,v1),(v1,v2),(v2,v0)
  std::vector<std::array<int, 2>> edge_cells;       // incident cells, -1 when boundary
  std::vector<bool> edge_on_boundary;
  std::vector<int> boundary_edges;

  std::vector<double> cell_area;
  std::vector<double> cell_h;  // diameter (longest side)
  std::vector<Vec2> cell_centroid;
  std::vector<double> edge_h;
  std::vector<Vec2> edge_normal;
  std::vector<Vec2> edge_midpoint;
  double h = 0.0;

  int reoriented_cells = 0;  // clockwise inputs flipped during construction

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  std::array<Vec2, 3> cell_vertices(int c) const {
    return {vertices[cells[c][0]], vertices[cells[c][1]], vertices[cells[c][2]]};
  }
  std::array<int, 2> edge_endpoints(int e) const { return edges[e]; }
};

struct MeshOptions {
  bool reject_inverted = false;  // otherwise clockwise cells are reoriented
};

namespace detail {

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace detail

/// Builds edge topology, orientations and size metrics from raw vertex and
/// cell lists. Throws on out-of-range indices, duplicate or degenerate
/// cells, and non-manifold edges.
inline Mesh compute_topology(std::vector<Vec2> vertices,
                             std::vector<std::array<int, 3>> cells,
                             const MeshOptions& opts = {}) {
  Mesh m;
  m.vertices = std::move(vertices);
  m.cells = std::move(cells);

  const int nv = m.n_vertices();
  for (int c = 0; c < m.n_cells(); ++c) {
    for (int k = 0; k < 3; ++k) {
      const int v = m.cells[c][k];
      if (v < 0 || v >= nv)
        throw std::out_of_range("cell " + std::to_string(c) + " references vertex " +
                                std::to_string(v) + " of " + std::to_string(nv));
    }
    const auto& cv = m.cells[c];
    if (cv[0] == cv[1] || cv[1] == cv[2] || cv[0] == cv[2])
      throw std::invalid_argument("cell " + std::to_string(c) + " has repeated vertices");
  }

  {
    std::map<std::array<int, 3>, int> seen;
    for (int c = 0; c < m.n_cells(); ++c) {
      std::array<int, 3> key = m.cells[c];
      std::sort(key.begin(), key.end());
      auto [it, inserted] = seen.emplace(key, c);
      if (!inserted)
        throw std::invalid_argument("duplicate cell " + std::to_string(c) + " and " +
                                    std::to_string(it->second));
    }
  }

  m.cell_area.resize(m.n_cells());
  m.cell_h.resize(m.n_cells());
  m.cell_centroid.resize(m.n_cells());
  for (int c = 0; c < m.n_cells(); ++c) {
    auto& cv = m.cells[c];
    double a = detail::signed_area(m.vertices[cv[0]], m.vertices[cv[1]], m.vertices[cv[2]]);
    if (a < 0.0) {
      if (opts.reject_inverted)
        throw std::invalid_argument("cell " + std::to_string(c) + " has clockwise orientation");
      std::swap(cv[1], cv[2]);
      a = -a;
      ++m.reoriented_cells;
    }
    if (!(a > 0.0))
      throw std::invalid_argument("cell " + std::to_string(c) + " is degenerate (zero area)");
    m.cell_area[c] = a;
    const auto p = m.cell_vertices(c);
    m.cell_centroid[c] = (p[0] + p[1] + p[2]) / 3.0;
    m.cell_h[c] = std::max({(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()});
  }

  // canonical edges: lower vertex index first
  std::map<std::array<int, 2>, int> edge_index;
  m.cell_edges.resize(m.n_cells());
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto& cv = m.cells[c];
    for (int k = 0; k < 3; ++k) {
      const int a = cv[k], b = cv[(k + 1) % 3];
      const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      auto [it, inserted] = edge_index.emplace(key, static_cast<int>(m.edges.size()));
      if (inserted) {
        m.edges.push_back(key);
        m.edge_cells.push_back({-1, -1});
      }
      const int e = it->second;
      if (m.edge_cells[e][0] == -1) {
        m.edge_cells[e][0] = c;
      } else if (m.edge_cells[e][1] == -1) {
        m.edge_cells[e][1] = c;
      } else {
        throw std::invalid_argument("non-manifold edge (" + std::to_string(key[0]) + "," +
                                    std::to_string(key[1]) + ") shared by more than two cells");
      }
      // the cell traverses a->b; outward normal of a CCW cell is the
      // traversal tangent rotated by -90 degrees, which matches the
      // canonical normal exactly when a < b
      m.cell_edges[c][k] = {e, a < b ? 1.0 : -1.0};
    }
  }

  m.edge_h.resize(m.n_edges());
  m.edge_normal.resize(m.n_edges());
  m.edge_midpoint.resize(m.n_edges());
  m.edge_on_boundary.resize(m.n_edges());
  for (int e = 0; e < m.n_edges(); ++e) {
    const Vec2 a = m.vertices[m.edges[e][0]], b = m.vertices[m.edges[e][1]];
    const Vec2 t = b - a;
    m.edge_h[e] = t.norm();
    m.edge_normal[e] = Vec2(t.y(), -t.x()) / m.edge_h[e];
    m.edge_midpoint[e] = 0.5 * (a + b);
    m.edge_on_boundary[e] = (m.edge_cells[e][1] == -1);
    if (m.edge_on_boundary[e]) m.boundary_edges.push_back(e);
  }

  m.h = 0.0;
  for (double hk : m.cell_h) m.h = std::max(m.h, hk);

  // outward-normal sanity: (midpoint(e) - centroid(K)) . n_K > 0
  for (int c = 0; c < m.n_cells(); ++c) {
    for (const auto& ce : m.cell_edges[c]) {
      const Vec2 nk = ce.sign * m.edge_normal[ce.edge];
      if ((m.edge_midpoint[ce.edge] - m.cell_centroid[c]).dot(nk) <= 0.0)
        throw std::logic_error("outward normal check failed on cell " + std::to_string(c));
    }
  }

  // Euler formula for a simply-connected planar complex
  if (m.n_vertices() - m.n_edges() + m.n_cells() != 1)
    throw std::invalid_argument("mesh is not a simply-connected planar complex (V-E+F != 1)");

  return m;
}

/// Uniform triangulation of an axis-aligned rectangle: nx-by-ny squares,
/// each split along its lower-left to upper-right diagonal.
inline Mesh generate_uniform(int nx, int ny, const Rect& domain = {}) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("generate_uniform: nx, ny must be >= 1");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0))
    throw std::invalid_argument("generate_uniform: degenerate domain");

  std::vector<Vec2> vertices;
  vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      vertices.emplace_back(domain.x0 + (domain.x1 - domain.x0) * i / nx,
                            domain.y0 + (domain.y1 - domain.y0) * j / ny);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      cells.push_back({v00, v10, v11});
      cells.push_back({v00, v11, v01});
    }
  }
  return compute_topology(std::move(vertices), std::move(cells));
}

// ---------------------------------------------------------------------------
// Mesh file I/O. Plain ASCII:
//   vertices N
//   x y            (N lines)
//   cells M
//   i j k          (M lines, 0-based)
// A Triangle-style .node/.ele pair is also accepted (pass the .node path).
// ---------------------------------------------------------------------------

namespace detail {

struct LineReader {
  std::istream& in;
  std::string path;
  int lineno = 0;

  // next non-empty, non-comment line
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++lineno;
      const auto pos = line.find('#');
      if (pos != std::string::npos) line.erase(pos);
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
  }
};

inline Mesh read_node_ele(const std::string& node_path, const MeshOptions& opts) {
  const std::string ele_path = node_path.substr(0, node_path.size() - 5) + ".ele";
  std::ifstream fn(node_path), fe(ele_path);
  if (!fn) throw std::runtime_error("cannot open mesh file: " + node_path);
  if (!fe) throw std::runtime_error("cannot open mesh file: " + ele_path);

  LineReader rn{fn, node_path}, re{fe, ele_path};
  std::string line;
  if (!rn.next(line)) rn.fail("missing node header");
  int nv = 0, dim = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> nv >> dim) || dim != 2) rn.fail("expected '<N> 2 ...' node header");
  }
  std::vector<Vec2> vertices(nv);
  int first_index = 0;
  for (int i = 0; i < nv; ++i) {
    if (!rn.next(line)) rn.fail("unexpected end of node list");
    std::istringstream ss(line);
    int idx;
    double x, y;
    if (!(ss >> idx >> x >> y)) rn.fail("malformed node line");
    if (i == 0) first_index = idx;
    const int k = idx - first_index;
    if (k < 0 || k >= nv) rn.fail("node index out of range");
    vertices[k] = Vec2(x, y);
  }

  if (!re.next(line)) re.fail("missing element header");
  int nc = 0, npc = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> nc >> npc) || npc != 3) re.fail("expected '<M> 3 ...' element header");
  }
  std::vector<std::array<int, 3>> cells(nc);
  for (int c = 0; c < nc; ++c) {
    if (!re.next(line)) re.fail("unexpected end of element list");
    std::istringstream ss(line);
    int idx, a, b, d;
    if (!(ss >> idx >> a >> b >> d)) re.fail("malformed element line");
    cells[c] = {a - first_index, b - first_index, d - first_index};
  }
  return compute_topology(std::move(vertices), std::move(cells), opts);
}

}  // namespace detail

inline Mesh import_mesh(const std::string& path, const MeshOptions& opts = {}) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".node")
    return detail::read_node_ele(path, opts);

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  detail::LineReader r{in, path};
  std::string line, kw;

  if (!r.next(line)) r.fail("missing 'vertices N' header");
  int nv = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> kw >> nv) || kw != "vertices" || nv < 3) r.fail("expected 'vertices N'");
  }
  std::vector<Vec2> vertices(nv);
  for (int i = 0; i < nv; ++i) {
    if (!r.next(line)) r.fail("unexpected end of vertex list");
    std::istringstream ss(line);
    if (!(ss >> vertices[i].x() >> vertices[i].y())) r.fail("malformed vertex line");
  }

  if (!r.next(line)) r.fail("missing 'cells M' header");
  int nc = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> kw >> nc) || kw != "cells" || nc < 1) r.fail("expected 'cells M'");
  }
  std::vector<std::array<int, 3>> cells(nc);
  for (int c = 0; c < nc; ++c) {
    if (!r.next(line)) r.fail("unexpected end of cell list");
    std::istringstream ss(line);
    if (!(ss >> cells[c][0] >> cells[c][1] >> cells[c][2])) r.fail("malformed cell line");
  }

  try {
    return compute_topology(std::move(vertices), std::move(cells), opts);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline void export_mesh(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file: " + path);
  out.precision(17);
  out << "vertices " << m.n_vertices() << "\n";
  for (const auto& v : m.vertices) out << v.x() << " " << v.y() << "\n";
  out << "cells " << m.n_cells() << "\n";
  for (const auto& c : m.cells) out << c[0] << " " << c[1] << " " << c[2] << "\n";
}

}  // namespace wgbf
