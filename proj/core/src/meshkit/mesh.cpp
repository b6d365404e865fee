#include "forge/meshkit/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace forge::meshkit {

void TriMesh::add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, int shell_id, std::string port_name) {
  triangles.push_back({a, b, c});
  shell.push_back(shell_id);
  port.push_back(std::move(port_name));
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

void TriMesh::validate() const {
  if (shell.size() != triangles.size() || port.size() != triangles.size())
    throw MeshError("triangle label arrays do not match the triangle count");
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (auto idx : triangles[i])
      if (idx >= vertices.size()) throw MeshError("triangle " + std::to_string(i) + " has an out-of-range index");
    const auto& t = triangles[i];
    if (triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) <= 1e-12)
      throw MeshError("triangle " + std::to_string(i) + " is degenerate");
  }
}

void TriMesh::transform(const geometry::Transform& t) {
  for (auto& v : vertices) v = t.apply(v);
  if (t.rotation.determinant() < 0)
    for (auto& tri : triangles) std::swap(tri[1], tri[2]);
}

double signed_volume(const TriMesh& mesh) {
  double vol = 0;
  for (const auto& t : mesh.triangles)
    vol += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  return vol / 6.0;
}

WatertightReport check_watertight(const TriMesh& mesh) {
  // (low, high) -> uses as low->high, uses as high->low
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<int, int>> edges;
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const std::uint32_t a = t[i];
      const std::uint32_t b = t[(i + 1) % 3];
      auto& e = edges[{std::min(a, b), std::max(a, b)}];
      (a < b ? e.first : e.second)++;
    }
  }
  WatertightReport r;
  for (const auto& [key, uses] : edges) {
    const int total = uses.first + uses.second;
    if (total == 1) {
      ++r.boundary_edge_count;
    } else if (total > 2) {
      ++r.nonmanifold_edge_count;
    } else if (uses.first != 1) {
      ++r.misoriented_edge_count;
    }
  }
  r.is_watertight = !mesh.triangles.empty() && r.boundary_edge_count == 0 && r.nonmanifold_edge_count == 0 &&
                    r.misoriented_edge_count == 0;
  return r;
}

TriMesh MeshFile::triangulated() const {
  TriMesh m;
  m.vertices = vertices;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto& f = faces[i];
    for (std::size_t k = 1; k + 1 < f.size(); ++k) m.add_triangle(f[0], f[k], f[k + 1], shell[i], port[i]);
  }
  return m;
}

PolyMesh MeshFile::poly() const { return PolyMesh{vertices, faces}; }

MeshFile parse_mesh(std::string_view text) {
  MeshFile m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  int shell = 0;
  std::string port;
  bool header = false;
  auto fail = [&](const std::string& msg) { throw MeshError("mesh line " + std::to_string(line_no) + ": " + msg); };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw) || kw[0] == '#') continue;
    if (!header) {
      int version = 0;
      if (kw != "forge-mesh" || !(ls >> version)) fail("expected 'forge-mesh <version>' header");
      if (version != 1) fail("unsupported mesh version " + std::to_string(version));
      header = true;
    } else if (kw == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("vertex needs three coordinates");
      m.vertices.emplace_back(x, y, z);
    } else if (kw == "s") {
      if (!(ls >> shell)) fail("shell needs an index");
    } else if (kw == "p") {
      if (!(ls >> port)) fail("port needs a name or '-'");
      if (port == "-") port.clear();
    } else if (kw == "f") {
      std::vector<std::uint32_t> f;
      for (long idx; ls >> idx;) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= m.vertices.size()) fail("face index out of range");
        f.push_back(static_cast<std::uint32_t>(idx));
      }
      if (f.size() < 3) fail("face needs at least three indices");
      m.faces.push_back(std::move(f));
      m.shell.push_back(shell);
      m.port.push_back(port);
    } else {
      fail("unknown record '" + kw + "'");
    }
  }
  if (!header) throw MeshError("empty mesh file");
  return m;
}

MeshFile read_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_mesh(ss.str());
  } catch (const MeshError& e) {
    throw MeshError(path.string() + ": " + e.what());
  }
}

namespace {
std::string num(double x) {
  if (x == 0) x = 0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
}  // namespace

std::string format_mesh(const MeshFile& mesh) {
  std::string out = "forge-mesh 1\n";
  for (const auto& v : mesh.vertices) out += "v " + num(v.x()) + " " + num(v.y()) + " " + num(v.z()) + "\n";
  int shell = 0;
  std::string port;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    if (mesh.shell[i] != shell) {
      shell = mesh.shell[i];
      out += "s " + std::to_string(shell) + "\n";
    }
    if (mesh.port[i] != port) {
      port = mesh.port[i];
      out += "p " + (port.empty() ? std::string("-") : port) + "\n";
    }
    out += "f";
    for (auto idx : mesh.faces[i]) out += " " + std::to_string(idx);
    out += "\n";
  }
  return out;
}

}  // namespace forge::meshkit
