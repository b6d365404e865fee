#include "forge/meshkit/stl.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace forge::meshkit {

namespace {

using Tri = std::array<float, 9>;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

}  // namespace

std::string stl_bytes(const TriMesh& mesh) {
  const auto report = check_watertight(mesh);
  if (!report.is_watertight)
    throw MeshError("refusing to export a mesh that is not watertight (" + std::to_string(report.boundary_edge_count) +
                    " boundary, " + std::to_string(report.nonmanifold_edge_count) + " non-manifold edges)");

  std::vector<Tri> tris;
  tris.reserve(mesh.size());
  for (const auto& t : mesh.triangles) {
    std::array<std::array<float, 3>, 3> v;
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 3; ++c) v[i][c] = static_cast<float>(mesh.vertices[t[i]][c]);
    // Start from the smallest vertex; a cyclic shift keeps the winding.
    const auto first = std::min_element(v.begin(), v.end()) - v.begin();
    std::rotate(v.begin(), v.begin() + first, v.end());
    Tri flat;
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 3; ++c) flat[3 * i + c] = v[i][c];
    tris.push_back(flat);
  }
  std::sort(tris.begin(), tris.end());

  std::string out(kStlHeader);
  out.resize(80, ' ');
  put_u32(out, static_cast<std::uint32_t>(tris.size()));
  for (const auto& t : tris) {
    const Vec3 a(t[0], t[1], t[2]), b(t[3], t[4], t[5]), c(t[6], t[7], t[8]);
    Vec3 n = (b - a).cross(c - a);
    if (n.norm() > 0) n.normalize();
    for (int i = 0; i < 3; ++i) put_f32(out, static_cast<float>(n[i]));
    for (float f : t) put_f32(out, f);
    out.push_back(0);
    out.push_back(0);
  }
  return out;
}

void export_stl(const TriMesh& mesh, const std::filesystem::path& path) {
  const std::string bytes = stl_bytes(mesh);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MeshError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw MeshError("write failed for " + path.string());
}

}  // namespace forge::meshkit
