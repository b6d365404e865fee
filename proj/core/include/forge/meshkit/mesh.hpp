#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/geometry/transform.hpp"

namespace forge::meshkit {

using geometry::Vec3;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Triangle mesh in millimetres. `shell` and `port` are per-triangle labels:
/// which closed shell of a component the triangle belongs to, and the port
/// face it caps ("" when it caps none).
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<int> shell;
  std::vector<std::string> port;

  std::size_t size() const { return triangles.size(); }
  void add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, int shell_id = 0, std::string port_name = {});
  /// Throws MeshError on out-of-range indices, label size mismatch, or a
  /// triangle with area <= 1e-12 mm^2.
  void validate() const;
  void transform(const geometry::Transform& t);
};

/// Faces with 3 or more vertices (the knit and cage meshes are quad meshes).
struct PolyMesh {
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::uint32_t>> faces;
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
/// Volume enclosed by a closed, outward-oriented mesh (positive).
double signed_volume(const TriMesh& mesh);

struct WatertightReport {
  bool is_watertight = false;
  std::size_t boundary_edge_count = 0;
  std::size_t nonmanifold_edge_count = 0;
  /// Edges used twice in the same direction (flipped neighbour).
  std::size_t misoriented_edge_count = 0;
};

/// Exact classification by counting directed half-edges per undirected edge.
WatertightReport check_watertight(const TriMesh& mesh);

// Text format, one record per line:
//   forge-mesh 1
//   v x y z            vertex (0-based index by order)
//   s N                following faces belong to shell N
//   p NAME | p -       following faces cap port NAME / no port
//   f i j k [l ...]    face; polygons are fanned into triangles for TriMesh
struct MeshFile {
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::uint32_t>> faces;
  std::vector<int> shell;
  std::vector<std::string> port;

  TriMesh triangulated() const;
  PolyMesh poly() const;
};

MeshFile read_mesh_file(const std::filesystem::path& path);
MeshFile parse_mesh(std::string_view text);
std::string format_mesh(const MeshFile& mesh);

}  // namespace forge::meshkit
