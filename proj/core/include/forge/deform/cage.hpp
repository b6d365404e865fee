#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/grammar/design_graph.hpp"
#include "forge/meshkit/library.hpp"

namespace forge::deform {

using geometry::Vec3;
using VertexId = std::uint32_t;

class DeformError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Free cells take any edit; joint cells stay boxes whose cross-section
/// around the pin scales uniformly, with the pin axis free.
enum class CellClass { Free, Joint };
std::string_view to_string(CellClass c);

struct CageCell {
  grammar::NodeId node = 0;
  CellClass cls = CellClass::Free;
  /// World axis of the pin for joint cells, -1 otherwise.
  int pin_axis = -1;
  /// Shared vertex ids in corner order (bit 0 = +x, bit 1 = +y, bit 2 = +z).
  std::array<VertexId, 8> corners{};
  geometry::Box rest_box;
};

struct Violation {
  std::size_t cell = 0;
  grammar::NodeId node = 0;
  CellClass cls = CellClass::Free;
  std::string kind;  // "shear", "scale" or "inverted"
  double magnitude = 0;

  std::string describe() const;
};

struct EditResult {
  Vec3 position;
  /// True when a joint constraint moved the request.
  bool projected = false;
};

struct DeformedMeshes {
  std::vector<meshkit::TriMesh> print;
  std::vector<meshkit::PolyMesh> knit;
};

/// One cuboid cell per design node, in world millimetres, with the four
/// corners of every mating face shared between the two cells.
class CageAssembly {
 public:
  const std::vector<CageCell>& cells() const { return cells_; }
  const std::vector<Vec3>& rest_positions() const { return rest_; }
  const std::vector<Vec3>& current_positions() const { return current_; }
  std::size_t vertex_count() const { return rest_.size(); }
  const std::vector<std::size_t>& cells_of(VertexId v) const { return incident_.at(v); }
  std::array<Vec3, 8> corners(std::size_t cell) const;
  std::array<Vec3, 8> rest_corners(std::size_t cell) const;
  /// A cell is dirty when any of its corners left its rest position.
  bool dirty(std::size_t cell) const;

  const meshkit::TriMesh& rest_print(std::size_t cell) const { return rest_print_[cell]; }
  const meshkit::PolyMesh& rest_knit(std::size_t cell) const { return rest_knit_[cell]; }

  /// Moves vertices without any constraint handling (state load, tests).
  void set_position(VertexId v, const Vec3& p);
  void reset();
  /// Vertices away from rest, ascending id.
  std::vector<std::pair<VertexId, Vec3>> deltas() const;

 private:
  friend CageAssembly bind_cages(const grammar::DesignGraph&, const meshkit::ComponentLibrary&);

  std::vector<CageCell> cells_;
  std::vector<Vec3> rest_;
  std::vector<Vec3> current_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<meshkit::TriMesh> rest_print_;
  std::vector<meshkit::PolyMesh> rest_knit_;
};

/// Throws DeformError when a mating face disagrees by more than 1e-9 mm.
CageAssembly bind_cages(const grammar::DesignGraph& design, const meshkit::ComponentLibrary& library);

/// Applies the edit and returns the position actually stored. Throws
/// DeformError (state unchanged) if the edit would invert a cell or cannot be
/// reconciled with the joint constraints.
EditResult propose_vertex_edit(CageAssembly& assembly, VertexId vertex, const Vec3& position);

DeformedMeshes deform_meshes(const CageAssembly& assembly);

std::vector<Violation> check_constraints(const CageAssembly& assembly);

/// Trilinear blend of eight corners at parameters in [0, 1]^3.
Vec3 trilinear(const std::array<Vec3, 8>& corners, const Vec3& param);
/// Parameters of a point relative to an axis-aligned box.
Vec3 box_param(const geometry::Box& box, const Vec3& p);
/// Image of a rest-pose world point under one cell's current map.
Vec3 map_point(const CageAssembly& assembly, std::size_t cell, const Vec3& rest_point);
/// Smallest corner Jacobian determinant of a cell.
double min_corner_jacobian(const std::array<Vec3, 8>& corners);

}  // namespace forge::deform
