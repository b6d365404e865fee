#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/grammar/design_graph.hpp"
#include "forge/meshkit/mesh.hpp"

namespace forge::knit {

class KnitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stitches per millimetre along the finger (courses) and around it (wales).
struct Gauge {
  double course = 0.5;
  double wale = 0.5;
};

enum class StitchKind { Knit, Increase, Decrease, Sensor };
std::string_view to_string(StitchKind k);

using Point2 = Eigen::Vector2d;

struct StitchFace {
  std::uint32_t id = 0;
  StitchKind kind = StitchKind::Knit;
  int course = 0;
  int wale = 0;
  /// Planar outline: 4 points for quads, 5 for shaping pentagons.
  std::vector<Point2> geometry;
  /// Knit-mesh facet the stitch was cut from.
  grammar::NodeId node = 0;
  std::string side;

  bool is_pentagon() const { return kind == StitchKind::Increase || kind == StitchKind::Decrease; }
};

struct StitchMesh {
  std::string patch;
  Gauge gauge;
  std::vector<StitchFace> faces;
  /// Face ids per course in wale order.
  std::vector<std::vector<std::uint32_t>> courses;

  const StitchFace& face(std::uint32_t id) const;
  std::optional<std::uint32_t> find(int course, int wale) const;
  std::size_t count(StitchKind kind) const;
};

/// Sides of a finger cover in the component frame: front +y, right +x,
/// back -y, left -x.
enum class Side { Front, Right, Back, Left };
std::string_view to_string(Side s);
Side side_from_string(std::string_view text);

/// A cover patch: a proximal-to-distal chain of finger nodes and the
/// contiguous sides the band wraps.
struct KnitRegion {
  std::vector<grammar::NodeId> chain;
  std::vector<Side> sides;
};

/// Band with one course per entry of `perimeters` (mm). Stitch counts are
/// round(perimeter * wale gauge); count changes become evenly spaced
/// increase or decrease pentagons in the later course.
StitchMesh stitch_band(const std::vector<double>& perimeters, const Gauge& gauge, std::string patch = "p0");

/// Slices the deformed knit meshes of the region perpendicular to the finger
/// axis: round(axial length * course gauge) courses per node, perimeter taken
/// over the selected sides at mid-course.
StitchMesh generate_stitch_mesh(const grammar::DesignGraph& design, const std::vector<meshkit::PolyMesh>& knit_meshes,
                                const KnitRegion& region, const Gauge& gauge, std::string patch);

/// Course perimeters `generate_stitch_mesh` would use.
std::vector<double> region_perimeters(const grammar::DesignGraph& design, const std::vector<meshkit::PolyMesh>& knit_meshes,
                                      const KnitRegion& region, const Gauge& gauge,
                                      std::vector<std::pair<grammar::NodeId, double>>* course_source = nullptr);

StitchMesh place_sensor(const StitchMesh& mesh, std::uint32_t face_id);
StitchMesh unplace_sensor(const StitchMesh& mesh, std::uint32_t face_id);

/// Throws KnitError if courses are empty, out of order, or ids disagree.
void validate_stitch_mesh(const StitchMesh& mesh);

}  // namespace forge::knit
