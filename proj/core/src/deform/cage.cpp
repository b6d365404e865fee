#include "forge/deform/cage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "forge/meshkit/assembly.hpp"

namespace forge::deform {

using grammar::NodeId;

namespace {

constexpr double kMatchTol = 1e-9;
constexpr double kInvertRatio = 1e-6;
constexpr double kShapeTol = 1e-9;

int world_axis(const geometry::Transform& t, int local_axis) {
  const Vec3 d = t.apply_direction(Vec3::Unit(local_axis));
  int a = 0;
  d.cwiseAbs().maxCoeff(&a);
  return a;
}

std::string node_name(const grammar::DesignGraph& design, NodeId id) {
  return "node " + std::to_string(id) + " (" + design.node(id).symbol + ")";
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

std::string_view to_string(CellClass c) { return c == CellClass::Joint ? "joint" : "free"; }

std::string Violation::describe() const {
  return "cell " + std::to_string(cell) + " (node " + std::to_string(node) + ", " + std::string(to_string(cls)) +
         "): " + kind + " " + fmt(magnitude);
}

Vec3 trilinear(const std::array<Vec3, 8>& c, const Vec3& p) {
  const double s = p.x(), t = p.y(), u = p.z();
  const double w[8] = {(1 - s) * (1 - t) * (1 - u), s * (1 - t) * (1 - u), (1 - s) * t * (1 - u), s * t * (1 - u),
                       (1 - s) * (1 - t) * u,       s * (1 - t) * u,       (1 - s) * t * u,       s * t * u};
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < 8; ++i) out += w[i] * c[i];
  return out;
}

Vec3 box_param(const geometry::Box& box, const Vec3& p) {
  return (p - box.min).cwiseQuotient(box.extent());
}

double min_corner_jacobian(const std::array<Vec3, 8>& c) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 8; ++i) {
    geometry::Mat3 j;
    for (int a = 0; a < 3; ++a) {
      const int bit = 1 << a;
      j.col(a) = c[i | bit] - c[i & ~bit];
    }
    best = std::min(best, j.determinant());
  }
  return best;
}

std::array<Vec3, 8> CageAssembly::corners(std::size_t cell) const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) out[i] = current_[cells_[cell].corners[i]];
  return out;
}

std::array<Vec3, 8> CageAssembly::rest_corners(std::size_t cell) const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) out[i] = rest_[cells_[cell].corners[i]];
  return out;
}

bool CageAssembly::dirty(std::size_t cell) const {
  for (VertexId v : cells_[cell].corners)
    if (current_[v] != rest_[v]) return true;
  return false;
}

void CageAssembly::set_position(VertexId v, const Vec3& p) {
  if (v >= current_.size()) throw DeformError("no cage vertex " + std::to_string(v));
  current_[v] = p;
}

void CageAssembly::reset() { current_ = rest_; }

std::vector<std::pair<VertexId, Vec3>> CageAssembly::deltas() const {
  std::vector<std::pair<VertexId, Vec3>> out;
  for (VertexId v = 0; v < current_.size(); ++v)
    if (current_[v] != rest_[v]) out.emplace_back(v, current_[v]);
  return out;
}

CageAssembly bind_cages(const grammar::DesignGraph& design, const meshkit::ComponentLibrary& library) {
  const auto placement = meshkit::place_design(design, library);
  CageAssembly a;
  std::vector<Vec3> raw;
  for (const auto& n : design.nodes()) {
    const auto& b = library.bundle(n.symbol);
    CageCell cell;
    cell.node = n.id;
    cell.rest_box = geometry::transform_box(b.cage, placement[n.id]);
    if (b.cage_class == meshkit::CageClass::Joint) {
      cell.cls = CellClass::Joint;
      cell.pin_axis = world_axis(placement[n.id], b.pin_axis);
    }
    for (int i = 0; i < 8; ++i) {
      cell.corners[i] = static_cast<VertexId>(raw.size());
      raw.push_back(cell.rest_box.corner(i));
    }
    a.cells_.push_back(cell);
  }

  std::vector<VertexId> parent(raw.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](VertexId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto corner_of = [&](NodeId node, const Vec3& p) -> int {
    const auto& cell = a.cells_[node];
    for (int i = 0; i < 8; ++i)
      if ((cell.rest_box.corner(i) - p).norm() <= kMatchTol) return i;
    return -1;
  };
  for (const auto& e : design.edges()) {
    const auto pf = library.bundle(design.node(e.from).symbol).port(e.port_from).frame.transformed(placement[e.from]);
    const auto cf = library.bundle(design.node(e.to).symbol).port(e.port_to).frame.transformed(placement[e.to]);
    const std::string pair = node_name(design, e.from) + " port " + e.port_from + " and " + node_name(design, e.to) +
                             " port " + e.port_to;
    const auto pc = pf.corners();
    const auto cc = cf.corners();
    for (const auto& p : pc) {
      const auto near = std::min_element(cc.begin(), cc.end(), [&](const Vec3& x, const Vec3& y) {
        return (x - p).norm() < (y - p).norm();
      });
      const double gap = (*near - p).norm();
      if (gap > kMatchTol) throw DeformError("mating faces of " + pair + " disagree by " + fmt(gap) + " mm");
      const int ip = corner_of(e.from, p);
      const int ic = corner_of(e.to, *near);
      if (ip < 0 || ic < 0) throw DeformError("mating face of " + pair + " is not a cage face");
      const VertexId x = find(a.cells_[e.from].corners[ip]);
      const VertexId y = find(a.cells_[e.to].corners[ic]);
      if (x != y) parent[std::max(x, y)] = std::min(x, y);
    }
  }
  std::vector<VertexId> id(raw.size(), UINT32_MAX);
  for (VertexId v = 0; v < raw.size(); ++v) {
    const VertexId r = find(v);
    if (id[r] == UINT32_MAX) {
      id[r] = static_cast<VertexId>(a.rest_.size());
      a.rest_.push_back(raw[r]);
    }
    id[v] = id[r];
  }
  a.current_ = a.rest_;
  a.incident_.resize(a.rest_.size());
  for (std::size_t c = 0; c < a.cells_.size(); ++c) {
    for (auto& v : a.cells_[c].corners) {
      v = id[v];
      a.incident_[v].push_back(c);
    }
  }

  a.rest_print_ = meshkit::placed_print_meshes(design, library, placement);
  for (const auto& n : design.nodes()) {
    meshkit::PolyMesh knit = library.bundle(n.symbol).knit;
    for (auto& v : knit.vertices) v = placement[n.id].apply(v);
    if (placement[n.id].rotation.determinant() < 0)
      for (auto& f : knit.faces) std::reverse(f.begin(), f.end());
    a.rest_knit_.push_back(std::move(knit));
  }
  return a;
}

namespace {

void check_not_inverted(const CageAssembly& a, const std::vector<std::size_t>& cells) {
  for (std::size_t c : cells) {
    const double det = min_corner_jacobian(a.corners(c));
    const double floor = kInvertRatio * a.cells()[c].rest_box.volume();
    if (det <= floor)
      throw DeformError("edit would invert cell " + std::to_string(c) + " (node " + std::to_string(a.cells()[c].node) +
                        "): corner Jacobian " + fmt(det) + " <= " + fmt(floor));
  }
}

}  // namespace

EditResult propose_vertex_edit(CageAssembly& a, VertexId vertex, const Vec3& position) {
  if (vertex >= a.vertex_count()) throw DeformError("no cage vertex " + std::to_string(vertex));
  if (!position.allFinite()) throw DeformError("edit position is not finite");
  std::vector<std::size_t> joints;
  for (std::size_t c : a.cells_of(vertex))
    if (a.cells()[c].cls == CellClass::Joint) joints.push_back(c);
  if (joints.size() > 1) throw DeformError("vertex " + std::to_string(vertex) + " is shared by two joint cells");

  const auto saved = a.current_positions();
  auto restore = [&] {
    for (VertexId v = 0; v < saved.size(); ++v) a.set_position(v, saved[v]);
  };

  EditResult result{position, false};
  std::vector<std::size_t> touched = a.cells_of(vertex);
  if (joints.empty()) {
    a.set_position(vertex, position);
  } else {
    const std::size_t jc = joints.front();
    const CageCell& cell = a.cells()[jc];
    const int corner = static_cast<int>(std::find(cell.corners.begin(), cell.corners.end(), vertex) - cell.corners.begin());
    const auto now = a.corners(jc);
    const Vec3 o = now[7 - corner];
    const Vec3 e = now[corner] - o;
    const Vec3 d = position - o;
    const int pa = cell.pin_axis;
    const int ax = (pa + 1) % 3, bx = (pa + 2) % 3;
    double lambda = (e[ax] * d[ax] + e[bx] * d[bx]) / (e[ax] * e[ax] + e[bx] * e[bx]);
    if (std::abs(lambda - 1) <= 1e-12) lambda = 1;
    Vec3 extent = e;
    extent[pa] = d[pa];
    if (lambda != 1) {
      extent[ax] = lambda * e[ax];
      extent[bx] = lambda * e[bx];
    }
    if (lambda <= 0 || extent[pa] * e[pa] <= 0)
      throw DeformError("edit would collapse or flip joint cell " + std::to_string(jc));
    // Rebuild the box from the fixed corner; untouched axes keep their exact coordinates.
    for (int i = 0; i < 8; ++i) {
      if (i == 7 - corner) continue;
      Vec3 p = now[i];
      for (int k = 0; k < 3; ++k) {
        const bool far = ((i >> k) & 1) == ((corner >> k) & 1);
        if (far && extent[k] != e[k]) p[k] = o[k] + extent[k];
      }
      const VertexId v = cell.corners[i];
      if (p != now[i]) {
        for (std::size_t c : a.cells_of(v)) {
          if (c != jc && a.cells()[c].cls == CellClass::Joint) {
            restore();
            throw DeformError("edit of joint cell " + std::to_string(jc) + " would move a vertex of joint cell " +
                              std::to_string(c));
          }
          touched.push_back(c);
        }
      }
      a.set_position(v, p);
    }
    result.position = a.current_positions()[vertex];
    result.projected = result.position != position;
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  try {
    check_not_inverted(a, touched);
  } catch (const DeformError&) {
    restore();
    throw;
  }
  return result;
}

Vec3 map_point(const CageAssembly& a, std::size_t cell, const Vec3& rest_point) {
  return trilinear(a.corners(cell), box_param(a.cells()[cell].rest_box, rest_point));
}

DeformedMeshes deform_meshes(const CageAssembly& a) {
  DeformedMeshes out;
  out.print.reserve(a.cells().size());
  out.knit.reserve(a.cells().size());
  for (std::size_t c = 0; c < a.cells().size(); ++c) {
    meshkit::TriMesh print = a.rest_print(c);
    meshkit::PolyMesh knit = a.rest_knit(c);
    if (a.dirty(c)) {
      const auto corners = a.corners(c);
      const auto& box = a.cells()[c].rest_box;
      for (auto& v : print.vertices) v = trilinear(corners, box_param(box, v));
      for (auto& v : knit.vertices) v = trilinear(corners, box_param(box, v));
    }
    out.print.push_back(std::move(print));
    out.knit.push_back(std::move(knit));
  }
  return out;
}

std::vector<Violation> check_constraints(const CageAssembly& a) {
  std::vector<Violation> out;
  for (std::size_t c = 0; c < a.cells().size(); ++c) {
    const CageCell& cell = a.cells()[c];
    const auto k = a.corners(c);
    const double det = min_corner_jacobian(k);
    if (det <= kInvertRatio * cell.rest_box.volume()) out.push_back({c, cell.node, cell.cls, "inverted", det});
    if (cell.cls != CellClass::Joint) continue;
    // A box in its own axes: on each axis the four low corners agree, as do the four high ones.
    double shear = 0;
    Vec3 extent;
    for (int ax = 0; ax < 3; ++ax) {
      double lo_min = INFINITY, lo_max = -INFINITY, hi_min = INFINITY, hi_max = -INFINITY;
      for (int i = 0; i < 8; ++i) {
        const double x = k[i][ax];
        if ((i >> ax) & 1) {
          hi_min = std::min(hi_min, x);
          hi_max = std::max(hi_max, x);
        } else {
          lo_min = std::min(lo_min, x);
          lo_max = std::max(lo_max, x);
        }
      }
      shear = std::max({shear, lo_max - lo_min, hi_max - hi_min});
      extent[ax] = hi_min - lo_max;
    }
    if (shear > kShapeTol) {
      // Extents of a sheared cell are not meaningful, so scale is not judged.
      out.push_back({c, cell.node, cell.cls, "shear", shear});
      continue;
    }
    const Vec3 rest = cell.rest_box.extent();
    const int ax = (cell.pin_axis + 1) % 3, bx = (cell.pin_axis + 2) % 3;
    const double ratio = (extent[ax] / rest[ax]) / (extent[bx] / rest[bx]);
    if (std::abs(ratio - 1) > kShapeTol) out.push_back({c, cell.node, cell.cls, "scale", std::abs(ratio - 1)});
  }
  return out;
}

}  // namespace forge::deform
