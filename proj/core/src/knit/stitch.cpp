#include "forge/knit/stitch.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace forge::knit {

std::string_view to_string(StitchKind k) {
  switch (k) {
    case StitchKind::Knit: return "knit";
    case StitchKind::Increase: return "increase";
    case StitchKind::Decrease: return "decrease";
    case StitchKind::Sensor: return "sensor";
  }
  return "?";
}

std::string_view to_string(Side s) {
  switch (s) {
    case Side::Front: return "front";
    case Side::Right: return "right";
    case Side::Back: return "back";
    case Side::Left: return "left";
  }
  return "?";
}

Side side_from_string(std::string_view text) {
  for (Side s : {Side::Front, Side::Right, Side::Back, Side::Left})
    if (to_string(s) == text) return s;
  throw KnitError("unknown side '" + std::string(text) + "'");
}

const StitchFace& StitchMesh::face(std::uint32_t id) const {
  if (id >= faces.size()) throw KnitError("no stitch face " + std::to_string(id));
  return faces[id];
}

std::optional<std::uint32_t> StitchMesh::find(int course, int wale) const {
  if (course < 0 || course >= static_cast<int>(courses.size())) return std::nullopt;
  const auto& row = courses[static_cast<std::size_t>(course)];
  if (wale < 0 || wale >= static_cast<int>(row.size())) return std::nullopt;
  return row[static_cast<std::size_t>(wale)];
}

std::size_t StitchMesh::count(StitchKind kind) const {
  return static_cast<std::size_t>(std::count_if(faces.begin(), faces.end(), [&](const StitchFace& f) { return f.kind == kind; }));
}

namespace {

struct CourseSlice {
  grammar::NodeId node = 0;
  std::vector<double> side_lengths;
  double perimeter() const {
    double p = 0;
    for (double x : side_lengths) p += x;
    return p;
  }
};

std::vector<Side> band_order(std::vector<Side> sides) {
  if (sides.empty()) throw KnitError("region selects no sides");
  std::vector<bool> on(4, false);
  for (Side s : sides) {
    if (on[static_cast<int>(s)]) throw KnitError("region lists side '" + std::string(to_string(s)) + "' twice");
    on[static_cast<int>(s)] = true;
  }
  if (sides.size() == 4) return {Side::Front, Side::Right, Side::Back, Side::Left};
  // Start right after a gap and walk forward; a contiguous run covers every selected side.
  int start = 0;
  while (!(on[start] && !on[(start + 3) % 4])) ++start;
  std::vector<Side> out;
  for (int i = 0; i < 4 && on[(start + i) % 4]; ++i) out.push_back(static_cast<Side>((start + i) % 4));
  if (out.size() != sides.size()) throw KnitError("region sides are not contiguous, so the band is not connected");
  return out;
}

std::vector<CourseSlice> slice_region(const grammar::DesignGraph& design, const std::vector<meshkit::PolyMesh>& knit,
                                      const KnitRegion& region, const Gauge& gauge, std::vector<Side>& order) {
  if (gauge.course <= 0 || gauge.wale <= 0) throw KnitError("gauge must be positive");
  if (region.chain.empty()) throw KnitError("region has no nodes");
  order = band_order(region.sides);
  std::vector<CourseSlice> out;
  for (std::size_t i = 0; i < region.chain.size(); ++i) {
    const auto id = region.chain[i];
    if (!design.contains(id) || id >= knit.size()) throw KnitError("region names unknown node " + std::to_string(id));
    if (i > 0) {
      const auto* e = design.parent_edge(id);
      if (!e || e->from != region.chain[i - 1] || e->port_to != "proximal")
        throw KnitError("region chain is not connected at node " + std::to_string(id));
    }
    const auto& v = knit[id].vertices;
    if (v.size() != 8) throw KnitError("knit mesh of node " + std::to_string(id) + " is not a cuboid");
    const Eigen::Vector3d bottom = (v[0] + v[1] + v[2] + v[3]) / 4, top = (v[4] + v[5] + v[6] + v[7]) / 4;
    const int n = static_cast<int>(std::lround((top - bottom).norm() * gauge.course));
    for (int j = 0; j < n; ++j) {
      const double tau = (j + 0.5) / n;
      std::array<Eigen::Vector3d, 4> q;
      for (int k = 0; k < 4; ++k) q[k] = (1 - tau) * v[k] + tau * v[k + 4];
      CourseSlice s;
      s.node = id;
      for (Side side : order) {
        switch (side) {
          case Side::Front: s.side_lengths.push_back((q[3] - q[2]).norm()); break;
          case Side::Right: s.side_lengths.push_back((q[1] - q[3]).norm()); break;
          case Side::Back: s.side_lengths.push_back((q[0] - q[1]).norm()); break;
          case Side::Left: s.side_lengths.push_back((q[2] - q[0]).norm()); break;
        }
      }
      out.push_back(std::move(s));
    }
  }
  if (out.empty()) throw KnitError("region is shorter than one course at this gauge");
  return out;
}

}  // namespace

StitchMesh stitch_band(const std::vector<double>& perimeters, const Gauge& gauge, std::string patch) {
  if (gauge.course <= 0 || gauge.wale <= 0) throw KnitError("gauge must be positive");
  if (perimeters.empty()) throw KnitError("band has no courses");
  StitchMesh m;
  m.patch = std::move(patch);
  m.gauge = gauge;
  const double h = 1.0 / gauge.course;
  int prev = 0;
  for (std::size_t c = 0; c < perimeters.size(); ++c) {
    const int w = static_cast<int>(std::lround(perimeters[c] * gauge.wale));
    if (w < 2)
      throw KnitError("course " + std::to_string(c) + " rounds to " + std::to_string(w) + " stitches; at least 2 needed");
    std::vector<bool> shaped(static_cast<std::size_t>(w), false);
    StitchKind shaping = StitchKind::Knit;
    if (c > 0 && w != prev) {
      const int n = std::abs(w - prev);
      if (n > std::min(w, prev))
        throw KnitError("courses " + std::to_string(c - 1) + " and " + std::to_string(c) + " differ by " +
                        std::to_string(n) + " stitches, more than one shaping stitch per column");
      shaping = w < prev ? StitchKind::Decrease : StitchKind::Increase;
      for (int k = 0; k < n; ++k) shaped[static_cast<std::size_t>(((2 * k + 1) * w) / (2 * n))] = true;
    }
    const double width = perimeters[c] / w;
    const double y0 = static_cast<double>(c) * h, y1 = y0 + h;
    std::vector<std::uint32_t> row;
    for (int i = 0; i < w; ++i) {
      StitchFace f;
      f.id = static_cast<std::uint32_t>(m.faces.size());
      f.course = static_cast<int>(c);
      f.wale = i;
      f.kind = shaped[static_cast<std::size_t>(i)] ? shaping : StitchKind::Knit;
      const double x0 = -0.5 * perimeters[c] + i * width, x1 = x0 + width, xm = 0.5 * (x0 + x1);
      f.geometry = {{x0, y0}};
      if (f.kind == StitchKind::Decrease) f.geometry.push_back({xm, y0});
      f.geometry.push_back({x1, y0});
      f.geometry.push_back({x1, y1});
      if (f.kind == StitchKind::Increase) f.geometry.push_back({xm, y1});
      f.geometry.push_back({x0, y1});
      row.push_back(f.id);
      m.faces.push_back(std::move(f));
    }
    m.courses.push_back(std::move(row));
    prev = w;
  }
  return m;
}

std::vector<double> region_perimeters(const grammar::DesignGraph& design, const std::vector<meshkit::PolyMesh>& knit_meshes,
                                      const KnitRegion& region, const Gauge& gauge,
                                      std::vector<std::pair<grammar::NodeId, double>>* course_source) {
  std::vector<Side> order;
  std::vector<double> out;
  for (const auto& s : slice_region(design, knit_meshes, region, gauge, order)) {
    out.push_back(s.perimeter());
    if (course_source) course_source->emplace_back(s.node, s.perimeter());
  }
  return out;
}

StitchMesh generate_stitch_mesh(const grammar::DesignGraph& design, const std::vector<meshkit::PolyMesh>& knit_meshes,
                                const KnitRegion& region, const Gauge& gauge, std::string patch) {
  std::vector<Side> order;
  const auto slices = slice_region(design, knit_meshes, region, gauge, order);
  std::vector<double> perimeters;
  for (const auto& s : slices) perimeters.push_back(s.perimeter());
  StitchMesh m = stitch_band(perimeters, gauge, std::move(patch));
  for (std::size_t c = 0; c < m.courses.size(); ++c) {
    const auto& slice = slices[c];
    const double width = slice.perimeter() / static_cast<double>(m.courses[c].size());
    for (auto id : m.courses[c]) {
      StitchFace& f = m.faces[id];
      f.node = slice.node;
      double arc = (f.wale + 0.5) * width;
      std::size_t k = 0;
      while (k + 1 < order.size() && arc > slice.side_lengths[k]) arc -= slice.side_lengths[k++];
      f.side = std::string(to_string(order[k]));
    }
  }
  return m;
}

StitchMesh place_sensor(const StitchMesh& mesh, std::uint32_t face_id) {
  const StitchFace& f = mesh.face(face_id);
  if (f.is_pentagon())
    throw KnitError("face " + std::to_string(face_id) + " is a " + std::string(to_string(f.kind)) +
                    " pentagon; sensors go on knit quads");
  StitchMesh out = mesh;
  out.faces[face_id].kind = StitchKind::Sensor;
  return out;
}

StitchMesh unplace_sensor(const StitchMesh& mesh, std::uint32_t face_id) {
  const StitchFace& f = mesh.face(face_id);
  StitchMesh out = mesh;
  if (f.kind == StitchKind::Sensor) out.faces[face_id].kind = StitchKind::Knit;
  return out;
}

void validate_stitch_mesh(const StitchMesh& mesh) {
  if (mesh.courses.empty()) throw KnitError("stitch mesh has no courses");
  std::size_t seen = 0;
  for (std::size_t c = 0; c < mesh.courses.size(); ++c) {
    const auto& row = mesh.courses[c];
    if (row.empty()) throw KnitError("stitch mesh is disconnected: course " + std::to_string(c) + " is empty");
    for (std::size_t w = 0; w < row.size(); ++w) {
      if (row[w] >= mesh.faces.size()) throw KnitError("course " + std::to_string(c) + " names a missing face");
      const StitchFace& f = mesh.faces[row[w]];
      if (f.course != static_cast<int>(c) || f.wale != static_cast<int>(w))
        throw KnitError("stitch mesh is disconnected at face " + std::to_string(f.id));
      const std::size_t corners = f.is_pentagon() ? 5 : 4;
      if (f.geometry.size() != corners) throw KnitError("face " + std::to_string(f.id) + " has the wrong outline");
      ++seen;
    }
  }
  if (seen != mesh.faces.size()) throw KnitError("stitch mesh has faces outside every course");
  for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    if (mesh.faces[i].id != i) throw KnitError("stitch face ids are not dense");
}

}  // namespace forge::knit
