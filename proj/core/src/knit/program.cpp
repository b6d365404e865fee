#include "forge/knit/program.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace forge::knit {

namespace {

constexpr std::pair<Op, std::string_view> kOps[] = {
    {Op::CastOn, "CAST_ON"}, {Op::Knit, "KNIT"},         {Op::Inc, "INC"},  {Op::Dec, "DEC"},
    {Op::SensorH, "SENSOR_H"}, {Op::SensorV, "SENSOR_V"}, {Op::Turn, "TURN"}, {Op::BindOff, "BIND_OFF"},
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string_view to_string(Op op) {
  for (const auto& [o, name] : kOps)
    if (o == op) return name;
  return "?";
}

Op op_from_string(std::string_view text) {
  for (const auto& [o, name] : kOps)
    if (name == text) return o;
  throw KnitError("unknown knit instruction '" + std::string(text) + "'");
}

std::string_view to_string(FiberLayer layer) { return layer == FiberLayer::Horizontal ? "horizontal" : "vertical"; }

std::pair<KnitProgram, KnitProgram> trace_knit_path(const StitchMesh& mesh) {
  validate_stitch_mesh(mesh);
  KnitProgram h{FiberLayer::Horizontal, mesh.patch, mesh.gauge, {}};
  KnitProgram v{FiberLayer::Vertical, mesh.patch, mesh.gauge, {}};
  auto both = [&](Op hop, Op vop, int c, int w) {
    h.instructions.push_back({hop, c, w});
    v.instructions.push_back({vop, c, w});
  };
  const int courses = static_cast<int>(mesh.courses.size());
  both(Op::CastOn, Op::CastOn, 0, static_cast<int>(mesh.courses[0].size()));
  std::vector<bool> visited(mesh.faces.size(), false);
  for (int c = 0; c < courses; ++c) {
    if (c > 0) both(Op::Turn, Op::Turn, c, 0);
    const auto& row = mesh.courses[static_cast<std::size_t>(c)];
    const int n = static_cast<int>(row.size());
    for (int i = 0; i < n; ++i) {
      const int w = c % 2 == 0 ? i : n - 1 - i;
      const auto id = row[static_cast<std::size_t>(w)];
      if (visited[id]) throw KnitError("knit path visits face " + std::to_string(id) + " twice");
      visited[id] = true;
      switch (mesh.faces[id].kind) {
        case StitchKind::Knit: both(Op::Knit, Op::Knit, c, w); break;
        case StitchKind::Increase: both(Op::Inc, Op::Inc, c, w); break;
        case StitchKind::Decrease: both(Op::Dec, Op::Dec, c, w); break;
        case StitchKind::Sensor: both(Op::SensorH, Op::SensorV, c, w); break;
      }
    }
  }
  both(Op::BindOff, Op::BindOff, courses - 1, static_cast<int>(mesh.courses.back().size()));
  return {std::move(h), std::move(v)};
}

SensorMatrix build_sensor_matrix(const StitchMesh& mesh) {
  SensorMatrix m;
  std::set<int> h, v;
  std::vector<std::pair<std::pair<int, int>, std::uint32_t>> marked;
  for (const auto& f : mesh.faces) {
    if (f.kind != StitchKind::Sensor) continue;
    h.insert(f.course);
    v.insert(f.wale);
    marked.push_back({{f.course, f.wale}, f.id});
  }
  if (marked.empty()) throw KnitError("patch '" + mesh.patch + "' has no sensors");
  std::sort(marked.begin(), marked.end());
  m.h_lines.assign(h.begin(), h.end());
  m.v_lines.assign(v.begin(), v.end());
  for (const auto& [cw, id] : marked) {
    m.taxels.push_back(cw);
    m.faces.push_back(id);
  }
  return m;
}

std::string format_knit_program(const KnitProgram& p) {
  if (p.instructions.empty() || p.instructions.front().op != Op::CastOn || p.instructions.back().op != Op::BindOff)
    throw KnitError("knit program must start with CAST_ON and end with BIND_OFF");
  std::string out = "forge-knit 1\n";
  out += "gauge " + num(p.gauge.course) + " " + num(p.gauge.wale) + "\n";
  out += "layer " + std::string(to_string(p.layer)) + "\n";
  out += "patch " + p.patch + "\n";
  for (const auto& i : p.instructions)
    out += std::string(to_string(i.op)) + " " + std::to_string(i.course) + " " + std::to_string(i.wale) + "\n";
  return out;
}

KnitProgram parse_knit_program(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, key;
  KnitProgram p;
  auto header = [&](std::string_view want) {
    if (!std::getline(in, line)) throw KnitError("knit file ends inside the header");
    std::istringstream ls(line);
    ls >> key;
    if (key != want) throw KnitError("knit header expected '" + std::string(want) + "', got '" + key + "'");
    return ls;
  };
  {
    auto ls = header("forge-knit");
    int version = 0;
    if (!(ls >> version) || version != 1) throw KnitError("unsupported knit file version");
  }
  {
    auto ls = header("gauge");
    ls >> p.gauge.course >> p.gauge.wale;
  }
  {
    auto ls = header("layer");
    std::string layer;
    ls >> layer;
    if (layer != "horizontal" && layer != "vertical") throw KnitError("unknown layer '" + layer + "'");
    p.layer = layer == "horizontal" ? FiberLayer::Horizontal : FiberLayer::Vertical;
  }
  {
    auto ls = header("patch");
    ls >> p.patch;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string op;
    Instruction i;
    if (!(ls >> op >> i.course >> i.wale)) throw KnitError("bad knit instruction '" + line + "'");
    i.op = op_from_string(op);
    p.instructions.push_back(i);
  }
  return p;
}

void emit_knit_file(const KnitProgram& program, const std::filesystem::path& path) {
  const std::string text = format_knit_program(program);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw KnitError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw KnitError("write failed for " + path.string());
}

}  // namespace forge::knit
