#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "forge/grammar/canonical.hpp"
#include "forge/meshkit/assembly.hpp"
#include "forge/meshkit/stl.hpp"
#include "forge/service/session.hpp"

namespace forge::service {

namespace {

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fixed(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

void add(ExportBundle& b, std::string name, std::string kind, std::string bytes) {
  b.manifest.files.push_back({std::move(name), std::move(kind), bytes.size(), grammar::fnv1a64(bytes)});
  b.contents.push_back(std::move(bytes));
}

}  // namespace

std::string ExportManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& f : files) list.push_back({{"name", f.name}, {"kind", f.kind}, {"bytes", f.bytes}, {"fnv1a", hex64(f.hash)}});
  return nlohmann::json{{"format", "forge-manifest"}, {"version", 1}, {"files", list}}.dump(2) + "\n";
}

std::size_t ExportManifest::count(std::string_view kind) const {
  std::size_t n = 0;
  for (const auto& f : files) n += f.kind == kind;
  return n;
}

ExportBundle render_export(const DesignSession& s) {
  const auto& ws = s.workspace();
  if (!grammar::is_complete(ws.rules, s.design()))
    throw SessionError(SessionError::Kind::Rejected, "design still has nonterminal nodes; nothing to manufacture");
  ExportBundle b;
  const auto meshes = s.preview();
  std::vector<meshkit::PrintablePart> parts;
  try {
    parts = meshkit::merge_printable_parts(s.design(), ws.library, meshes.print);
  } catch (const meshkit::MeshError& e) {
    throw SessionError(SessionError::Kind::Rejected, e.what());
  }
  std::string report = "forge report 1\n";
  report += "session " + s.id() + " revision " + std::to_string(s.revision()) + "\n";
  report += "nodes " + std::to_string(s.design().size()) + " fingers " +
            std::to_string(grammar::finger_count(ws.rules, s.design())) + "\n";
  report += "canonical " + hex64(grammar::canonical_hash(s.design())) + "\n";
  report += "cage_edits " + std::to_string(s.cage().deltas().size()) + "\n";
  report += "parts " + std::to_string(parts.size()) + "\n";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "part_%02zu.stl", i);
    add(b, name, "stl", meshkit::stl_bytes(parts[i].mesh));
    report += std::string(name) + " triangles " + std::to_string(parts[i].mesh.size()) + " volume " +
              fixed(meshkit::signed_volume(parts[i].mesh)) + " nodes";
    for (auto n : parts[i].source_nodes) report += " " + std::to_string(n);
    report += "\n";
  }
  for (const auto& [name, p] : s.patches()) {
    const auto [h, v] = knit::trace_knit_path(p.mesh);
    add(b, name + "_h.knit", "knit_h", knit::format_knit_program(h));
    add(b, name + "_v.knit", "knit_v", knit::format_knit_program(v));
    const auto m = knit::build_sensor_matrix(p.mesh);
    report += "patch " + name + " courses " + std::to_string(p.mesh.courses.size()) + " stitches " +
              std::to_string(p.mesh.faces.size()) + " taxels " + std::to_string(m.taxels.size()) + " lines " +
              std::to_string(m.h_lines.size()) + "x" + std::to_string(m.v_lines.size()) + "\n";
  }
  report += "taxels " + std::to_string(s.taxel_count()) + "\n";
  if (s.fsm()) {
    add(b, s.fsm()->name + ".fsm", "fsm", load_bound_fsm(*s.fsm()).to_text());
    report += "fsm " + s.fsm()->name + "\n";
  }
  add(b, "report.txt", "report", report);
  return b;
}

ExportManifest write_export(const ExportBundle& bundle, const std::filesystem::path& dir,
                            const std::vector<std::string>& kinds) {
  std::filesystem::create_directories(dir);
  ExportManifest written;
  for (std::size_t i = 0; i < bundle.manifest.files.size(); ++i) {
    const auto& f = bundle.manifest.files[i];
    if (!kinds.empty() && std::find(kinds.begin(), kinds.end(), f.kind) == kinds.end()) continue;
    std::ofstream out(dir / f.name, std::ios::binary);
    out.write(bundle.contents[i].data(), static_cast<std::streamsize>(bundle.contents[i].size()));
    if (!out) throw SessionError(SessionError::Kind::Invalid, "cannot write " + (dir / f.name).string());
    written.files.push_back(f);
  }
  std::ofstream(dir / "manifest.json", std::ios::binary) << written.to_json();
  return written;
}

}  // namespace forge::service
