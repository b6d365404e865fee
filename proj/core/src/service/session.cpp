#include "forge/service/session.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "forge/data.hpp"
#include "forge/grammar/canonical.hpp"

namespace forge::service {

using json = nlohmann::json;
using Kind = SessionError::Kind;

std::shared_ptr<const Workspace> Workspace::load(const std::string& ref) {
  const auto path = ref == "default" ? data_dir() / "rulesets" / "default.ruleset" : std::filesystem::path(ref);
  auto rules = grammar::RuleSet::load(path);
  auto library = meshkit::load_component_library(data_dir() / "library", rules);
  return std::make_shared<const Workspace>(Workspace{ref, std::move(rules), std::move(library)});
}

DesignSession DesignSession::create(std::string id, std::shared_ptr<const Workspace> workspace) {
  if (!workspace) throw SessionError(Kind::Invalid, "session needs a workspace");
  DesignSession s;
  s.id_ = std::move(id);
  s.workspace_ = std::move(workspace);
  s.design_ = grammar::new_design(s.workspace_->rules);
  s.cage_ = deform::bind_cages(s.design_, s.workspace_->library);
  return s;
}

std::string DesignSession::apply_step(const grammar::ScriptStep& step) {
  grammar::Script one;
  one.steps = {step};
  return apply_script(one).front();
}

std::vector<std::string> DesignSession::apply_script(const grammar::Script& script) {
  if (!cage_.deltas().empty())
    throw SessionError(Kind::Rejected, "the cage has edits; reset it before changing the design");
  grammar::ReplayResult r;
  try {
    r = grammar::replay_script(workspace_->rules, design_, script);
  } catch (const grammar::ScriptError& e) {
    throw SessionError(Kind::Rejected, e.what());
  }
  auto cage = deform::bind_cages(r.design, workspace_->library);
  auto patches = patches_;
  rebuild_patches(patches, cage);
  design_ = std::move(r.design);
  cage_ = std::move(cage);
  patches_ = std::move(patches);
  script_.steps.insert(script_.steps.end(), r.resolved.begin(), r.resolved.end());
  ++revision_;
  return r.log;
}

deform::EditResult DesignSession::edit_cage(deform::VertexId vertex, const geometry::Vec3& position) {
  if (vertex >= cage_.vertex_count())
    throw SessionError(Kind::Rejected, "cage has no vertex " + std::to_string(vertex));
  auto cage = cage_;
  auto patches = patches_;
  deform::EditResult r;
  try {
    r = deform::propose_vertex_edit(cage, vertex, position);
    rebuild_patches(patches, cage);
  } catch (const deform::DeformError& e) {
    throw SessionError(Kind::Rejected, e.what());
  }
  cage_ = std::move(cage);
  patches_ = std::move(patches);
  ++revision_;
  return r;
}

void DesignSession::reset_cage() {
  auto cage = cage_;
  cage.reset();
  auto patches = patches_;
  rebuild_patches(patches, cage);
  cage_ = std::move(cage);
  patches_ = std::move(patches);
  ++revision_;
}

void DesignSession::rebuild_patches(std::map<std::string, SensorPatch>& patches, const deform::CageAssembly& cage) const {
  if (patches.empty()) return;
  const auto knit_meshes = deform::deform_meshes(cage).knit;
  for (auto& [name, p] : patches) {
    try {
      p.mesh = knit::generate_stitch_mesh(design_, knit_meshes, p.region, p.gauge, name);
      for (const auto& [c, w] : p.sensors) {
        const auto face = p.mesh.find(c, w);
        if (!face)
          throw knit::KnitError("sensor at course " + std::to_string(c) + " wale " + std::to_string(w) +
                                " no longer exists");
        p.mesh = knit::place_sensor(p.mesh, *face);
      }
    } catch (const knit::KnitError& e) {
      throw SessionError(Kind::Rejected, "patch " + name + ": " + e.what());
    }
  }
}

void DesignSession::define_patch(const std::string& name, const knit::KnitRegion& region, const knit::Gauge& gauge) {
  if (name.empty() || name.find_first_of(" :/\\") != std::string::npos)
    throw SessionError(Kind::Invalid, "patch name '" + name + "' must be non-empty without spaces, ':' or slashes");
  auto patches = patches_;
  patches[name] = SensorPatch{name, region, gauge, {}, {}};
  rebuild_patches(patches, cage_);
  patches_ = std::move(patches);
  ++revision_;
}

void DesignSession::remove_patch(const std::string& name) {
  if (!patches_.erase(name)) throw SessionError(Kind::Rejected, "no patch '" + name + "'");
  ++revision_;
}

void DesignSession::place_sensor(const std::string& patch, int course, int wale) {
  auto it = patches_.find(patch);
  if (it == patches_.end()) throw SessionError(Kind::Rejected, "no patch '" + patch + "'");
  SensorPatch p = it->second;
  const auto face = p.mesh.find(course, wale);
  if (!face)
    throw SessionError(Kind::Rejected, "patch " + patch + " has no stitch at course " + std::to_string(course) +
                                           " wale " + std::to_string(wale));
  if (p.mesh.face(*face).kind == knit::StitchKind::Sensor)
    throw SessionError(Kind::Rejected, "stitch is already a sensor");
  try {
    p.mesh = knit::place_sensor(p.mesh, *face);
  } catch (const knit::KnitError& e) {
    throw SessionError(Kind::Rejected, e.what());
  }
  p.sensors.emplace_back(course, wale);
  std::sort(p.sensors.begin(), p.sensors.end());
  it->second = std::move(p);
  ++revision_;
}

void DesignSession::remove_sensor(const std::string& patch, int course, int wale) {
  auto it = patches_.find(patch);
  if (it == patches_.end()) throw SessionError(Kind::Rejected, "no patch '" + patch + "'");
  auto& sensors = it->second.sensors;
  const auto pos = std::find(sensors.begin(), sensors.end(), std::pair{course, wale});
  if (pos == sensors.end()) throw SessionError(Kind::Rejected, "no sensor at that stitch");
  sensors.erase(pos);
  it->second.mesh = knit::unplace_sensor(it->second.mesh, *it->second.mesh.find(course, wale));
  ++revision_;
}

tactile::FsmSpec load_bound_fsm(const FsmBinding& binding) {
  const auto names = tactile::bundled_fsm_names();
  if (std::find(names.begin(), names.end(), binding.name) == names.end())
    throw SessionError(Kind::Rejected, "unknown FSM '" + binding.name + "'");
  try {
    auto spec = tactile::FsmSpec::load(data_dir() / "fsm" / (binding.name + ".fsm"));
    for (const auto& [k, v] : binding.thresholds) spec.set_threshold(k, v);
    return spec;
  } catch (const tactile::FsmError& e) {
    throw SessionError(Kind::Rejected, e.what());
  }
}

void DesignSession::bind_fsm(const FsmBinding& binding) {
  load_bound_fsm(binding);
  fsm_ = binding;
  ++revision_;
}

deform::DeformedMeshes DesignSession::preview() const { return deform::deform_meshes(cage_); }

std::size_t DesignSession::taxel_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : patches_) n += p.sensors.size();
  return n;
}

namespace {

std::string hexfloat(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

json region_json(const SensorPatch& p) {
  json sides = json::array();
  for (auto s : p.region.sides) sides.push_back(std::string(knit::to_string(s)));
  json sensors = json::array();
  for (const auto& [c, w] : p.sensors) sensors.push_back({c, w});
  return {{"name", p.name},
          {"chain", p.region.chain},
          {"sides", sides},
          {"gauge", {p.gauge.course, p.gauge.wale}},
          {"sensors", sensors}};
}

}  // namespace

std::uint64_t DesignSession::state_hash() const {
  std::string s = "rev " + std::to_string(revision_) + "\n" + grammar::canonical_form(design_) + "\n";
  s += std::to_string(grammar::structural_hash(design_)) + "\n";
  for (const auto& p : cage_.current_positions()) s += hexfloat(p.x()) + " " + hexfloat(p.y()) + " " + hexfloat(p.z()) + "\n";
  for (const auto& [name, p] : patches_) {
    s += region_json(p).dump() + "\n";
    for (const auto& f : p.mesh.faces) s += std::string(knit::to_string(f.kind)).substr(0, 1);
    s += "\n";
  }
  if (fsm_) s += json{{"fsm", fsm_->name}, {"thresholds", fsm_->thresholds}}.dump();
  return grammar::fnv1a64(s);
}

std::string DesignSession::to_json() const {
  json cage = json::array();
  for (const auto& [v, p] : cage_.deltas()) cage.push_back({v, p.x(), p.y(), p.z()});
  json patches = json::array();
  for (const auto& [_, p] : patches_) patches.push_back(region_json(p));
  json j = {{"format", "forge-session"},
            {"version", kSessionFormatVersion},
            {"id", id_},
            {"revision", revision_},
            {"ruleset", workspace_->ruleset_ref},
            {"script", script_.to_text()},
            {"graph", {{"nodes", design_.size()}, {"hash", grammar::structural_hash(design_)}}},
            {"cage", cage},
            {"patches", patches},
            {"fsm", nullptr}};
  if (fsm_) j["fsm"] = {{"name", fsm_->name}, {"thresholds", fsm_->thresholds}};
  return j.dump(2) + "\n";
}

DesignSession DesignSession::from_json(std::string_view text, std::shared_ptr<const Workspace> workspace) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SessionError(Kind::Corrupt, std::string("session file is not JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != "forge-session")
      throw SessionError(Kind::Corrupt, "not a forge session file");
    const int version = j.at("version").get<int>();
    if (version != kSessionFormatVersion)
      throw SessionError(Kind::Version, "session format version " + std::to_string(version) + " is not supported (this build reads " +
                                            std::to_string(kSessionFormatVersion) + ")");
    const std::string ref = j.at("ruleset").get<std::string>();
    if (!workspace) workspace = Workspace::load(ref);
    if (workspace->ruleset_ref != ref)
      throw SessionError(Kind::Invalid, "session uses ruleset '" + ref + "', workspace has '" + workspace->ruleset_ref + "'");
    DesignSession s = create(j.at("id").get<std::string>(), workspace);
    s.apply_script(grammar::Script::parse(j.at("script").get<std::string>()));
    if (j.contains("graph") && (j["graph"].at("nodes").get<std::size_t>() != s.design_.size() ||
                                j["graph"].at("hash").get<std::uint64_t>() != grammar::structural_hash(s.design_)))
      throw SessionError(Kind::Corrupt, "session script does not rebuild the recorded design graph");
    for (const auto& d : j.at("cage")) {
      const auto v = d.at(0).get<deform::VertexId>();
      if (v >= s.cage_.vertex_count()) throw SessionError(Kind::Corrupt, "cage delta names vertex " + std::to_string(v));
      s.cage_.set_position(v, {d.at(1).get<double>(), d.at(2).get<double>(), d.at(3).get<double>()});
    }
    for (const auto& p : j.at("patches")) {
      SensorPatch patch;
      patch.name = p.at("name").get<std::string>();
      patch.region.chain = p.at("chain").get<std::vector<grammar::NodeId>>();
      for (const auto& side : p.at("sides")) patch.region.sides.push_back(knit::side_from_string(side.get<std::string>()));
      patch.gauge = {p.at("gauge").at(0).get<double>(), p.at("gauge").at(1).get<double>()};
      for (const auto& c : p.at("sensors")) patch.sensors.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
      s.patches_[patch.name] = std::move(patch);
    }
    s.rebuild_patches(s.patches_, s.cage_);
    if (!j.at("fsm").is_null())
      s.fsm_ = FsmBinding{j["fsm"].at("name").get<std::string>(),
                          j["fsm"].at("thresholds").get<std::map<std::string, double>>()};
    if (s.fsm_) load_bound_fsm(*s.fsm_);
    s.revision_ = j.at("revision").get<std::uint64_t>();
    return s;
  } catch (const SessionError& e) {
    if (e.kind() != Kind::Rejected) throw;
    throw SessionError(Kind::Corrupt, std::string("session file does not replay: ") + e.what());
  } catch (const json::exception& e) {
    throw SessionError(Kind::Corrupt, std::string("session file is malformed: ") + e.what());
  } catch (const grammar::ParseError& e) {
    throw SessionError(Kind::Corrupt, std::string("session script: ") + e.what());
  } catch (const knit::KnitError& e) {
    throw SessionError(Kind::Corrupt, e.what());
  }
}

void DesignSession::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw SessionError(Kind::Invalid, "cannot write " + tmp);
    out << to_json();
    if (!out) throw SessionError(Kind::Invalid, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

DesignSession DesignSession::open(const std::filesystem::path& path, std::shared_ptr<const Workspace> workspace) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SessionError(Kind::NotFound, "cannot open session " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), std::move(workspace));
}

std::vector<std::vector<grammar::NodeId>> finger_chains(const grammar::RuleSet& rules, const grammar::DesignGraph& design) {
  std::vector<std::vector<grammar::NodeId>> out;
  for (const auto& n : design.nodes()) {
    if (!rules.symbol(n.symbol).has_tag("knuckle")) continue;
    const auto* e = design.child_on_port(n.id, "up");
    if (!e) continue;
    std::vector<grammar::NodeId> chain{e->to};
    while (true) {
      const grammar::Edge* next = nullptr;
      for (const char* port : {"distal", "b0"}) {
        const auto* c = design.child_on_port(chain.back(), port);
        if (c && c->port_to == "proximal") {
          next = c;
          break;
        }
      }
      if (!next) break;
      chain.push_back(next->to);
    }
    out.push_back(std::move(chain));
  }
  return out;
}

std::string session_json(const DesignSession& s) {
  const auto& rules = s.workspace().rules;
  const auto& d = s.design();
  json nodes = json::array();
  for (const auto& n : d.nodes()) {
    json node = {{"id", n.id}, {"symbol", n.symbol}, {"terminal", rules.symbol(n.symbol).terminal()}};
    if (n.k) node["k"] = *n.k;
    if (n.cell) node["cell"] = {n.cell->x, n.cell->y};
    nodes.push_back(node);
  }
  json edges = json::array();
  for (const auto& e : d.edges())
    edges.push_back({{"from", e.from}, {"to", e.to}, {"port_from", e.port_from}, {"port_to", e.port_to}, {"roll", e.roll}});
  json script = json::array();
  for (const auto& st : s.script().steps) {
    grammar::Script one;
    one.steps = {st};
    auto line = one.to_text();
    line.pop_back();
    script.push_back(line);
  }
  json deltas = json::array();
  for (const auto& [v, p] : s.cage().deltas()) deltas.push_back({v, p.x(), p.y(), p.z()});
  json patches = json::array();
  for (const auto& [_, p] : s.patches()) {
    json j = region_json(p);
    j["courses"] = p.mesh.courses.size();
    j["faces"] = p.mesh.faces.size();
    j["taxels"] = p.sensors.size();
    patches.push_back(j);
  }
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.state_hash()));
  json j = {{"id", s.id()},
            {"revision", s.revision()},
            {"ruleset", s.workspace().ruleset_ref},
            {"phase", std::string(grammar::to_string(d.phase()))},
            {"complete", grammar::is_complete(rules, d)},
            {"fingers", grammar::finger_count(rules, d)},
            {"nodes", nodes},
            {"edges", edges},
            {"script", script},
            {"cage", {{"vertices", s.cage().vertex_count()}, {"cells", s.cage().cells().size()}, {"deltas", deltas}}},
            {"patches", patches},
            {"taxels", s.taxel_count()},
            {"fsm", nullptr},
            {"state_hash", hash}};
  if (s.fsm()) j["fsm"] = {{"name", s.fsm()->name}, {"thresholds", s.fsm()->thresholds}};
  return j.dump();
}

std::string task_log_json(const tactile::TaskLog& log) {
  json steps = json::array();
  for (std::size_t i = 0; i < log.states.size(); ++i) {
    const auto& c = log.commands[i];
    steps.push_back({{"step", log.frame_steps[i]},
                     {"state", log.states[i]},
                     {"command", {{"kind", std::string(tactile::to_string(c.kind))}, {"magnitude", c.magnitude}, {"target", c.target}}},
                     {"wrist", log.wrist[i]}});
  }
  return json{{"outcome", std::string(tactile::to_string(log.outcome))}, {"final_state", log.final_state}, {"steps", steps}}.dump();
}

}  // namespace forge::service
