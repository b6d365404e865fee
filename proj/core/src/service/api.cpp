#include "forge/service/api.hpp"

#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "forge/tactile/synth.hpp"

namespace forge::service {

using json = nlohmann::json;
using Kind = SessionError::Kind;

SessionStore::SessionStore(std::shared_ptr<const Workspace> workspace, std::optional<std::filesystem::path> dir)
    : workspace_(std::move(workspace)), dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::size_t SessionStore::load_existing() {
  if (!dir_) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(*dir_))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::size_t n = 0;
  for (const auto& f : files) {
    add(DesignSession::open(f, workspace_));
    ++n;
  }
  return n;
}

std::string SessionStore::create() {
  std::string id;
  {
    std::unique_lock lock(map_mutex_);
    do {
      id = "s" + std::to_string(next_id_++);
    } while (sessions_.count(id));
  }
  return add(DesignSession::create(id, workspace_));
}

std::string SessionStore::add(DesignSession session) {
  const std::string id = session.id();
  if (dir_) session.save(*dir_ / (id + ".json"));
  std::unique_lock lock(map_mutex_);
  if (sessions_.count(id)) throw SessionError(Kind::Conflict, "session " + id + " already exists");
  auto e = std::make_unique<Entry>(std::move(session));
  sessions_.emplace(id, std::move(e));
  return id;
}

bool SessionStore::contains(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  return sessions_.count(id) != 0;
}

SessionStore::Entry& SessionStore::entry(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionError(Kind::NotFound, "no session '" + id + "'");
  return *it->second;
}

void SessionStore::read(const std::string& id, const std::function<void(const DesignSession&)>& fn) const {
  Entry& e = entry(id);
  std::lock_guard lock(e.mutex);
  fn(e.session);
}

void SessionStore::mutate(const std::string& id, std::uint64_t expected_revision,
                          const std::function<void(DesignSession&)>& fn) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mutex);
  if (e.session.revision() != expected_revision)
    throw SessionError(Kind::Conflict, "session " + id + " is at revision " + std::to_string(e.session.revision()) +
                                           ", request expected " + std::to_string(expected_revision));
  DesignSession next = e.session;
  fn(next);
  if (dir_) next.save(*dir_ / (id + ".json"));
  e.session = std::move(next);
}

namespace {

ApiResponse reply(int status, const json& j) { return {status, j.dump()}; }
ApiResponse reply(int status, const std::string& raw_json) { return {status, raw_json}; }

int status_of(Kind k) {
  switch (k) {
    case Kind::NotFound: return 404;
    case Kind::Conflict: return 409;
    case Kind::Rejected: return 422;
    default: return 400;
  }
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw SessionError(Kind::Invalid, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw SessionError(Kind::Invalid, std::string("request body is not JSON: ") + e.what());
  }
}

std::uint64_t expected_revision(const json& j) {
  if (!j.contains("expected_revision") || !j["expected_revision"].is_number_unsigned())
    throw SessionError(Kind::Invalid, "mutations need a non-negative integer expected_revision");
  return j["expected_revision"].get<std::uint64_t>();
}

long query_long(const std::map<std::string, std::string>& q, const std::string& key, long fallback) {
  auto it = q.find(key);
  if (it == q.end()) return fallback;
  try {
    std::size_t used = 0;
    const long v = std::stol(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw SessionError(Kind::Invalid, "query parameter " + key + " must be an integer");
}

json vec(const geometry::Vec3& p) { return {p.x(), p.y(), p.z()}; }

json mesh_json(const DesignSession& s, const std::string& kind) {
  json out = {{"revision", s.revision()}};
  if (kind == "all" || kind == "print" || kind == "knit") {
    const auto m = s.preview();
    if (kind != "knit") {
      json print = json::array();
      for (std::size_t i = 0; i < m.print.size(); ++i) {
        json v = json::array(), t = json::array();
        for (const auto& p : m.print[i].vertices) v.push_back(vec(p));
        for (const auto& tri : m.print[i].triangles) t.push_back(tri);
        print.push_back({{"node", i}, {"vertices", v}, {"triangles", t}});
      }
      out["print"] = print;
    }
    if (kind != "print") {
      json knit = json::array();
      for (std::size_t i = 0; i < m.knit.size(); ++i) {
        json v = json::array();
        for (const auto& p : m.knit[i].vertices) v.push_back(vec(p));
        knit.push_back({{"node", i}, {"vertices", v}, {"faces", m.knit[i].faces}});
      }
      out["knit"] = knit;
    }
  }
  if (kind == "all" || kind == "cage") {
    json pos = json::array();
    for (const auto& p : s.cage().current_positions()) pos.push_back(vec(p));
    json cells = json::array();
    for (const auto& c : s.cage().cells())
      cells.push_back({{"node", c.node}, {"class", std::string(deform::to_string(c.cls))}, {"corners", c.corners}});
    out["cage"] = {{"positions", pos}, {"cells", cells}};
  }
  if (!out.contains("print") && !out.contains("knit") && !out.contains("cage"))
    throw SessionError(Kind::Invalid, "mesh kind must be all, print, knit or cage");
  return out;
}

ApiResponse applicable(const DesignSession& s, const std::map<std::string, std::string>& q) {
  std::optional<grammar::NodeId> node;
  if (q.count("node")) {
    const long n = query_long(q, "node", 0);
    if (n < 0 || !s.design().contains(static_cast<grammar::NodeId>(n)))
      throw SessionError(Kind::NotFound, "design has no node " + q.at("node"));
    node = static_cast<grammar::NodeId>(n);
  }
  const auto& rules = s.workspace().rules;
  json list = json::array();
  for (const auto& a : grammar::applicable_rules(rules, s.design(), node))
    list.push_back({{"rule", a.rule_id}, {"anchor", a.anchor}, {"rotation", a.rotation}, {"text", grammar::describe(a)}});
  std::string reason;
  const bool handoff = grammar::can_handoff(rules, s.design(), &reason);
  json j = {{"revision", s.revision()}, {"rules", list}, {"handoff", handoff}};
  if (!handoff) j["handoff_reason"] = reason;
  return reply(200, j);
}

void apply_rule(DesignSession& s, const json& j, json& out) {
  grammar::ScriptStep step;
  const std::string rule = j.value("rule", "");
  if (rule.empty()) throw SessionError(Kind::Invalid, "apply-rule needs a rule");
  if (rule == "handoff") {
    step.kind = grammar::ScriptStep::Kind::Handoff;
    step.rule_id = "handoff";
  } else {
    step.rule_id = rule;
    if (j.contains("anchor")) step.anchor = j["anchor"].get<grammar::NodeId>();
    if (j.contains("rotation")) step.rotation = j["rotation"].get<int>();
  }
  out["applied"] = s.apply_step(step);
}

void cage_edit(DesignSession& s, const json& j, json& out) {
  if (j.value("reset", false)) {
    s.reset_cage();
    return;
  }
  if (!j.contains("vertex") || !j.contains("position") || j["position"].size() != 3)
    throw SessionError(Kind::Invalid, "cage-edit needs vertex and position [x, y, z]");
  const auto& p = j["position"];
  const auto r = s.edit_cage(j["vertex"].get<deform::VertexId>(), {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  out["position"] = vec(r.position);
  out["projected"] = r.projected;
}

void sensor(DesignSession& s, const json& j) {
  const std::string action = j.value("action", "place");
  const std::string patch = j.value("patch", "");
  if (patch.empty()) throw SessionError(Kind::Invalid, "sensor requests need a patch");
  if (action == "define") {
    knit::KnitRegion region;
    region.chain = j.at("chain").get<std::vector<grammar::NodeId>>();
    for (const auto& side : j.at("sides")) region.sides.push_back(knit::side_from_string(side.get<std::string>()));
    knit::Gauge gauge;
    if (j.contains("gauge")) gauge = {j["gauge"].at(0).get<double>(), j["gauge"].at(1).get<double>()};
    s.define_patch(patch, region, gauge);
  } else if (action == "drop") {
    s.remove_patch(patch);
  } else if (action == "place" || action == "remove") {
    const int course = j.at("course").get<int>(), wale = j.at("wale").get<int>();
    action == "place" ? s.place_sensor(patch, course, wale) : s.remove_sensor(patch, course, wale);
  } else {
    throw SessionError(Kind::Invalid, "sensor action must be define, drop, place or remove");
  }
}

}  // namespace

ApiResponse Api::handle(const std::string& method, const std::string& path,
                        const std::map<std::string, std::string>& query, const std::string& body) {
  static const std::regex route(R"(^/session(?:/([A-Za-z0-9_-]+)(?:/([a-z-]+))?)?/?$)");
  try {
    std::smatch m;
    if (!std::regex_match(path, m, route)) return reply(404, json{{"error", "no route " + path}});
    const std::string id = m[1], action = m[2];
    if (id.empty()) {
      if (method != "POST") return reply(405, json{{"error", "use POST /session to create a session"}});
      const json j = parse_body(body);
      const std::string new_id = store_.create();
      if (j.contains("script")) {
        grammar::Script script;
        try {
          script = grammar::Script::parse(j["script"].get<std::string>());
        } catch (const grammar::ParseError& e) {
          throw SessionError(Kind::Invalid, e.what());
        }
        store_.mutate(new_id, 0, [&](DesignSession& s) { s.apply_script(script); });
      }
      std::string out;
      store_.read(new_id, [&](const DesignSession& s) { out = session_json(s); });
      return reply(201, out);
    }

    const bool get = method == "GET", post = method == "POST";
    std::string out;
    if (action.empty() && get) {
      store_.read(id, [&](const DesignSession& s) { out = session_json(s); });
      return reply(200, out);
    }
    if (action == "applicable-rules" && get) {
      ApiResponse r;
      store_.read(id, [&](const DesignSession& s) { r = applicable(s, query); });
      return r;
    }
    if (action == "mesh" && get) {
      const auto kind = query.count("kind") ? query.at("kind") : "all";
      store_.read(id, [&](const DesignSession& s) { out = mesh_json(s, kind).dump(); });
      return reply(200, out);
    }
    if (action == "simulate" && get) {
      std::optional<FsmBinding> binding;
      store_.read(id, [&](const DesignSession& s) { binding = s.fsm(); });
      if (query.count("fsm")) binding = FsmBinding{query.at("fsm"), {}};
      if (!binding) throw SessionError(Kind::Rejected, "session has no FSM bound; pass fsm=NAME");
      const auto spec = load_bound_fsm(*binding);
      const std::string trace = query.count("trace") ? query.at("trace") : "synth:flat";
      const auto seed = static_cast<std::uint64_t>(query_long(query, "seed", 7));
      const long max_steps = query_long(query, "max_steps", 10000);
      if (max_steps < 0) throw SessionError(Kind::Invalid, "max_steps must be non-negative");
      try {
        const auto frames = tactile::normalize_trace(tactile::open_trace(trace, seed));
        return reply(200, task_log_json(tactile::run_task(spec, frames, static_cast<std::size_t>(max_steps))));
      } catch (const tactile::TraceError& e) {
        throw SessionError(Kind::Rejected, e.what());
      } catch (const tactile::FsmError& e) {
        throw SessionError(Kind::Rejected, e.what());
      }
    }
    if (action == "export" && post) {
      const json j = parse_body(body);
      ExportBundle bundle;
      store_.read(id, [&](const DesignSession& s) { bundle = render_export(s); });
      auto manifest = bundle.manifest;
      if (j.contains("dir")) manifest = write_export(bundle, j["dir"].get<std::string>());
      return reply(200, json::parse(manifest.to_json()));
    }
    if (post && (action == "apply-rule" || action == "cage-edit" || action == "sensor" || action == "fsm")) {
      const json j = parse_body(body);
      const auto rev = expected_revision(j);
      json extra = json::object();
      store_.mutate(id, rev, [&](DesignSession& s) {
        if (action == "apply-rule") {
          apply_rule(s, j, extra);
        } else if (action == "cage-edit") {
          cage_edit(s, j, extra);
        } else if (action == "sensor") {
          sensor(s, j);
        } else {
          s.bind_fsm({j.value("name", ""), j.value("thresholds", std::map<std::string, double>{})});
        }
      });
      store_.read(id, [&](const DesignSession& s) {
        json r = json::parse(session_json(s));
        for (auto& [k, v] : extra.items()) r[k] = v;
        out = r.dump();
      });
      return reply(200, out);
    }
    if (!store_.contains(id)) throw SessionError(Kind::NotFound, "no session '" + id + "'");
    return reply(405, json{{"error", method + " " + path + " is not supported"}});
  } catch (const SessionError& e) {
    return reply(status_of(e.kind()), json{{"error", e.what()}});
  } catch (const json::exception& e) {
    return reply(400, json{{"error", std::string("bad request field: ") + e.what()}});
  } catch (const knit::KnitError& e) {
    return reply(422, json{{"error", e.what()}});
  } catch (const std::exception& e) {
    return reply(500, json{{"error", e.what()}});
  }
}

struct ApiServer::Impl {
  Api& api;
  httplib::Server server;
  std::thread thread;
  explicit Impl(Api& a) : api(a) {}
};

ApiServer::ApiServer(Api& api) : impl_(std::make_unique<Impl>(api)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto r = impl_->api.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Delete(".*", handler);
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw SessionError(Kind::Invalid, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ApiServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw SessionError(Kind::Invalid, "cannot serve on " + host + ":" + std::to_string(port));
}

void ApiServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace forge::service
