#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "forge/data.hpp"
#include "forge/grammar/canonical.hpp"
#include "forge/grammar/enumerate.hpp"
#include "forge/service/api.hpp"
#include "forge/tactile/synth.hpp"

namespace forge::cli {

namespace {

using json = nlohmann::json;
using service::DesignSession;
using service::SessionError;

/// Thrown for bad input; everything else that escapes is internal.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string session = "forge-session.json";
  std::string format = "plain";
  bool structured() const { return format == "structured"; }
};

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::vector<double> parse_numbers(const std::string& text, std::size_t n, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UserError(what + " must be " + std::to_string(n) + " comma-separated numbers");
    }
  }
  if (out.size() != n) throw UserError(what + " must be " + std::to_string(n) + " comma-separated numbers");
  return out;
}

std::filesystem::path preset_path(const std::string& name, const std::string& suffix) {
  if (name.find('/') != std::string::npos || name.ends_with(".json")) return name;
  return data_dir() / "presets" / (name + suffix);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UserError(path.string() + " is not valid JSON: " + e.what());
  }
}

DesignSession open_session(const Options& o) {
  if (!std::filesystem::exists(o.session))
    throw UserError("no session at " + o.session + "; run 'forge new' or 'forge script' first");
  return DesignSession::open(o.session);
}

void print_summary(const DesignSession& s, const Options& o, std::ostream& out, const json& extra = json::object()) {
  if (o.structured()) {
    json j = json::parse(service::session_json(s));
    for (auto& [k, v] : extra.items()) j[k] = v;
    out << j.dump() << "\n";
    return;
  }
  const auto& rules = s.workspace().rules;
  out << "session " << s.id() << " revision " << s.revision() << "\n";
  out << "nodes " << s.design().size() << " fingers " << grammar::finger_count(rules, s.design()) << " phase "
      << grammar::to_string(s.design().phase()) << (grammar::is_complete(rules, s.design()) ? " complete" : "") << "\n";
  out << "cage edits " << s.cage().deltas().size() << " patches " << s.patches().size() << " taxels " << s.taxel_count()
      << (s.fsm() ? " fsm " + s.fsm()->name : std::string()) << "\n";
  out << "state " << hex64(s.state_hash()) << "\n";
}

void apply_deform_preset(DesignSession& s, const json& preset, std::vector<std::string>& lines) {
  for (const auto& e : preset.at("edits")) {
    const auto v = e.at("vertex").get<deform::VertexId>();
    const auto& p = e.at("position");
    const auto r = s.edit_cage(v, {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    lines.push_back("vertex " + std::to_string(v) + " -> " + num(r.position.x()) + " " + num(r.position.y()) + " " +
                    num(r.position.z()) + (r.projected ? " (projected)" : ""));
  }
}

void apply_sensor_preset(DesignSession& s, const json& preset) {
  for (const auto& p : preset.at("patches")) {
    knit::KnitRegion region;
    region.chain = p.at("chain").get<std::vector<grammar::NodeId>>();
    for (const auto& side : p.at("sides")) region.sides.push_back(knit::side_from_string(side.get<std::string>()));
    knit::Gauge gauge;
    if (p.contains("gauge")) gauge = {p["gauge"].at(0).get<double>(), p["gauge"].at(1).get<double>()};
    const auto name = p.at("name").get<std::string>();
    s.define_patch(name, region, gauge);
    for (const auto& c : p.at("sensors")) s.place_sensor(name, c.at(0).get<int>(), c.at(1).get<int>());
  }
  if (preset.contains("fsm"))
    s.bind_fsm({preset["fsm"].at("name").get<std::string>(),
                preset["fsm"].value("thresholds", std::map<std::string, double>{})});
}

int enumerate(const grammar::RuleSet& rules, int segments, int grid, int fingers, int slots, bool count_only,
              std::size_t list, const Options& o, std::ostream& out) {
  if (segments < 0 || grid < 1 || fingers < 0 || slots < 0) throw UserError("enumerate limits must be non-negative");
  std::string knuckle;
  for (const auto& s : rules.symbols())
    if (s.has_tag("knuckle")) {
      knuckle = s.name;
      break;
    }
  if (knuckle.empty()) throw UserError("ruleset has no knuckle symbol");
  bool exact = true;
  const auto per_slot = grammar::count_fingers(rules, knuckle, segments, &exact);
  if (count_only) {
    if (o.structured())
      out << json{{"fingers_per_slot", per_slot.str()}, {"max_segments", segments}, {"exact", exact}}.dump() << "\n";
    else
      out << per_slot << "\n";
    return 0;
  }
  grammar::EnumerationLimits limits;
  limits.max_finger_segments = segments;
  limits.max_grid = grid;
  limits.max_fingers = fingers;
  const auto r = grammar::enumerate_designs(rules, limits);
  const auto bound = grammar::hand_lower_bound(r.fingers_per_slot, slots);
  std::vector<std::string> listed;
  if (list > 0) {
    grammar::DesignStream stream(rules, limits);
    while (listed.size() < list) {
      auto d = stream.next();
      if (!d) break;
      listed.push_back(grammar::canonical_form(*d));
    }
  }
  if (o.structured()) {
    out << json{{"fingers_per_slot", r.fingers_per_slot.str()},
                {"palms", r.palm_count},
                {"designs", r.count.str()},
                {"exact", r.exact},
                {"note", r.note},
                {"slot_bound", bound.str()},
                {"slots", slots},
                {"listed", listed}}
               .dump()
        << "\n";
  } else {
    out << "fingers per slot " << r.fingers_per_slot << "\n";
    out << "palms " << r.palm_count << "\n";
    out << "designs " << r.count << (r.exact ? "" : " (lower bound)") << "\n";
    out << "slot bound (" << slots << " slots) " << bound << "\n";
    for (const auto& l : listed) out << l << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"forge: grammar-based manipulator design pipeline", "forge"};
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Options o;
  app.add_option("--session", o.session, "Session file")->envname("FORGE_SESSION");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"plain", "structured"}));
  app.require_subcommand(1);

  auto* c_new = app.add_subcommand("new", "Create an empty design session");
  std::string ruleset = "default", id = "s1";
  bool force = false;
  c_new->add_option("--ruleset", ruleset, "Ruleset path or 'default'")->envname("FORGE_RULESET");
  c_new->add_option("--id", id, "Session id");
  c_new->add_flag("--force", force, "Overwrite an existing session file");

  auto* c_show = app.add_subcommand("show", "Summarise the session");

  auto* c_apply = app.add_subcommand("apply", "Apply one grammar rule (or 'handoff')");
  std::string rule;
  std::optional<grammar::NodeId> at;
  std::optional<int> rot;
  std::string apply_script;
  c_apply->add_option("rule", rule, "Rule id");
  c_apply->add_option("--script", apply_script, "Replay a script file instead of one rule");
  c_apply->add_option("--at", at, "Anchor node");
  c_apply->add_option("--rot", rot, "Rotation in degrees");

  auto* c_script = app.add_subcommand("script", "Replay a rule script into the session (created if missing)");
  std::string script_path;
  c_script->add_option("file", script_path, "Script file")->required();

  auto* c_deform = app.add_subcommand("deform", "Edit cage vertices");
  std::string deform_preset, to;
  std::optional<deform::VertexId> vertex;
  bool reset = false;
  c_deform->add_option("--preset", deform_preset, "Preset name or JSON file");
  c_deform->add_option("--vertex", vertex, "Cage vertex id");
  c_deform->add_option("--to", to, "Target position x,y,z");
  c_deform->add_flag("--reset", reset, "Return every cage vertex to rest");

  auto* c_sensor = app.add_subcommand("sensor", "Define sensor patches and place sensor stitches");
  std::string sensor_preset, define, place, remove, chain, sides = "front", gauge, stitch;
  c_sensor->add_option("--preset", sensor_preset, "Preset name or JSON file");
  c_sensor->add_option("--define", define, "Define (or redefine) a patch");
  c_sensor->add_option("--chain", chain, "Comma-separated node ids, proximal first");
  c_sensor->add_option("--sides", sides, "Comma-separated sides: front,right,back,left");
  c_sensor->add_option("--gauge", gauge, "course,wale stitches per mm");
  c_sensor->add_option("--place", place, "Patch to place a sensor in");
  c_sensor->add_option("--remove", remove, "Patch to remove a sensor from");
  c_sensor->add_option("--stitch", stitch, "course,wale of the stitch");
  std::string bind;
  std::vector<std::string> bind_thresholds;
  c_sensor->add_option("--bind-fsm", bind, "Bind a bundled FSM to the session");
  c_sensor->add_option("--threshold", bind_thresholds, "NAME=VALUE override for the bound FSM");

  auto* c_export = app.add_subcommand("export", "Write manufacturing files and manifest.json");
  std::string out_dir, stl_dir, knit_dir;
  c_export->add_option("--out", out_dir, "Directory for every file");
  c_export->add_option("--stl", stl_dir, "Directory for STL files only");
  c_export->add_option("--knit", knit_dir, "Directory for knit programs only");

  auto* c_sim = app.add_subcommand("simulate", "Run a task FSM against a trace");
  std::string fsm_name, trace = "synth:flat";
  std::uint64_t seed = 7;
  std::size_t max_steps = 10000;
  double scale = 1.0;
  std::vector<std::string> thresholds;
  c_sim->add_option("--fsm", fsm_name, "Bundled FSM name or .fsm file");
  c_sim->add_option("--trace", trace, "synth:NAME or a CSV file");
  c_sim->add_option("--seed", seed, "Seed for synthetic traces");
  c_sim->add_option("--max-steps", max_steps, "Frame budget");
  c_sim->add_option("--threshold", thresholds, "NAME=VALUE threshold override");
  c_sim->add_option("--scale", scale, "Multiply the trace and every threshold by this");
  std::string dump_trace;
  c_sim->add_option("--dump-trace", dump_trace, "Also write the raw trace as CSV");

  auto* c_enum = app.add_subcommand("enumerate", "Count designs in the grammar's design space");
  int segments = 3, grid = 3, fingers = 6, slots = 6;
  bool count_only = false;
  std::size_t list = 0;
  c_enum->add_option("--max-segments", segments, "Segments per finger");
  c_enum->add_option("--max-grid", grid, "Palm bounding box side");
  c_enum->add_option("--max-fingers", fingers, "Fingers per hand");
  c_enum->add_option("--slots", slots, "Slots for the product bound");
  c_enum->add_flag("--count-only", count_only, "Only the finger count per knuckle");
  c_enum->add_option("--list", list, "Also print this many designs (canonical form)");
  c_enum->add_option("--ruleset", ruleset, "Ruleset path or 'default'")->envname("FORGE_RULESET");

  auto* c_serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host = "127.0.0.1", store_dir;
  int port = 8717;
  c_serve->add_option("--host", host, "Bind address");
  c_serve->add_option("--port", port, "Port");
  c_serve->add_option("--store", store_dir, "Directory for session files");

  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--session" || args[i] == "--format") {
      ++i;
      continue;
    }
    if (args[i].starts_with("-")) continue;
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args[i];
    if (!known) {
      err << "forge: unknown subcommand '" << args[i] << "'\n\n" << app.help();
      return 1;
    }
    break;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "forge: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  auto parse_thresholds = [](const std::vector<std::string>& items) {
    std::map<std::string, double> m;
    for (const auto& t : items) {
      const auto eq = t.find('=');
      if (eq == std::string::npos || eq == 0) throw UserError("threshold '" + t + "' is not NAME=VALUE");
      try {
        std::size_t used = 0;
        const std::string v = t.substr(eq + 1);
        m[t.substr(0, eq)] = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
      } catch (const std::invalid_argument&) {
        throw UserError("threshold '" + t + "' has a malformed value");
      }
    }
    return m;
  };

  try {
    if (c_new->parsed()) {
      if (std::filesystem::exists(o.session) && !force)
        throw UserError(o.session + " exists; pass --force to overwrite");
      auto s = DesignSession::create(id, service::Workspace::load(ruleset));
      s.save(o.session);
      print_summary(s, o, out);
      return 0;
    }
    if (c_show->parsed()) {
      print_summary(open_session(o), o, out);
      return 0;
    }
    if (c_apply->parsed() && !apply_script.empty()) {
      if (!rule.empty()) throw UserError("apply takes a rule id or --script, not both");
      script_path = apply_script;
    } else if (c_apply->parsed()) {
      if (rule.empty()) throw UserError("apply needs a rule id or --script FILE");
      auto s = open_session(o);
      grammar::ScriptStep step;
      step.rule_id = rule;
      if (rule == "handoff") {
        step.kind = grammar::ScriptStep::Kind::Handoff;
      } else {
        step.anchor = at;
        step.rotation = rot;
      }
      const auto line = s.apply_step(step);
      s.save(o.session);
      if (!o.structured()) out << line << "\n";
      print_summary(s, o, out, {{"applied", line}});
      return 0;
    }
    if (c_script->parsed() || !script_path.empty()) {
      auto s = std::filesystem::exists(o.session) ? open_session(o)
                                                  : DesignSession::create(id, service::Workspace::load("default"));
      grammar::Script script;
      try {
        script = grammar::Script::load(script_path);
      } catch (const grammar::ParseError& e) {
        throw UserError(script_path + ": " + e.what());
      } catch (const std::runtime_error& e) {
        throw UserError(e.what());
      }
      const auto log = s.apply_script(script);
      s.save(o.session);
      if (!o.structured())
        for (const auto& l : log) out << l << "\n";
      print_summary(s, o, out, {{"log", log}});
      return 0;
    }
    if (c_deform->parsed()) {
      auto s = open_session(o);
      std::vector<std::string> lines;
      if (reset) {
        s.reset_cage();
        lines.push_back("cage reset");
      } else if (!deform_preset.empty()) {
        apply_deform_preset(s, read_json(preset_path(deform_preset, ".deform.json")), lines);
      } else if (vertex && !to.empty()) {
        const auto p = parse_numbers(to, 3, "--to");
        const auto r = s.edit_cage(*vertex, {p[0], p[1], p[2]});
        lines.push_back("vertex " + std::to_string(*vertex) + " -> " + num(r.position.x()) + " " + num(r.position.y()) +
                        " " + num(r.position.z()) + (r.projected ? " (projected)" : ""));
      } else {
        throw UserError("deform needs --preset, --reset, or --vertex with --to");
      }
      s.save(o.session);
      if (!o.structured())
        for (const auto& l : lines) out << l << "\n";
      print_summary(s, o, out, {{"edits", lines}});
      return 0;
    }
    if (c_sensor->parsed()) {
      auto s = open_session(o);
      auto stitch_at = [&] {
        const auto v = parse_numbers(stitch, 2, "--stitch");
        return std::pair{static_cast<int>(v[0]), static_cast<int>(v[1])};
      };
      bool did = false;
      if (!sensor_preset.empty()) {
        apply_sensor_preset(s, read_json(preset_path(sensor_preset, ".sensors.json")));
        did = true;
      }
      if (!define.empty()) {
        knit::KnitRegion region;
        std::stringstream cs(chain), ss(sides);
        for (std::string item; std::getline(cs, item, ',');) {
          try {
            region.chain.push_back(static_cast<grammar::NodeId>(std::stoul(item)));
          } catch (const std::exception&) {
            throw UserError("--chain must be comma-separated node ids");
          }
        }
        for (std::string item; std::getline(ss, item, ',');) region.sides.push_back(knit::side_from_string(item));
        knit::Gauge g;
        if (!gauge.empty()) {
          const auto v = parse_numbers(gauge, 2, "--gauge");
          g = {v[0], v[1]};
        }
        s.define_patch(define, region, g);
        did = true;
      }
      if (!place.empty()) {
        const auto [c, w] = stitch_at();
        s.place_sensor(place, c, w);
        did = true;
      }
      if (!remove.empty()) {
        const auto [c, w] = stitch_at();
        s.remove_sensor(remove, c, w);
        did = true;
      }
      if (!bind.empty()) {
        s.bind_fsm({bind, parse_thresholds(bind_thresholds)});
        did = true;
      }
      if (!did) throw UserError("sensor needs --preset, --define, --place, --remove or --bind-fsm");
      s.save(o.session);
      print_summary(s, o, out);
      return 0;
    }
    if (c_export->parsed()) {
      if (out_dir.empty() && stl_dir.empty() && knit_dir.empty())
        throw UserError("export needs --out DIR, --stl DIR or --knit DIR");
      const auto s = open_session(o);
      const auto bundle = service::render_export(s);
      service::ExportManifest manifest;
      const auto write = [&](const std::string& dir, const std::vector<std::string>& kinds) {
        if (dir.empty()) return;
        const auto m = service::write_export(bundle, dir, kinds);
        manifest.files.insert(manifest.files.end(), m.files.begin(), m.files.end());
      };
      write(out_dir, {});
      write(stl_dir, {"stl"});
      write(knit_dir, {"knit_h", "knit_v"});
      if (o.structured()) {
        out << json::parse(manifest.to_json()).dump() << "\n";
      } else {
        for (const auto& f : manifest.files)
          out << f.kind << " " << f.name << " " << f.bytes << " " << hex64(f.hash) << "\n";
      }
      return 0;
    }
    if (c_sim->parsed()) {
      if (fsm_name.empty()) throw UserError("simulate needs --fsm NAME");
      tactile::FsmSpec spec;
      if (fsm_name.ends_with(".fsm")) {
        spec = tactile::FsmSpec::load(fsm_name);
        for (const auto& [k, v] : parse_thresholds(thresholds)) spec.set_threshold(k, v);
      } else {
        spec = service::load_bound_fsm({fsm_name, parse_thresholds(thresholds)});
      }
      if (!(scale > 0)) throw UserError("--scale must be positive");
      for (auto& [_, v] : spec.thresholds) v *= scale;
      auto raw = tactile::scale_trace(tactile::open_trace(trace, seed), scale);
      if (!dump_trace.empty()) std::ofstream(dump_trace) << tactile::format_trace_csv(raw);
      const auto log = tactile::run_task(spec, tactile::normalize_trace(raw), max_steps);
      out << (o.structured() ? service::task_log_json(log) + "\n" : log.to_text());
      return 0;
    }
    if (c_enum->parsed()) {
      const auto ws_rules = grammar::RuleSet::load(
          ruleset == "default" ? data_dir() / "rulesets" / "default.ruleset" : std::filesystem::path(ruleset));
      return enumerate(ws_rules, segments, grid, fingers, slots, count_only, list, o, out);
    }
    if (c_serve->parsed()) {
      std::optional<std::filesystem::path> dir;
      if (!store_dir.empty()) dir = store_dir;
      service::SessionStore store(service::Workspace::load("default"), dir);
      const auto loaded = store.load_existing();
      service::Api api(store);
      service::ApiServer server(api);
      err << "forge: serving on http://" << host << ":" << port << " (" << loaded << " sessions loaded)\n";
      server.run(host, port);
      return 0;
    }
  } catch (const UserError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const SessionError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const grammar::ParseError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const grammar::ValidationError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const tactile::TraceError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const tactile::FsmError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const knit::KnitError& e) {
    err << "forge: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "forge: malformed preset: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "forge: internal error: " << e.what() << "\n";
    return 2;
  }
  err << "forge: no subcommand\n" << app.help();
  return 1;
}

}  // namespace forge::cli
