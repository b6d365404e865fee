#include "forge/tactile/fsm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace forge::tactile {

namespace {

constexpr std::pair<CommandKind, std::string_view> kCommands[] = {
    {CommandKind::FingerFlex, "finger_flex"},   {CommandKind::FingerExtend, "finger_extend"},
    {CommandKind::FingerAbduct, "finger_abduct"}, {CommandKind::WristRotate, "wrist_rotate"},
    {CommandKind::ArmMove, "arm_move"},         {CommandKind::Hold, "hold"},
    {CommandKind::Done, "done"},
};

constexpr double kWristLimit = 180.0;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string_view cmp_text(Cmp c) {
  switch (c) {
    case Cmp::Ge: return ">=";
    case Cmp::Gt: return ">";
    case Cmp::Le: return "<=";
    case Cmp::Lt: return "<";
  }
  return "?";
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
    if (next == std::string::npos) return out;
    pos = next + sep.size();
  }
}

std::optional<double> parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

CommandKind command_from_string(const std::string& s, std::size_t line) {
  for (const auto& [k, name] : kCommands)
    if (name == s) return k;
  throw FsmError("line " + std::to_string(line) + ": unknown command '" + s + "'");
}

Quantity parse_quantity(const std::string& text, std::size_t line) {
  static const std::regex call(R"(^([a-z_]+)\(([^()]*)\)$)");
  Quantity q;
  q.text = text;
  std::smatch m;
  if (std::regex_match(text, m, call)) {
    const std::string fn = m[1];
    for (auto& a : split(m[2], ",")) {
      if (a.empty()) throw FsmError("line " + std::to_string(line) + ": empty argument in '" + text + "'");
      q.args.push_back(a);
    }
    if (fn == "pmax" && q.args.size() == 1) {
      q.kind = Quantity::Kind::PMax;
    } else if (fn == "max" && !q.args.empty()) {
      q.kind = Quantity::Kind::Max;
    } else if (fn == "min" && !q.args.empty()) {
      q.kind = Quantity::Kind::Min;
    } else if (fn == "count" && q.args.size() == 1) {
      q.kind = Quantity::Kind::Count;
    } else if (fn == "event" && q.args.size() == 1) {
      q.kind = Quantity::Kind::Event;
    } else {
      throw FsmError("line " + std::to_string(line) + ": cannot read '" + text + "'");
    }
    return q;
  }
  if (text == "steps") {
    q.kind = Quantity::Kind::Steps;
  } else if (text == "wrist") {
    q.kind = Quantity::Kind::Wrist;
  } else {
    q.kind = Quantity::Kind::Var;
    q.args = {text};
  }
  return q;
}

Atom parse_atom(const std::string& text, std::size_t line) {
  static const std::regex form(R"(^(\S+)\s*(>=|<=|>|<)\s*(\S+)$)");
  std::smatch m;
  if (!std::regex_match(text, m, form))
    throw FsmError("line " + std::to_string(line) + ": guard term '" + text + "' is not 'lhs op rhs'");
  Atom a;
  a.lhs = parse_quantity(m[1], line);
  const std::string op = m[2];
  a.op = op == ">=" ? Cmp::Ge : op == ">" ? Cmp::Gt : op == "<=" ? Cmp::Le : Cmp::Lt;
  a.rhs = m[3];
  a.literal = parse_number(a.rhs);
  return a;
}

// True when the two comparisons on the same quantity cannot hold together.
bool exclusive(const Atom& a, const Atom& b) {
  if (a.lhs.text != b.lhs.text) return false;
  auto lower = [](Cmp c) { return c == Cmp::Ge || c == Cmp::Gt; };
  if (lower(a.op) == lower(b.op)) return false;
  const Atom& lo = lower(a.op) ? a : b;  // x >= / > lo.rhs
  const Atom& hi = lower(a.op) ? b : a;  // x <= / < hi.rhs
  if (lo.rhs == hi.rhs) return lo.op == Cmp::Gt || hi.op == Cmp::Lt;
  if (lo.literal && hi.literal) {
    if (*lo.literal > *hi.literal) return true;
    return *lo.literal == *hi.literal && (lo.op == Cmp::Gt || hi.op == Cmp::Lt);
  }
  return false;
}

bool guards_exclusive(const Transition& x, const Transition& y) {
  for (const auto& a : x.guard)
    for (const auto& b : y.guard)
      if (exclusive(a, b)) return true;
  return false;
}

std::string guard_text(const std::vector<Atom>& guard) {
  std::string out;
  for (const auto& a : guard) {
    if (!out.empty()) out += " and ";
    out += a.lhs.text + " " + std::string(cmp_text(a.op)) + " " + a.rhs;
  }
  return out;
}

}  // namespace

std::string_view to_string(CommandKind k) {
  for (const auto& [c, name] : kCommands)
    if (c == k) return name;
  return "?";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Rejected: return "rejected";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

FsmSpec FsmSpec::parse(std::string_view text) {
  FsmSpec spec;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  auto fail = [&](const std::string& msg) { return FsmError("line " + std::to_string(line) + ": " + msg); };
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    std::istringstream ls(raw);
    std::string kw;
    ls >> kw;
    std::vector<std::string> rest;
    for (std::string t; ls >> t;) rest.push_back(t);
    if (kw == "fsm") {
      if (rest.size() != 1) throw fail("fsm takes one name");
      spec.name = rest[0];
    } else if (kw == "note") {
      spec.notes.push_back(trim(raw.substr(4)));
    } else if (kw == "patch") {
      if (rest.empty()) throw fail("patch needs at least one id");
      spec.patches.insert(spec.patches.end(), rest.begin(), rest.end());
    } else if (kw == "threshold" || kw == "param" || kw == "var") {
      if (rest.size() != 2) throw fail(kw + " takes a name and a value");
      const auto v = parse_number(rest[1]);
      if (!v) throw fail("'" + rest[1] + "' is not a number");
      auto& table = kw == "threshold" ? spec.thresholds : kw == "param" ? spec.params : spec.vars;
      if (!table.emplace(rest[0], *v).second) throw fail(kw + " '" + rest[0] + "' declared twice");
    } else if (kw == "state") {
      if (rest.empty()) throw fail("state needs a name");
      StateDecl s{rest[0], std::nullopt};
      if (rest.size() == 2 && rest[1] == "initial") {
        if (!spec.initial.empty()) throw fail("second initial state");
        spec.initial = s.name;
      } else if (rest.size() == 3 && rest[1] == "terminal") {
        if (rest[2] == "success") {
          s.terminal = Outcome::Success;
        } else if (rest[2] == "rejected") {
          s.terminal = Outcome::Rejected;
        } else {
          throw fail("terminal outcome must be success or rejected");
        }
      } else if (rest.size() != 1) {
        throw fail("state takes 'initial' or 'terminal success|rejected'");
      }
      spec.states.push_back(std::move(s));
    } else if (kw == "on") {
      const auto do_pos = raw.find(" do ");
      if (do_pos == std::string::npos) throw fail("transition needs 'do COMMAND'");
      std::string head = trim(raw.substr(2, do_pos - 2));
      const std::string tail = trim(raw.substr(do_pos + 4));
      Transition t;
      t.line = line;
      std::string guard;
      if (const auto w = head.find(" when "); w != std::string::npos) {
        guard = trim(head.substr(w + 6));
        head = trim(head.substr(0, w));
      }
      const auto arrow = split(head, "->");
      if (arrow.size() != 2 || arrow[0].empty() || arrow[1].empty()) throw fail("transition needs 'FROM -> TO'");
      t.from = arrow[0];
      t.to = arrow[1];
      if (!guard.empty() && guard != "true")
        for (const auto& term : split(guard, " and ")) t.guard.push_back(parse_atom(term, line));
      const auto parts = split(tail, ";");
      std::istringstream cs(parts[0]);
      std::string kind, mag, target;
      cs >> kind >> mag >> target;
      t.command.kind = command_from_string(kind, line);
      if (!mag.empty()) {
        const auto v = parse_number(mag);
        if (!v) throw fail("command magnitude '" + mag + "' is not a number");
        t.command.magnitude = *v;
      }
      t.command.target = target;
      for (std::size_t i = 1; i < parts.size(); ++i) {
        static const std::regex upd(R"(^(\w+)\s*(\+=|=)\s*(\S+)$)");
        std::smatch m;
        if (!std::regex_match(parts[i], m, upd)) throw fail("update '" + parts[i] + "' is not 'var = n' or 'var += n'");
        const auto v = parse_number(m[3]);
        if (!v) throw fail("update value '" + std::string(m[3]) + "' is not a number");
        t.updates.push_back({m[1], m[2] == "+=", *v});
      }
      spec.transitions.push_back(std::move(t));
    } else {
      throw fail("unknown keyword '" + kw + "'");
    }
  }
  spec.validate();
  return spec;
}

FsmSpec FsmSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FsmError("cannot open FSM " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const FsmError& e) {
    throw FsmError(path.filename().string() + ": " + e.what());
  }
}

std::string FsmSpec::to_text() const {
  std::string out = "fsm " + name + "\n";
  for (const auto& n : notes) out += "note " + n + "\n";
  out += "patch";
  for (const auto& p : patches) out += " " + p;
  out += "\n";
  for (const auto& [k, v] : thresholds) out += "threshold " + k + " " + num(v) + "\n";
  for (const auto& [k, v] : params) out += "param " + k + " " + num(v) + "\n";
  for (const auto& [k, v] : vars) out += "var " + k + " " + num(v) + "\n";
  for (const auto& s : states) {
    out += "state " + s.name;
    if (s.name == initial) out += " initial";
    if (s.terminal) out += " terminal " + std::string(to_string(*s.terminal));
    out += "\n";
  }
  for (const auto& t : transitions) {
    out += "on " + t.from + " -> " + t.to;
    if (!t.guard.empty()) out += " when " + guard_text(t.guard);
    out += " do " + std::string(to_string(t.command.kind)) + " " + num(t.command.magnitude);
    if (!t.command.target.empty()) out += " " + t.command.target;
    for (const auto& u : t.updates) out += "; " + u.var + (u.add ? " += " : " = ") + num(u.value);
    out += "\n";
  }
  return out;
}

const StateDecl& FsmSpec::state(std::string_view n) const {
  for (const auto& s : states)
    if (s.name == n) return s;
  throw FsmError("FSM '" + name + "' has no state '" + std::string(n) + "'");
}

bool FsmSpec::is_terminal(std::string_view n) const { return state(n).terminal.has_value(); }

void FsmSpec::set_threshold(const std::string& key, double value) {
  auto it = thresholds.find(key);
  if (it == thresholds.end()) throw FsmError("FSM '" + name + "' has no threshold '" + key + "'");
  it->second = value;
}

void FsmSpec::validate() const {
  if (name.empty()) throw FsmError("FSM has no name");
  if (initial.empty()) throw FsmError("FSM '" + name + "' has no initial state");
  std::set<std::string> names;
  for (const auto& s : states)
    if (!names.insert(s.name).second) throw FsmError("state '" + s.name + "' declared twice");
  std::set<std::string> symbols;
  for (const auto* table : {&thresholds, &params, &vars})
    for (const auto& [k, _] : *table)
      if (!symbols.insert(k).second) throw FsmError("symbol '" + k + "' declared twice");
  const std::set<std::string> patch_set(patches.begin(), patches.end());
  for (const auto& t : transitions) {
    const std::string at = "line " + std::to_string(t.line) + ": ";
    if (!names.count(t.from)) throw FsmError(at + "unknown state '" + t.from + "'");
    if (!names.count(t.to)) throw FsmError(at + "unknown state '" + t.to + "'");
    if (state(t.from).terminal) throw FsmError(at + "terminal state '" + t.from + "' has a transition");
    for (const auto& a : t.guard) {
      switch (a.lhs.kind) {
        case Quantity::Kind::PMax:
        case Quantity::Kind::Max:
        case Quantity::Kind::Min:
          for (const auto& p : a.lhs.args)
            if (!patch_set.count(p)) throw FsmError(at + "undeclared patch '" + p + "'");
          break;
        case Quantity::Kind::Count:
          if (!parse_number(a.lhs.args[0]) && !thresholds.count(a.lhs.args[0]))
            throw FsmError(at + "undeclared threshold '" + a.lhs.args[0] + "'");
          break;
        case Quantity::Kind::Var:
          if (!vars.count(a.lhs.args[0])) throw FsmError(at + "undeclared symbol '" + a.lhs.args[0] + "'");
          break;
        default:
          break;
      }
      if (!a.literal && !symbols.count(a.rhs)) throw FsmError(at + "undeclared threshold '" + a.rhs + "'");
    }
    for (const auto& u : t.updates)
      if (!vars.count(u.var)) throw FsmError(at + "update of undeclared var '" + u.var + "'");
  }
  for (std::size_t i = 0; i < transitions.size(); ++i)
    for (std::size_t j = i + 1; j < transitions.size(); ++j)
      if (transitions[i].from == transitions[j].from && !guards_exclusive(transitions[i], transitions[j]))
        throw FsmError("guards overlap: transitions at lines " + std::to_string(transitions[i].line) + " and " +
                       std::to_string(transitions[j].line) + " out of " + transitions[i].from + " can both fire");
}

FsmRuntime FsmRuntime::start(const FsmSpec& spec) { return {spec.initial, 0, 0, spec.vars}; }

namespace {

double symbol_value(const FsmSpec& spec, const FsmRuntime& rt, const std::string& s) {
  if (auto v = parse_number(s)) return *v;
  if (auto it = spec.thresholds.find(s); it != spec.thresholds.end()) return it->second;
  if (auto it = spec.params.find(s); it != spec.params.end()) return it->second;
  if (auto it = rt.vars.find(s); it != rt.vars.end()) return it->second;
  throw FsmError("undeclared symbol '" + s + "'");
}

double patch_value(const ProcessedFrame& f, const std::string& patch) {
  auto it = f.p_max.find(patch);
  if (it == f.p_max.end()) throw FsmError("frame " + std::to_string(f.step) + " has no readings for patch '" + patch + "'");
  return it->second;
}

double quantity(const FsmSpec& spec, const FsmRuntime& rt, const ProcessedFrame& f, const Quantity& q) {
  switch (q.kind) {
    case Quantity::Kind::PMax: return patch_value(f, q.args[0]);
    case Quantity::Kind::Max:
    case Quantity::Kind::Min: {
      double v = patch_value(f, q.args[0]);
      for (const auto& p : q.args)
        v = q.kind == Quantity::Kind::Max ? std::max(v, patch_value(f, p)) : std::min(v, patch_value(f, p));
      return v;
    }
    case Quantity::Kind::Count: {
      const double t = symbol_value(spec, rt, q.args[0]);
      double n = 0;
      for (const auto& p : spec.patches) n += patch_value(f, p) >= t ? 1 : 0;
      return n;
    }
    case Quantity::Kind::Steps: return static_cast<double>(rt.steps_in_state);
    case Quantity::Kind::Wrist: return rt.wrist;
    case Quantity::Kind::Event: return f.events.count(q.args[0]) ? 1 : 0;
    case Quantity::Kind::Var: return rt.vars.at(q.args[0]);
  }
  return 0;
}

bool holds(const FsmSpec& spec, const FsmRuntime& rt, const ProcessedFrame& f, const Atom& a) {
  const double x = quantity(spec, rt, f, a.lhs);
  const double y = symbol_value(spec, rt, a.rhs);
  switch (a.op) {
    case Cmp::Ge: return x >= y;
    case Cmp::Gt: return x > y;
    case Cmp::Le: return x <= y;
    case Cmp::Lt: return x < y;
  }
  return false;
}

}  // namespace

StepResult step_fsm(const FsmSpec& spec, const FsmRuntime& rt, const ProcessedFrame& frame) {
  if (spec.is_terminal(rt.state)) throw FsmError("FSM '" + spec.name + "' already stopped in " + rt.state);
  std::optional<std::size_t> fired;
  for (std::size_t i = 0; i < spec.transitions.size(); ++i) {
    const Transition& t = spec.transitions[i];
    if (t.from != rt.state) continue;
    if (!std::all_of(t.guard.begin(), t.guard.end(), [&](const Atom& a) { return holds(spec, rt, frame, a); })) continue;
    if (fired)
      throw FsmError("transitions at lines " + std::to_string(spec.transitions[*fired].line) + " and " +
                     std::to_string(t.line) + " both fire at frame " + std::to_string(frame.step));
    fired = i;
  }
  StepResult r{rt, {}, fired};
  if (!fired) {
    ++r.next.steps_in_state;
    return r;
  }
  const Transition& t = spec.transitions[*fired];
  r.command = t.command;
  if (t.command.kind == CommandKind::WristRotate) {
    r.next.wrist += t.command.magnitude;
    if (std::abs(r.next.wrist) > kWristLimit + 1e-9)
      throw FsmError("wrist would reach " + num(r.next.wrist) + " degrees, past the +-180 limit (line " +
                     std::to_string(t.line) + ")");
  }
  for (const auto& u : t.updates) r.next.vars[u.var] = u.add ? r.next.vars[u.var] + u.value : u.value;
  if (t.to != rt.state) {
    r.next.state = t.to;
    r.next.steps_in_state = 0;
  } else {
    ++r.next.steps_in_state;
  }
  return r;
}

std::optional<long> TaskLog::entered(std::string_view state) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    const bool before = i > 0 && states[i - 1] == state;
    if (states[i] == state && !before) return frame_steps[i];
  }
  return std::nullopt;
}

std::string TaskLog::to_text() const {
  std::string out = "outcome " + std::string(to_string(outcome)) + "\nfinal " + final_state + "\nsteps " +
                    std::to_string(states.size()) + "\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    out += std::to_string(frame_steps[i]) + " " + states[i] + " " + std::string(to_string(commands[i].kind)) + " " +
           num(commands[i].magnitude);
    if (!commands[i].target.empty()) out += " " + commands[i].target;
    out += " wrist=" + num(wrist[i]) + "\n";
  }
  return out;
}

TaskLog run_task(const FsmSpec& spec, const std::vector<ProcessedFrame>& frames, std::size_t max_steps) {
  TaskLog log;
  FsmRuntime rt = FsmRuntime::start(spec);
  log.final_state = rt.state;
  if (spec.is_terminal(rt.state)) {
    log.outcome = *spec.state(rt.state).terminal;
    return log;
  }
  for (std::size_t i = 0; i < frames.size() && i < max_steps; ++i) {
    StepResult r = step_fsm(spec, rt, frames[i]);
    rt = std::move(r.next);
    log.frame_steps.push_back(frames[i].step);
    log.states.push_back(rt.state);
    log.commands.push_back(r.command);
    log.wrist.push_back(rt.wrist);
    log.final_state = rt.state;
    if (const auto& term = spec.state(rt.state).terminal) {
      log.outcome = *term;
      return log;
    }
  }
  log.outcome = Outcome::Timeout;
  return log;
}

std::vector<std::string> bundled_fsm_names() { return {"bottle", "egg", "scissors", "wing_screw"}; }

}  // namespace forge::tactile
