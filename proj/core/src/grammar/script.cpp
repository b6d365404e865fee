#include "forge/grammar/script.hpp"

#include <fstream>
#include <sstream>

namespace forge::grammar {

ScriptError::ScriptError(std::size_t step_index, std::string rule_id, std::string reason)
    : std::runtime_error("step " + std::to_string(step_index) + " (" + rule_id + "): " + reason),
      step_index_(step_index),
      rule_id_(std::move(rule_id)),
      reason_(std::move(reason)) {}

Script Script::parse(std::string_view text) {
  Script s;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    strip_comment(raw);
    std::istringstream ls(raw);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    if (toks[0] == "name") {
      if (toks.size() != 2) throw ParseError(line_no, "name takes one word");
      s.name = toks[1];
      continue;
    }
    ScriptStep step;
    step.line = line_no;
    if (toks[0] == "handoff") {
      if (toks.size() != 1) throw ParseError(line_no, "handoff takes no arguments");
      step.kind = ScriptStep::Kind::Handoff;
      step.rule_id = "handoff";
      s.steps.push_back(step);
      continue;
    }
    step.rule_id = toks[0];
    for (std::size_t i = 1; i < toks.size(); i += 2) {
      if (i + 1 >= toks.size()) throw ParseError(line_no, "'" + toks[i] + "' needs a value");
      int v = 0;
      try {
        std::size_t used = 0;
        v = std::stoi(toks[i + 1], &used);
        if (used != toks[i + 1].size() || v < 0) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError(line_no, "expected a non-negative integer after '" + toks[i] + "'");
      }
      if (toks[i] == "at") {
        step.anchor = static_cast<NodeId>(v);
      } else if (toks[i] == "rot") {
        step.rotation = v;
      } else {
        throw ParseError(line_no, "unknown step option '" + toks[i] + "'");
      }
    }
    s.steps.push_back(step);
  }
  return s;
}

Script Script::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Script s = parse(ss.str());
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

std::string Script::to_text() const {
  std::string out;
  if (!name.empty()) out += "name " + name + "\n";
  for (const auto& st : steps) {
    if (st.kind == ScriptStep::Kind::Handoff) {
      out += "handoff\n";
      continue;
    }
    out += st.rule_id;
    if (st.anchor) out += " at " + std::to_string(*st.anchor);
    if (st.rotation) out += " rot " + std::to_string(*st.rotation);
    out += "\n";
  }
  return out;
}

RuleApplication resolve_step(const RuleSet& rules, const DesignGraph& design, const ScriptStep& step) {
  if (!rules.find_rule(step.rule_id)) throw InapplicableRule("unknown rule '" + step.rule_id + "'");
  const int rotation = step.rotation.value_or(0);
  std::vector<RuleApplication> candidates;
  for (auto& c : applicable_rules(rules, design, step.anchor))
    if (c.rule_id == step.rule_id && c.rotation == rotation) candidates.push_back(std::move(c));
  if (candidates.size() == 1) return candidates.front();
  if (candidates.empty()) {
    if (step.anchor) {
      RuleApplication app{step.rule_id, *step.anchor, rotation, {}};
      if (auto why = why_inapplicable(rules, design, app)) throw InapplicableRule(*why);
    }
    throw InapplicableRule("no node matches " + step.rule_id);
  }
  std::string where;
  for (const auto& c : candidates) where += " [" + describe(c) + "]";
  throw InapplicableRule("ambiguous, " + std::to_string(candidates.size()) + " candidates:" + where);
}

ReplayResult replay_script(const RuleSet& rules, const DesignGraph& design, const Script& script) {
  ReplayResult out{design, {}, {}};
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const ScriptStep& step = script.steps[i];
    const std::size_t number = i + 1;
    try {
      if (step.kind == ScriptStep::Kind::Handoff) {
        out.design = handoff(rules, out.design);
        out.log.push_back("step " + std::to_string(number) + ": handoff");
        out.resolved.push_back(step);
        continue;
      }
      RuleApplication app = resolve_step(rules, out.design, step);
      out.design = apply_rule(rules, out.design, app);
      out.log.push_back("step " + std::to_string(number) + ": " + describe(app));
      ScriptStep r = step;
      r.anchor = app.anchor;
      r.rotation = app.rotation;
      out.resolved.push_back(r);
    } catch (const InapplicableRule& e) {
      throw ScriptError(number, step.rule_id, e.what());
    }
  }
  return out;
}

}  // namespace forge::grammar
