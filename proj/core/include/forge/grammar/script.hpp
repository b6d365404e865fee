#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/grammar/engine.hpp"

namespace forge::grammar {

/// One line of a rule script: either a rule with optional anchor/rotation
/// hints, or the palm-to-finger handoff.
struct ScriptStep {
  enum class Kind { Rule, Handoff };
  Kind kind = Kind::Rule;
  std::string rule_id;
  std::optional<NodeId> anchor;
  std::optional<int> rotation;
  std::size_t line = 0;

  friend bool operator==(const ScriptStep&, const ScriptStep&) = default;
};

struct Script {
  std::string name;
  std::vector<ScriptStep> steps;

  static Script parse(std::string_view text);
  static Script load(const std::filesystem::path& path);
  std::string to_text() const;
};

class ScriptError : public std::runtime_error {
 public:
  ScriptError(std::size_t step_index, std::string rule_id, std::string reason);
  std::size_t step_index() const { return step_index_; }
  const std::string& rule_id() const { return rule_id_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t step_index_;
  std::string rule_id_;
  std::string reason_;
};

struct ReplayResult {
  DesignGraph design;
  /// One line per step: "step 3: Rp4 at 2 rot 90".
  std::vector<std::string> log;
  /// The steps with anchors and rotations resolved.
  std::vector<ScriptStep> resolved;
};

/// Resolves a step against `design`. A missing rotation means 0; a missing
/// anchor is accepted only when exactly one candidate remains.
RuleApplication resolve_step(const RuleSet& rules, const DesignGraph& design, const ScriptStep& step);

/// Steps are numbered from 1 in errors.
ReplayResult replay_script(const RuleSet& rules, const DesignGraph& design, const Script& script);

}  // namespace forge::grammar
