#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/grammar/design_graph.hpp"
#include "forge/grammar/ruleset.hpp"

namespace forge::grammar {

/// Raised when an application is not (or no longer) valid for a design.
class InapplicableRule : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RuleApplication {
  std::string rule_id;
  NodeId anchor = 0;
  int rotation = 0;
  /// Pattern slot -> node id. Always holds "anchor"; holds "hub" when the rule
  /// has a hub context and a hub node exists.
  std::map<std::string, NodeId> binding;

  friend bool operator==(const RuleApplication&, const RuleApplication&) = default;
};

std::string describe(const RuleApplication& app);

DesignGraph new_design(const RuleSet& rules);

/// Every application valid for `design`, sorted by (rule id, anchor, rotation).
/// Rule ids sort numerically within their prefix (Rp2 < Rp10).
std::vector<RuleApplication> applicable_rules(const RuleSet& rules, const DesignGraph& design,
                                              std::optional<NodeId> node = std::nullopt);

/// Pure: returns a new design, `design` is untouched. Throws InapplicableRule.
DesignGraph apply_rule(const RuleSet& rules, const DesignGraph& design, const RuleApplication& app);

/// Explanation of why `app` fails, or nullopt when it is applicable.
std::optional<std::string> why_inapplicable(const RuleSet& rules, const DesignGraph& design,
                                            const RuleApplication& app);

/// Palm-to-finger handoff: requires a palm phase design with no remaining palm
/// nonterminals; sets every hub's k to the number of free knuckles.
DesignGraph handoff(const RuleSet& rules, const DesignGraph& design);
bool can_handoff(const RuleSet& rules, const DesignGraph& design, std::string* reason = nullptr);

/// True iff every node's symbol is terminal.
bool is_complete(const RuleSet& rules, const DesignGraph& design);

/// Knuckle nodes (symbols tagged "knuckle") with no finger attached on port "up".
std::vector<NodeId> free_knuckles(const RuleSet& rules, const DesignGraph& design);

/// Number of fingers: children attached to knuckle nodes.
std::size_t finger_count(const RuleSet& rules, const DesignGraph& design);

int compare_rule_ids(std::string_view a, std::string_view b);

/// Rotates the whole palm layer by `degrees` (multiple of 90) about the root cell.
DesignGraph rotate_palm(const DesignGraph& design, int degrees);

}  // namespace forge::grammar
