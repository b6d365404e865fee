#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forge::grammar {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SymbolKind { Terminal, Nonterminal };
enum class Layer { Palm, Finger };

struct Symbol {
  std::string name;
  SymbolKind kind = SymbolKind::Terminal;
  Layer layer = Layer::Palm;
  bool has_param = false;
  std::vector<std::string> tags;

  bool terminal() const { return kind == SymbolKind::Terminal; }
  bool has_tag(std::string_view tag) const;
};

enum class KGuard { Any, Positive, Zero };

/// One alternative of a rule's left-hand side.
struct NodePattern {
  std::string symbol;
  KGuard k_guard = KGuard::Any;
  std::optional<bool> leaf;  // true: no children yet, false: at least one child
  std::vector<std::string> free_ports;
  std::vector<std::string> parent_not_tags;
};

/// Context on the (at most one) hub node of a symbol anywhere in the design,
/// e.g. "P k+ -1": every hub must have positive k, and its k is decremented.
struct HubContext {
  std::string symbol;
  KGuard guard = KGuard::Any;
  int k_delta = 0;
};

struct KSpec {
  enum class Kind { None, Literal, Inherit };
  Kind kind = Kind::None;
  int value = 0;
};

struct KEffect {
  enum class Kind { Keep, Set, Add };
  Kind kind = Kind::Keep;
  int value = 0;
};

/// A node created by a rule. `parent` is -1 for the anchor, otherwise the index
/// of an earlier template node. Grid nodes are placed in the cell adjacent to the
/// parent in direction `parent_port`, rotated with the application.
struct TemplateNode {
  std::string symbol;
  KSpec k;
  int parent = -1;
  std::string parent_port;
  std::string child_port;
  bool grid = false;
  int roll = 0;
  std::string label;
};

struct GrammarRule {
  std::string id;
  Layer layer = Layer::Palm;
  std::vector<NodePattern> lhs;
  std::optional<std::string> relabel;
  KEffect k_effect;
  std::vector<TemplateNode> adds;
  std::optional<HubContext> hub;
  std::vector<int> rotations{0};
  std::string note;
};

struct RuleSetMetadata {
  std::string name;
  int version = 1;
  std::string author;
};

class RuleSet {
 public:
  static RuleSet parse(std::string_view text);
  static RuleSet load(const std::filesystem::path& path);

  const RuleSetMetadata& metadata() const { return metadata_; }
  const std::string& start_symbol() const { return start_; }
  const std::vector<Symbol>& symbols() const { return symbols_; }
  const std::vector<GrammarRule>& palm_rules() const { return palm_rules_; }
  const std::vector<GrammarRule>& finger_rules() const { return finger_rules_; }

  const Symbol& symbol(std::string_view name) const;
  const Symbol* find_symbol(std::string_view name) const;
  const GrammarRule& rule(std::string_view id) const;
  const GrammarRule* find_rule(std::string_view id) const;

  /// All symbols a node labelled `symbol` can carry over its lifetime.
  std::vector<std::string> relabel_closure(std::string_view symbol) const;
  /// Symbols a node labelled `symbol` can still take once it has children.
  std::vector<std::string> nonleaf_closure(std::string_view symbol) const;

  /// Throws ValidationError naming the offending rule/symbol.
  void validate() const;

 private:
  RuleSetMetadata metadata_;
  std::string start_;
  std::vector<Symbol> symbols_;
  std::vector<GrammarRule> palm_rules_;
  std::vector<GrammarRule> finger_rules_;
};

/// Directions of the palm grid ports in counter-clockwise order.
inline constexpr std::string_view kGridPorts[4] = {"east", "north", "west", "south"};
std::optional<int> grid_direction(std::string_view port);
std::string rotate_grid_port(std::string_view port, int degrees);
std::string opposite_grid_port(std::string_view port);

/// Drops a trailing comment: '#' at line start or after whitespace.
void strip_comment(std::string& line);

}  // namespace forge::grammar
