#include "forge/grammar/ruleset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace forge::grammar {

bool Symbol::has_tag(std::string_view tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

std::optional<int> grid_direction(std::string_view port) {
  for (int i = 0; i < 4; ++i)
    if (kGridPorts[i] == port) return i;
  return std::nullopt;
}

std::string rotate_grid_port(std::string_view port, int degrees) {
  auto dir = grid_direction(port);
  if (!dir) return std::string(port);
  int steps = ((degrees / 90) % 4 + 4) % 4;
  return std::string(kGridPorts[(*dir + steps) % 4]);
}

std::string opposite_grid_port(std::string_view port) { return rotate_grid_port(port, 180); }

void strip_comment(std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
      line.erase(i);
      return;
    }
  }
}

namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_on(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(std::size_t line, std::string_view text) {
  try {
    std::size_t used = 0;
    int v = std::stoi(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected an integer, got '" + std::string(text) + "'");
  }
}

KSpec parse_kspec(std::size_t line, std::string_view tok) {
  // tok is the part after "k="
  if (tok == "inherit") return {KSpec::Kind::Inherit, 0};
  return {KSpec::Kind::Literal, parse_int(line, tok)};
}

NodePattern parse_alternative(std::size_t line, const std::vector<std::string>& toks) {
  if (toks.empty()) throw ParseError(line, "empty match alternative");
  NodePattern p;
  p.symbol = toks[0];
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    if (t == "leaf") {
      p.leaf = true;
    } else if (t == "nonleaf") {
      p.leaf = false;
    } else if (t == "k+") {
      p.k_guard = KGuard::Positive;
    } else if (t == "k0") {
      p.k_guard = KGuard::Zero;
    } else if (t.rfind("free=", 0) == 0) {
      p.free_ports.push_back(t.substr(5));
    } else if (t.rfind("parent-not=", 0) == 0) {
      p.parent_not_tags.push_back(t.substr(11));
    } else {
      throw ParseError(line, "unknown match flag '" + t + "'");
    }
  }
  return p;
}

TemplateNode parse_add(std::size_t line, const std::vector<std::string>& toks,
                       const std::vector<TemplateNode>& earlier) {
  // add SYM [k=..] grid DIR [as L]
  // add SYM [k=..] port P -> Q [on L] [roll N] [as L]
  if (toks.size() < 3) throw ParseError(line, "incomplete add");
  TemplateNode t;
  t.symbol = toks[1];
  std::size_t i = 2;
  if (toks[i].rfind("k=", 0) == 0) {
    t.k = parse_kspec(line, std::string_view(toks[i]).substr(2));
    ++i;
  }
  if (i >= toks.size()) throw ParseError(line, "add needs 'grid' or 'port'");
  if (toks[i] == "grid") {
    if (i + 1 >= toks.size()) throw ParseError(line, "grid add needs a direction");
    t.grid = true;
    t.parent_port = toks[i + 1];
    if (!grid_direction(t.parent_port)) throw ParseError(line, "unknown grid direction '" + t.parent_port + "'");
    t.child_port = opposite_grid_port(t.parent_port);
    i += 2;
  } else if (toks[i] == "port") {
    if (i + 3 >= toks.size() || toks[i + 2] != "->") throw ParseError(line, "expected 'port P -> Q'");
    t.parent_port = toks[i + 1];
    t.child_port = toks[i + 3];
    i += 4;
  } else {
    throw ParseError(line, "add needs 'grid' or 'port', got '" + toks[i] + "'");
  }
  while (i < toks.size()) {
    if (i + 1 >= toks.size()) throw ParseError(line, "dangling '" + toks[i] + "'");
    const std::string& key = toks[i];
    const std::string& val = toks[i + 1];
    if (key == "as") {
      t.label = val;
    } else if (key == "on") {
      auto it = std::find_if(earlier.begin(), earlier.end(), [&](const TemplateNode& e) { return e.label == val; });
      if (it == earlier.end()) throw ParseError(line, "'on " + val + "' refers to no earlier 'as' label");
      t.parent = static_cast<int>(it - earlier.begin());
    } else if (key == "roll") {
      t.roll = parse_int(line, val);
    } else {
      throw ParseError(line, "unknown add option '" + key + "'");
    }
    i += 2;
  }
  return t;
}

std::string join(const std::vector<std::string>& toks, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < toks.size(); ++i) {
    if (i > from) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace

RuleSet RuleSet::parse(std::string_view text) {
  RuleSet rs;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool header = false;
  GrammarRule* open_rule = nullptr;
  std::size_t open_rule_line = 0;
  std::vector<GrammarRule> rules;

  while (std::getline(in, raw)) {
    ++line_no;
    strip_comment(raw);
    auto toks = split_ws(raw);
    if (toks.empty()) continue;

    if (!header) {
      if (toks[0] != "forge-ruleset" || toks.size() != 2)
        throw ParseError(line_no, "expected header 'forge-ruleset <version>'");
      rs.metadata_.version = parse_int(line_no, toks[1]);
      if (rs.metadata_.version != 1)
        throw ParseError(line_no, "unsupported ruleset format version " + toks[1]);
      header = true;
      continue;
    }

    const std::string& kw = toks[0];
    if (open_rule) {
      GrammarRule& r = *open_rule;
      if (kw == "end") {
        open_rule = nullptr;
      } else if (kw == "note") {
        r.note = join(toks, 1);
      } else if (kw == "match") {
        std::vector<std::string> rest(toks.begin() + 1, toks.end());
        std::vector<std::string> cur;
        for (const auto& t : rest) {
          if (t == "|") {
            r.lhs.push_back(parse_alternative(line_no, cur));
            cur.clear();
          } else {
            cur.push_back(t);
          }
        }
        r.lhs.push_back(parse_alternative(line_no, cur));
      } else if (kw == "relabel") {
        if (toks.size() != 2) throw ParseError(line_no, "relabel takes one symbol");
        r.relabel = toks[1];
      } else if (kw == "k") {
        if (toks.size() != 2 || toks[1].size() < 2) throw ParseError(line_no, "expected 'k =N', 'k +N' or 'k -N'");
        char op = toks[1][0];
        int v = parse_int(line_no, std::string_view(toks[1]).substr(1));
        if (op == '=') {
          r.k_effect = {KEffect::Kind::Set, v};
        } else if (op == '+') {
          r.k_effect = {KEffect::Kind::Add, v};
        } else if (op == '-') {
          r.k_effect = {KEffect::Kind::Add, -v};
        } else {
          throw ParseError(line_no, "expected 'k =N', 'k +N' or 'k -N'");
        }
      } else if (kw == "hub") {
        if (toks.size() < 2) throw ParseError(line_no, "hub needs a symbol");
        HubContext h;
        h.symbol = toks[1];
        for (std::size_t i = 2; i < toks.size(); ++i) {
          if (toks[i] == "k+") {
            h.guard = KGuard::Positive;
          } else if (toks[i] == "k0") {
            h.guard = KGuard::Zero;
          } else {
            h.k_delta = parse_int(line_no, toks[i]);
          }
        }
        r.hub = h;
      } else if (kw == "add") {
        r.adds.push_back(parse_add(line_no, toks, r.adds));
      } else if (kw == "rotations") {
        r.rotations.clear();
        for (std::size_t i = 1; i < toks.size(); ++i) r.rotations.push_back(parse_int(line_no, toks[i]));
        if (r.rotations.empty()) throw ParseError(line_no, "rotations needs at least one angle");
      } else {
        throw ParseError(line_no, "unknown rule field '" + kw + "'");
      }
      continue;
    }

    if (kw == "name") {
      rs.metadata_.name = join(toks, 1);
    } else if (kw == "author") {
      rs.metadata_.author = join(toks, 1);
    } else if (kw == "start") {
      if (toks.size() != 2) throw ParseError(line_no, "start takes one symbol");
      rs.start_ = toks[1];
    } else if (kw == "symbol") {
      if (toks.size() < 4) throw ParseError(line_no, "expected 'symbol NAME terminal|nonterminal palm|finger ...'");
      Symbol s;
      s.name = toks[1];
      if (toks[2] == "terminal") {
        s.kind = SymbolKind::Terminal;
      } else if (toks[2] == "nonterminal") {
        s.kind = SymbolKind::Nonterminal;
      } else {
        throw ParseError(line_no, "symbol kind must be terminal or nonterminal");
      }
      if (toks[3] == "palm") {
        s.layer = Layer::Palm;
      } else if (toks[3] == "finger") {
        s.layer = Layer::Finger;
      } else {
        throw ParseError(line_no, "symbol layer must be palm or finger");
      }
      for (std::size_t i = 4; i < toks.size(); ++i) {
        if (toks[i] == "param") {
          s.has_param = true;
        } else if (toks[i].rfind("tags=", 0) == 0) {
          for (auto& t : split_on(std::string_view(toks[i]).substr(5), ','))
            if (!t.empty()) s.tags.push_back(t);
        } else {
          throw ParseError(line_no, "unknown symbol option '" + toks[i] + "'");
        }
      }
      rs.symbols_.push_back(std::move(s));
    } else if (kw == "rule") {
      if (toks.size() != 3) throw ParseError(line_no, "expected 'rule ID palm|finger'");
      GrammarRule r;
      r.id = toks[1];
      if (toks[2] == "palm") {
        r.layer = Layer::Palm;
      } else if (toks[2] == "finger") {
        r.layer = Layer::Finger;
      } else {
        throw ParseError(line_no, "rule layer must be palm or finger");
      }
      rules.push_back(std::move(r));
      open_rule = &rules.back();
      open_rule_line = line_no;
    } else {
      throw ParseError(line_no, "unknown keyword '" + kw + "'");
    }
  }

  if (!header) throw ParseError(line_no == 0 ? 1 : line_no, "empty ruleset");
  if (open_rule) throw ParseError(open_rule_line, "rule " + open_rule->id + " is missing 'end'");
  if (rs.start_.empty()) throw ParseError(line_no, "missing 'start' symbol");

  for (auto& r : rules) {
    if (r.lhs.empty()) throw ParseError(line_no, "rule " + r.id + " has no 'match'");
    (r.layer == Layer::Palm ? rs.palm_rules_ : rs.finger_rules_).push_back(std::move(r));
  }
  rs.validate();
  return rs;
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ruleset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const Symbol* RuleSet::find_symbol(std::string_view name) const {
  for (const auto& s : symbols_)
    if (s.name == name) return &s;
  return nullptr;
}

const Symbol& RuleSet::symbol(std::string_view name) const {
  if (const Symbol* s = find_symbol(name)) return *s;
  throw std::out_of_range("unknown symbol '" + std::string(name) + "'");
}

const GrammarRule* RuleSet::find_rule(std::string_view id) const {
  for (const auto* list : {&palm_rules_, &finger_rules_})
    for (const auto& r : *list)
      if (r.id == id) return &r;
  return nullptr;
}

const GrammarRule& RuleSet::rule(std::string_view id) const {
  if (const GrammarRule* r = find_rule(id)) return *r;
  throw std::out_of_range("unknown rule '" + std::string(id) + "'");
}

namespace {

std::vector<std::string> closure(const RuleSet& rs, std::string_view symbol, bool with_children) {
  std::vector<std::string> out{std::string(symbol)};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto* list : {&rs.palm_rules(), &rs.finger_rules()}) {
      for (const auto& r : *list) {
        if (!r.relabel) continue;
        bool matches = std::any_of(r.lhs.begin(), r.lhs.end(), [&](const NodePattern& p) {
          return p.symbol == out[i] && !(with_children && p.leaf == std::optional<bool>(true));
        });
        if (matches && std::find(out.begin(), out.end(), *r.relabel) == out.end()) out.push_back(*r.relabel);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> RuleSet::relabel_closure(std::string_view symbol) const { return closure(*this, symbol, false); }

std::vector<std::string> RuleSet::nonleaf_closure(std::string_view symbol) const { return closure(*this, symbol, true); }

void RuleSet::validate() const {
  std::set<std::string> names;
  for (const auto& s : symbols_) {
    if (s.name.empty()) throw ValidationError("symbol with empty name");
    if (!names.insert(s.name).second) throw ValidationError("symbol '" + s.name + "' declared twice");
    const bool lower = std::islower(static_cast<unsigned char>(s.name[0])) != 0;
    if (lower != s.terminal())
      throw ValidationError("symbol '" + s.name + "': terminal symbols must start lowercase, nonterminals uppercase");
  }
  const Symbol* start = find_symbol(start_);
  if (!start) throw ValidationError("start symbol '" + start_ + "' is not declared");
  if (start->terminal()) throw ValidationError("start symbol '" + start_ + "' must be a nonterminal");

  std::set<std::string> ids;
  for (const auto* list : {&palm_rules_, &finger_rules_}) {
    for (const auto& r : *list) {
      if (!ids.insert(r.id).second) throw ValidationError("rule id '" + r.id + "' is not unique");
      auto need = [&](const std::string& sym) -> const Symbol& {
        const Symbol* s = find_symbol(sym);
        if (!s) throw ValidationError("rule " + r.id + " references undeclared symbol '" + sym + "'");
        return *s;
      };
      for (const auto& p : r.lhs) {
        const Symbol& s = need(p.symbol);
        if (p.k_guard != KGuard::Any && !s.has_param)
          throw ValidationError("rule " + r.id + " guards k on '" + s.name + "', which has no parameter");
      }
      if (r.relabel) need(*r.relabel);
      if (r.hub) {
        const Symbol& h = need(r.hub->symbol);
        if (!h.has_param) throw ValidationError("rule " + r.id + " hub symbol '" + h.name + "' has no parameter");
      }
      for (const auto& t : r.adds) {
        const Symbol& s = need(t.symbol);
        if (s.has_param && t.k.kind == KSpec::Kind::None)
          throw ValidationError("rule " + r.id + " adds '" + s.name + "' without a k value");
        if (!s.has_param && t.k.kind != KSpec::Kind::None)
          throw ValidationError("rule " + r.id + " gives k to '" + s.name + "', which has no parameter");
        if (t.k.kind == KSpec::Kind::Literal && t.k.value < 0)
          throw ValidationError("rule " + r.id + " adds '" + s.name + "' with negative k");
        if (t.grid && r.layer != Layer::Palm)
          throw ValidationError("rule " + r.id + ": grid placement is only valid in palm rules");
      }
      for (int rot : r.rotations)
        if (rot < 0 || rot >= 360 || rot % 90 != 0)
          throw ValidationError("rule " + r.id + " has invalid rotation " + std::to_string(rot));
    }
  }
}

}  // namespace forge::grammar
