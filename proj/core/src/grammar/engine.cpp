#include "forge/grammar/engine.hpp"

#include <algorithm>
#include <cctype>

namespace forge::grammar {

namespace {

constexpr GridCell kGridStep[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

bool guard_ok(KGuard guard, const std::optional<int>& k) {
  switch (guard) {
    case KGuard::Any: return true;
    case KGuard::Positive: return k && *k > 0;
    case KGuard::Zero: return k && *k == 0;
  }
  return false;
}

std::optional<std::string> match_pattern(const RuleSet& rules, const DesignGraph& g, NodeId id,
                                         const NodePattern& p) {
  const Node& n = g.node(id);
  if (n.symbol != p.symbol) return "node " + std::to_string(id) + " is '" + n.symbol + "', not '" + p.symbol + "'";
  if (!guard_ok(p.k_guard, n.k))
    return std::string("node ") + std::to_string(id) + " fails the k guard (" +
           (p.k_guard == KGuard::Positive ? "k > 0" : "k = 0") + ")";
  if (p.leaf) {
    const bool leaf = g.child_count(id) == 0;
    if (*p.leaf && !leaf) return "node " + std::to_string(id) + " already has children";
    if (!*p.leaf && leaf) return "node " + std::to_string(id) + " has no children";
  }
  for (const auto& port : p.free_ports)
    if (g.child_on_port(id, port)) return "port " + port + " of node " + std::to_string(id) + " is occupied";
  if (!p.parent_not_tags.empty()) {
    if (auto par = g.parent(id)) {
      const Symbol* ps = rules.find_symbol(g.node(*par).symbol);
      for (const auto& tag : p.parent_not_tags)
        if (ps && ps->has_tag(tag))
          return "parent of node " + std::to_string(id) + " is a " + tag + " (" + ps->name + ")";
    }
  }
  return std::nullopt;
}

std::string resolve_port(const DesignGraph& g, std::optional<NodeId> parent, const std::string& port) {
  if (port.empty() || port.back() != '#') return port;
  std::string stem = port.substr(0, port.size() - 1);
  int used = 0;
  if (parent)
    for (const Edge* e : g.child_edges(*parent))
      if (e->port_from.rfind(stem, 0) == 0) ++used;
  return stem + std::to_string(used);
}

struct Plan {
  const GrammarRule* rule = nullptr;
  std::optional<NodeId> hub;
};

std::optional<std::string> check(const RuleSet& rules, const DesignGraph& g, const RuleApplication& app, Plan& plan) {
  const GrammarRule* r = rules.find_rule(app.rule_id);
  if (!r) return "unknown rule '" + app.rule_id + "'";
  plan.rule = r;
  if (g.phase() == Phase::Finished) return "the design is finished";
  if (r->layer == Layer::Palm && g.phase() != Phase::Palm) return "palm rules only apply before the handoff";
  if (r->layer == Layer::Finger && g.phase() != Phase::Finger) return "finger rules only apply after the handoff";
  if (!g.contains(app.anchor)) return "no node " + std::to_string(app.anchor);
  if (std::find(r->rotations.begin(), r->rotations.end(), app.rotation) == r->rotations.end())
    return "rotation " + std::to_string(app.rotation) + " is not allowed for " + r->id;

  std::optional<std::string> why;
  bool matched = false;
  for (const auto& p : r->lhs) {
    auto reason = match_pattern(rules, g, app.anchor, p);
    if (!reason) {
      matched = true;
      break;
    }
    if (!why) why = reason;
  }
  if (!matched) return why;

  if (r->hub) {
    for (const Node& n : g.nodes()) {
      if (n.symbol != r->hub->symbol) continue;
      if (!guard_ok(r->hub->guard, n.k)) return "hub node " + std::to_string(n.id) + " fails its k guard";
      if (n.k && *n.k + r->hub->k_delta < 0) return "hub node " + std::to_string(n.id) + " would get negative k";
      plan.hub = n.id;
    }
  }

  const Node& anchor = g.node(app.anchor);
  if (r->k_effect.kind == KEffect::Kind::Add && (!anchor.k || *anchor.k + r->k_effect.value < 0))
    return "k of node " + std::to_string(app.anchor) + " would become negative";

  // Ports and cells taken by this application itself.
  std::vector<GridCell> new_cells;
  std::vector<std::string> anchor_ports;
  for (std::size_t i = 0; i < r->adds.size(); ++i) {
    const TemplateNode& t = r->adds[i];
    if (t.grid) {
      if (t.parent != -1) return "grid nodes must attach to the anchor";
      if (!anchor.cell) return "node " + std::to_string(app.anchor) + " is not on the palm grid";
      const auto dir = *grid_direction(rotate_grid_port(t.parent_port, app.rotation));
      const GridCell cell{anchor.cell->x + kGridStep[dir].x, anchor.cell->y + kGridStep[dir].y};
      if (g.node_at(cell) || std::find(new_cells.begin(), new_cells.end(), cell) != new_cells.end())
        return "cell (" + std::to_string(cell.x) + "," + std::to_string(cell.y) + ") is occupied";
      new_cells.push_back(cell);
    }
    if (t.parent == -1) {
      std::string port = t.grid ? rotate_grid_port(t.parent_port, app.rotation) : t.parent_port;
      if (!port.empty() && port.back() == '#') continue;
      if (g.child_on_port(app.anchor, port) || std::find(anchor_ports.begin(), anchor_ports.end(), port) != anchor_ports.end())
        return "port " + port + " of node " + std::to_string(app.anchor) + " is occupied";
      anchor_ports.push_back(port);
    }
  }
  return std::nullopt;
}

std::optional<int> k_for(const KSpec& spec, const Node& anchor) {
  switch (spec.kind) {
    case KSpec::Kind::None: return std::nullopt;
    case KSpec::Kind::Literal: return spec.value;
    case KSpec::Kind::Inherit: return anchor.k;
  }
  return std::nullopt;
}

bool has_nonterminal(const RuleSet& rules, const DesignGraph& g) {
  for (const Node& n : g.nodes())
    if (!rules.symbol(n.symbol).terminal()) return true;
  return false;
}

std::pair<std::string_view, long> split_id(std::string_view id) {
  std::size_t i = id.size();
  while (i > 0 && std::isdigit(static_cast<unsigned char>(id[i - 1]))) --i;
  long num = -1;
  if (i < id.size()) num = std::stol(std::string(id.substr(i)));
  return {id.substr(0, i), num};
}

}  // namespace

std::string describe(const RuleApplication& app) {
  std::string out = app.rule_id + " at " + std::to_string(app.anchor);
  if (app.rotation != 0) out += " rot " + std::to_string(app.rotation);
  return out;
}

DesignGraph new_design(const RuleSet& rules) {
  const Symbol& s = rules.symbol(rules.start_symbol());
  return DesignGraph::with_root(s.name, s.has_param ? std::optional<int>(0) : std::nullopt, GridCell{0, 0});
}

int compare_rule_ids(std::string_view a, std::string_view b) {
  auto [pa, na] = split_id(a);
  auto [pb, nb] = split_id(b);
  if (pa != pb) return pa < pb ? -1 : 1;
  if (na != nb) return na < nb ? -1 : 1;
  return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
}

std::optional<std::string> why_inapplicable(const RuleSet& rules, const DesignGraph& design,
                                            const RuleApplication& app) {
  Plan plan;
  return check(rules, design, app, plan);
}

std::vector<RuleApplication> applicable_rules(const RuleSet& rules, const DesignGraph& design,
                                              std::optional<NodeId> node) {
  std::vector<RuleApplication> out;
  if (design.phase() == Phase::Finished) return out;
  const auto& list = design.phase() == Phase::Palm ? rules.palm_rules() : rules.finger_rules();
  for (const auto& r : list) {
    for (const Node& n : design.nodes()) {
      if (node && n.id != *node) continue;
      bool symbol_ok = std::any_of(r.lhs.begin(), r.lhs.end(), [&](const NodePattern& p) { return p.symbol == n.symbol; });
      if (!symbol_ok) continue;
      for (int rot : r.rotations) {
        RuleApplication app{r.id, n.id, rot, {}};
        Plan plan;
        if (check(rules, design, app, plan)) continue;
        app.binding["anchor"] = n.id;
        if (plan.hub) app.binding["hub"] = *plan.hub;
        out.push_back(std::move(app));
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const RuleApplication& a, const RuleApplication& b) {
    if (int c = compare_rule_ids(a.rule_id, b.rule_id)) return c < 0;
    if (a.anchor != b.anchor) return a.anchor < b.anchor;
    return a.rotation < b.rotation;
  });
  return out;
}

DesignGraph apply_rule(const RuleSet& rules, const DesignGraph& design, const RuleApplication& app) {
  Plan plan;
  if (auto why = check(rules, design, app, plan)) throw InapplicableRule(describe(app) + ": " + *why);
  const GrammarRule& r = *plan.rule;

  DesignGraph g = design;
  const Node before = g.node(app.anchor);

  if (r.relabel) {
    Node& a = g.node(app.anchor);
    a.symbol = *r.relabel;
    if (!rules.symbol(a.symbol).has_param) a.k.reset();
  }
  {
    Node& a = g.node(app.anchor);
    if (r.k_effect.kind == KEffect::Kind::Set) a.k = r.k_effect.value;
    if (r.k_effect.kind == KEffect::Kind::Add) a.k = *a.k + r.k_effect.value;
  }
  if (plan.hub) {
    Node& h = g.node(*plan.hub);
    if (h.k) h.k = *h.k + r.hub->k_delta;
  }

  std::vector<NodeId> created;
  for (const TemplateNode& t : r.adds) {
    const NodeId parent = t.parent == -1 ? app.anchor : created[static_cast<std::size_t>(t.parent)];
    std::optional<GridCell> cell;
    std::string port_from;
    std::string port_to = t.child_port;
    if (t.grid) {
      port_from = rotate_grid_port(t.parent_port, app.rotation);
      port_to = opposite_grid_port(port_from);
      const auto dir = *grid_direction(port_from);
      const GridCell& pc = *g.node(parent).cell;
      cell = GridCell{pc.x + kGridStep[dir].x, pc.y + kGridStep[dir].y};
    } else {
      port_from = resolve_port(g, parent, t.parent_port);
    }
    const NodeId id = g.add_node(t.symbol, k_for(t.k, before), cell);
    g.add_edge(Edge{parent, id, port_from, port_to, t.roll});
    created.push_back(id);
  }

  if (g.phase() == Phase::Finger && !has_nonterminal(rules, g)) g.set_phase(Phase::Finished);
  return g;
}

bool can_handoff(const RuleSet& rules, const DesignGraph& design, std::string* reason) {
  auto fail = [&](std::string why) {
    if (reason) *reason = std::move(why);
    return false;
  };
  if (design.phase() != Phase::Palm) return fail("the design is already past the palm phase");
  for (const Node& n : design.nodes()) {
    const Symbol& s = rules.symbol(n.symbol);
    if (s.layer == Layer::Palm && !s.terminal())
      return fail("palm node " + std::to_string(n.id) + " (" + n.symbol + ") is still a nonterminal");
  }
  return true;
}

DesignGraph handoff(const RuleSet& rules, const DesignGraph& design) {
  std::string reason;
  if (!can_handoff(rules, design, &reason)) throw InapplicableRule("handoff: " + reason);
  DesignGraph g = design;
  const int knuckles = static_cast<int>(free_knuckles(rules, g).size());
  for (const Node& n : design.nodes())
    if (rules.symbol(n.symbol).has_tag("hub")) g.node(n.id).k = knuckles;
  g.set_phase(Phase::Finger);
  return g;
}

bool is_complete(const RuleSet& rules, const DesignGraph& design) { return !has_nonterminal(rules, design); }

std::vector<NodeId> free_knuckles(const RuleSet& rules, const DesignGraph& design) {
  std::vector<NodeId> out;
  for (const Node& n : design.nodes())
    if (rules.symbol(n.symbol).has_tag("knuckle") && !design.child_on_port(n.id, "up")) out.push_back(n.id);
  return out;
}

std::size_t finger_count(const RuleSet& rules, const DesignGraph& design) {
  std::size_t count = 0;
  for (const Node& n : design.nodes())
    if (rules.symbol(n.symbol).has_tag("knuckle")) count += design.child_count(n.id);
  return count;
}

DesignGraph rotate_palm(const DesignGraph& design, int degrees) {
  if (degrees % 90 != 0) throw std::invalid_argument("palm rotation must be a multiple of 90 degrees");
  const int steps = ((degrees / 90) % 4 + 4) % 4;
  DesignGraph g;
  g.set_phase(design.phase());
  const GridCell origin = design.size() && design.node(0).cell ? *design.node(0).cell : GridCell{};
  for (const Node& n : design.nodes()) {
    std::optional<GridCell> cell = n.cell;
    if (cell) {
      int x = cell->x - origin.x;
      int y = cell->y - origin.y;
      for (int i = 0; i < steps; ++i) {
        const int t = x;
        x = -y;
        y = t;
      }
      cell = GridCell{origin.x + x, origin.y + y};
    }
    g.add_node(n.symbol, n.k, cell);
  }
  for (const Edge& e : design.edges())
    g.add_edge(Edge{e.from, e.to, rotate_grid_port(e.port_from, degrees), rotate_grid_port(e.port_to, degrees), e.roll});
  return g;
}

}  // namespace forge::grammar
