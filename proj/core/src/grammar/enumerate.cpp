#include "forge/grammar/enumerate.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "forge/grammar/canonical.hpp"
#include "forge/grammar/engine.hpp"

namespace forge::grammar {

namespace {

bool is_segment(const RuleSet& rules, const std::string& symbol) { return rules.symbol(symbol).has_tag("segment"); }

// Counts distinct finished subtrees growable from a node. A node's "life" is
// the sequence of finger rules applied to it; the children it gains along the
// way develop independently, so a finished subtree is a term
// symbol(port: child-set, ...) and the set of a life is a union of such terms.
class FingerCounter {
 public:
  explicit FingerCounter(const RuleSet& rules) : rules_(rules) {}

  bool exact() const { return exact_; }

  int intern(const std::string& symbol, std::optional<int> k, std::vector<std::pair<std::string, int>> children,
             const std::string& parent) {
    std::sort(children.begin(), children.end());
    std::string key = symbol + "|" + (k ? std::to_string(*k) : "-") + "|" + parent;
    for (const auto& [port, id] : children) key += "|" + port + ":" + std::to_string(id);
    auto [it, fresh] = index_.emplace(key, static_cast<int>(lives_.size()));
    if (fresh) {
      lives_.push_back(Life{symbol, k, std::move(children), parent});
      check_parent_stability(lives_.back());
    }
    return it->second;
  }

  BigInt count(int life, int budget) { return count_union({{life, budget}}); }

 private:
  struct Life {
    std::string symbol;
    std::optional<int> k;
    std::vector<std::pair<std::string, int>> children;
    std::string parent;
  };
  using SetKey = std::pair<int, int>;  // (life, segment budget)
  struct Term {
    std::string symbol;
    std::optional<int> k;
    std::vector<std::string> ports;
    std::vector<SetKey> kids;
    auto operator<=>(const Term&) const = default;
  };

  // A child whose parent can still be relabelled is matched against the
  // parent symbol it was created under; that is exact only when every
  // later label agrees on the tags the rules test.
  void check_parent_stability(const Life& life) {
    if (life.parent.empty() || rules_.symbol(life.parent).terminal()) return;
    const auto later = rules_.nonleaf_closure(life.parent);
    const Symbol& now = rules_.symbol(life.parent);
    for (const auto& r : rules_.finger_rules())
      for (const auto& p : r.lhs)
        for (const auto& tag : p.parent_not_tags)
          for (const auto& s : later)
            if (rules_.symbol(s).has_tag(tag) != now.has_tag(tag)) exact_ = false;
  }

  bool matches(const Life& n, const NodePattern& p) const {
    if (n.symbol != p.symbol) return false;
    if (p.k_guard == KGuard::Positive && !(n.k && *n.k > 0)) return false;
    if (p.k_guard == KGuard::Zero && !(n.k && *n.k == 0)) return false;
    if (p.leaf && *p.leaf != n.children.empty()) return false;
    for (const auto& port : p.free_ports)
      for (const auto& c : n.children)
        if (c.first == port) return false;
    if (!n.parent.empty())
      for (const auto& tag : p.parent_not_tags)
        if (rules_.symbol(n.parent).has_tag(tag)) return false;
    return true;
  }

  // Hub contexts are not tracked: the hub counter starts at the number of free
  // knuckles and each use consumes one, so it never blocks a finger.
  std::optional<int> apply(int id, const GrammarRule& r) {
    const Life n = lives_[static_cast<std::size_t>(id)];
    if (!std::any_of(r.lhs.begin(), r.lhs.end(), [&](const NodePattern& p) { return matches(n, p); }))
      return std::nullopt;
    std::string symbol = r.relabel.value_or(n.symbol);
    std::optional<int> k = rules_.symbol(symbol).has_param ? n.k : std::nullopt;
    if (r.k_effect.kind == KEffect::Kind::Set) k = r.k_effect.value;
    if (r.k_effect.kind == KEffect::Kind::Add) {
      if (!k || *k + r.k_effect.value < 0) return std::nullopt;
      k = *k + r.k_effect.value;
    }

    const std::size_t m = r.adds.size();
    std::vector<std::vector<std::pair<std::string, std::size_t>>> kids_of(m);
    std::vector<std::pair<std::string, int>> anchor_kids = n.children;
    std::vector<std::pair<std::string, std::size_t>> anchor_new;
    auto used_with_stem = [&](const std::string& stem) {
      int used = 0;
      for (const auto& c : anchor_kids)
        if (c.first.rfind(stem, 0) == 0) ++used;
      for (const auto& c : anchor_new)
        if (c.first.rfind(stem, 0) == 0) ++used;
      return used;
    };
    for (std::size_t i = 0; i < m; ++i) {
      const TemplateNode& t = r.adds[i];
      if (t.grid) throw std::logic_error("finger rule " + r.id + " places grid nodes");
      std::string port = t.parent_port;
      if (t.parent == -1) {
        if (!port.empty() && port.back() == '#') {
          port.pop_back();
          port += std::to_string(used_with_stem(port));
        }
        for (const auto& c : anchor_kids)
          if (c.first == port) return std::nullopt;
        anchor_new.emplace_back(port, i);
      } else {
        kids_of[static_cast<std::size_t>(t.parent)].emplace_back(port, i);
      }
    }
    std::vector<int> made(m, -1);
    for (std::size_t i = m; i-- > 0;) {
      const TemplateNode& t = r.adds[i];
      std::vector<std::pair<std::string, int>> kids;
      for (const auto& [port, j] : kids_of[i]) kids.emplace_back(port, made[j]);
      std::optional<int> kv;
      if (t.k.kind == KSpec::Kind::Literal) kv = t.k.value;
      if (t.k.kind == KSpec::Kind::Inherit) kv = n.k;
      const std::string parent = t.parent == -1 ? symbol : r.adds[static_cast<std::size_t>(t.parent)].symbol;
      made[i] = intern(t.symbol, kv, std::move(kids), parent);
    }
    for (const auto& [port, i] : anchor_new) anchor_kids.emplace_back(port, made[i]);
    return intern(symbol, k, std::move(anchor_kids), n.parent);
  }

  const std::vector<Term>& terms(SetKey key) {
    if (auto it = terms_memo_.find(key); it != terms_memo_.end()) return it->second;
    if (!in_progress_.insert(key).second)
      throw std::runtime_error("finger grammar derives an unbounded chain at symbol '" +
                               lives_[static_cast<std::size_t>(key.first)].symbol + "'");
    std::set<Term> out;
    const auto [id, budget] = key;
    const Life n = lives_[static_cast<std::size_t>(id)];
    if (rules_.symbol(n.symbol).terminal()) {
      const int rest = budget - (is_segment(rules_, n.symbol) ? 1 : 0);
      if (rest >= 0) {
        Term t{n.symbol, rules_.symbol(n.symbol).has_param ? n.k : std::nullopt, {}, {}};
        for (const auto& [port, child] : n.children) {
          t.ports.push_back(port);
          t.kids.emplace_back(child, rest);
        }
        out.insert(std::move(t));
      }
    }
    for (const auto& r : rules_.finger_rules()) {
      auto next = apply(id, r);
      if (!next || *next == id) continue;
      const auto& sub = terms({*next, budget});
      out.insert(sub.begin(), sub.end());
    }
    in_progress_.erase(key);
    return terms_memo_.emplace(key, std::vector<Term>(out.begin(), out.end())).first->second;
  }

  BigInt count_union(std::vector<SetKey> keys) {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    if (auto it = union_memo_.find(keys); it != union_memo_.end()) return it->second;

    // Terms of different shape (symbol, k, port set) are disjoint.
    std::map<std::tuple<std::string, std::optional<int>, std::vector<std::string>>, std::set<std::vector<SetKey>>> groups;
    for (const auto& key : keys)
      for (const Term& t : terms(key)) groups[{t.symbol, t.k, t.ports}].insert(t.kids);

    BigInt total = 0;
    for (const auto& [shape, tuples] : groups) total += count_group(tuples);
    union_memo_.emplace(keys, total);
    return total;
  }

  BigInt count_group(const std::set<std::vector<SetKey>>& tuples) {
    const std::size_t arity = tuples.begin()->size();
    if (arity == 0) return 1;
    std::vector<std::set<SetKey>> axis(arity);
    for (const auto& tup : tuples)
      for (std::size_t i = 0; i < arity; ++i) axis[i].insert(tup[i]);
    std::size_t cartesian = 1;
    for (const auto& a : axis) cartesian *= a.size();
    if (cartesian == tuples.size()) {
      // A full grid of alternatives: the union of products is the product of unions.
      BigInt product = 1;
      for (const auto& a : axis) product *= count_union({a.begin(), a.end()});
      return product;
    }
    exact_ = false;
    BigInt best = 0;
    for (const auto& tup : tuples) {
      BigInt product = 1;
      for (const auto& key : tup) product *= count_union({key});
      best = std::max(best, product);
    }
    return best;
  }

  const RuleSet& rules_;
  bool exact_ = true;
  std::vector<Life> lives_;
  std::map<std::string, int> index_;
  std::map<SetKey, std::vector<Term>> terms_memo_;
  std::set<SetKey> in_progress_;
  std::map<std::vector<SetKey>, BigInt> union_memo_;
};

struct Box {
  int min_x = 0, max_x = 0, min_y = 0, max_y = 0;
};

bool palm_fits(const DesignGraph& g, int max_grid) {
  bool first = true;
  Box b;
  for (const Node& n : g.nodes()) {
    if (!n.cell) continue;
    if (first) {
      b = {n.cell->x, n.cell->x, n.cell->y, n.cell->y};
      first = false;
    }
    b.min_x = std::min(b.min_x, n.cell->x);
    b.max_x = std::max(b.max_x, n.cell->x);
    b.min_y = std::min(b.min_y, n.cell->y);
    b.max_y = std::max(b.max_y, n.cell->y);
  }
  return b.max_x - b.min_x < max_grid && b.max_y - b.min_y < max_grid;
}

bool palm_closed(const RuleSet& rules, const DesignGraph& g) {
  for (const Node& n : g.nodes()) {
    const Symbol& s = rules.symbol(n.symbol);
    if (s.layer == Layer::Palm && !s.terminal()) return false;
  }
  return true;
}

}  // namespace

BigInt count_fingers(const RuleSet& rules, std::string_view knuckle_symbol, int max_segments, bool* exact) {
  if (max_segments < 0) throw std::invalid_argument("max_segments must be non-negative");
  FingerCounter counter(rules);
  const int knuckle = counter.intern(std::string(knuckle_symbol), std::nullopt, {}, "");
  // Both counts include the bare knuckle; the difference drops it together
  // with the fingers that have no segment at all.
  BigInt fingers = counter.count(knuckle, max_segments) - counter.count(knuckle, 0);
  if (exact) *exact = counter.exact();
  return fingers;
}

BigInt hand_lower_bound(const BigInt& fingers_per_slot, int slots) {
  if (slots < 0) throw std::invalid_argument("slots must be non-negative");
  return boost::multiprecision::pow(fingers_per_slot, static_cast<unsigned>(slots));
}

EnumerationResult enumerate_designs(const RuleSet& rules, const EnumerationLimits& limits) {
  EnumerationResult result;
  FingerCounter counter(rules);
  std::map<std::string, BigInt> per_knuckle;
  auto fingers_for = [&](const std::string& symbol) -> const BigInt& {
    auto it = per_knuckle.find(symbol);
    if (it == per_knuckle.end()) {
      const int id = counter.intern(symbol, std::nullopt, {}, "");
      it = per_knuckle.emplace(symbol, counter.count(id, limits.max_finger_segments) - counter.count(id, 0)).first;
    }
    return it->second;
  };

  // Breadth-first over palm derivations; each closed palm is counted once.
  std::unordered_set<std::uint64_t> seen;
  std::vector<DesignGraph> frontier{new_design(rules)};
  seen.insert(canonical_hash(frontier.front()));
  std::size_t visited = 0;
  while (!frontier.empty()) {
    std::vector<DesignGraph> next;
    for (const DesignGraph& palm : frontier) {
      if (++visited > limits.max_palm_states) {
        result.exact = false;
        result.note = "palm search stopped after " + std::to_string(limits.max_palm_states) + " states";
        break;
      }
      if (palm_closed(rules, palm)) {
        ++result.palm_count;
        const DesignGraph ready = handoff(rules, palm);
        // Truncated product of (1 + f x) over the free knuckles.
        std::vector<BigInt> poly(static_cast<std::size_t>(limits.max_fingers) + 1, 0);
        poly[0] = 1;
        for (NodeId kn : free_knuckles(rules, ready)) {
          const BigInt& f = fingers_for(ready.node(kn).symbol);
          for (std::size_t d = poly.size(); d-- > 1;) poly[d] += poly[d - 1] * f;
        }
        BigInt hands = 0;
        for (const auto& c : poly) hands += c;
        // Other finger-layer nonterminals on the palm (the hub) close independently.
        for (const Node& n : ready.nodes()) {
          const Symbol& s = rules.symbol(n.symbol);
          if (s.layer == Layer::Finger && !s.terminal()) {
            const auto parent = ready.parent(n.id);
            hands *= counter.count(counter.intern(n.symbol, n.k, {}, parent ? ready.node(*parent).symbol : ""), 1);
          }
        }
        result.count += hands;
      }
      for (const auto& app : applicable_rules(rules, palm)) {
        DesignGraph child = apply_rule(rules, palm, app);
        if (!palm_fits(child, limits.max_grid)) continue;
        if (seen.insert(canonical_hash(child)).second) next.push_back(std::move(child));
      }
    }
    if (!result.exact) break;
    frontier = std::move(next);
  }

  for (const auto& s : rules.symbols()) {
    if (!s.has_tag("knuckle")) continue;
    result.fingers_per_slot = fingers_for(s.name);
    break;
  }
  if (!counter.exact()) result.exact = false;
  if (limits.cap && result.count > *limits.cap) {
    result.count = *limits.cap;
    result.capped = true;
  }
  if (result.note.empty())
    result.note = std::to_string(result.palm_count) + " palms, " + result.fingers_per_slot.str() + " fingers per slot";
  return result;
}

struct DesignStream::Impl {
  const RuleSet& rules;
  EnumerationLimits limits;
  std::vector<DesignGraph> stack;
  std::unordered_set<std::uint64_t> visited;
  std::unordered_set<std::uint64_t> yielded;
  std::map<std::string, bool> committed_segment;

  Impl(const RuleSet& r, EnumerationLimits l) : rules(r), limits(std::move(l)) {
    stack.push_back(new_design(rules));
    visited.insert(canonical_hash(stack.back()));
    for (const auto& s : rules.symbols()) {
      if (s.terminal()) continue;
      bool all = true;
      bool any = false;
      for (const auto& t : rules.nonleaf_closure(s.name)) {
        if (!rules.symbol(t).terminal()) continue;
        any = true;
        all = all && rules.symbol(t).has_tag("segment");
      }
      committed_segment[s.name] = any && all;
    }
  }

  bool counts_as_segment(const DesignGraph& g, const Node& n) const {
    const Symbol& s = rules.symbol(n.symbol);
    if (s.terminal()) return s.has_tag("segment");
    return g.child_count(n.id) > 0 && committed_segment.at(n.symbol);
  }

  // Largest segment count on a path below `id`, inclusive.
  int depth(const DesignGraph& g, NodeId id) const {
    int best = 0;
    for (const Edge* e : g.child_edges(id)) best = std::max(best, depth(g, e->to));
    return best + (counts_as_segment(g, g.node(id)) ? 1 : 0);
  }

  bool within_limits(const DesignGraph& g) const {
    if (!palm_fits(g, limits.max_grid)) return false;
    if (finger_count(rules, g) > static_cast<std::size_t>(limits.max_fingers)) return false;
    for (const Node& n : g.nodes()) {
      if (!rules.symbol(n.symbol).has_tag("knuckle")) continue;
      for (const Edge* e : g.child_edges(n.id))
        if (depth(g, e->to) > limits.max_finger_segments) return false;
    }
    return true;
  }

  bool fingers_have_segments(const DesignGraph& g) const {
    for (const Node& n : g.nodes()) {
      if (!rules.symbol(n.symbol).has_tag("knuckle")) continue;
      for (const Edge* e : g.child_edges(n.id))
        if (depth(g, e->to) == 0) return false;
    }
    return true;
  }

  // Rules on different nonterminals commute, so one open node at a time
  // suffices: the lowest-id nonterminal, ignoring hubs, which close on their own.
  std::optional<NodeId> focus(const DesignGraph& g) const {
    for (const Node& n : g.nodes()) {
      const Symbol& s = rules.symbol(n.symbol);
      if (!s.terminal() && !s.has_tag("hub")) return n.id;
    }
    return std::nullopt;
  }

  void push(DesignGraph g) {
    if (!within_limits(g)) return;
    if (visited.insert(canonical_hash(g)).second) stack.push_back(std::move(g));
  }

  std::optional<DesignGraph> next() {
    while (!stack.empty()) {
      DesignGraph g = std::move(stack.back());
      stack.pop_back();
      const auto open = focus(g);
      for (const auto& app : applicable_rules(rules, g)) {
        // Starts on terminal anchors stay available: a design with no open
        // nonterminal is finished, so they cannot wait for the focus.
        if (open && app.anchor != *open && !rules.symbol(g.node(app.anchor).symbol).terminal()) continue;
        push(apply_rule(rules, g, app));
      }
      if (can_handoff(rules, g)) push(handoff(rules, g));
      if (is_complete(rules, g) && fingers_have_segments(g)) {
        if (yielded.insert(fnv1a64(canonical_subtree(g, DesignGraph::root()))).second) return g;
      }
    }
    return std::nullopt;
  }
};

DesignStream::DesignStream(const RuleSet& rules, EnumerationLimits limits)
    : impl_(std::make_unique<Impl>(rules, std::move(limits))) {}
DesignStream::~DesignStream() = default;
DesignStream::DesignStream(DesignStream&&) noexcept = default;
DesignStream& DesignStream::operator=(DesignStream&&) noexcept = default;

std::optional<DesignGraph> DesignStream::next() { return impl_->next(); }

}  // namespace forge::grammar
