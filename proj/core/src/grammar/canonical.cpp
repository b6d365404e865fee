#include "forge/grammar/canonical.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace forge::grammar {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string encode(const DesignGraph& g, NodeId id) {
  const Node& n = g.node(id);
  std::string out = n.symbol;
  if (n.k) out += "#" + std::to_string(*n.k);
  auto kids = g.child_edges(id);
  if (kids.empty()) return out;
  std::vector<std::pair<std::string, std::string>> parts;
  parts.reserve(kids.size());
  for (const Edge* e : kids) {
    std::string label = e->port_from + ">" + e->port_to;
    if (e->roll != 0) label += "@" + std::to_string(e->roll);
    parts.emplace_back(std::move(label), encode(g, e->to));
  }
  std::sort(parts.begin(), parts.end());
  out += "(";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i].first + ":" + parts[i].second;
  }
  out += ")";
  return out;
}

}  // namespace

std::string canonical_subtree(const DesignGraph& design, NodeId node) { return encode(design, node); }

std::string canonical_form(const DesignGraph& design) {
  if (design.size() == 0) return std::string(to_string(design.phase())) + "|";
  return std::string(to_string(design.phase())) + "|" + encode(design, DesignGraph::root());
}

std::uint64_t canonical_hash(const DesignGraph& design) { return fnv1a64(canonical_form(design)); }

}  // namespace forge::grammar
