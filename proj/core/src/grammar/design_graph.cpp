#include "forge/grammar/design_graph.hpp"

#include <set>
#include <stdexcept>

#include "forge/grammar/canonical.hpp"

namespace forge::grammar {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Palm: return "palm";
    case Phase::Finger: return "finger";
    case Phase::Finished: return "finished";
  }
  return "palm";
}

Phase phase_from_string(std::string_view text) {
  if (text == "palm") return Phase::Palm;
  if (text == "finger") return Phase::Finger;
  if (text == "finished") return Phase::Finished;
  throw std::invalid_argument("unknown phase '" + std::string(text) + "'");
}

DesignGraph DesignGraph::with_root(std::string symbol, std::optional<int> k, GridCell cell) {
  DesignGraph g;
  g.add_node(std::move(symbol), k, cell);
  return g;
}

const Node& DesignGraph::node(NodeId id) const {
  if (!contains(id)) throw std::out_of_range("unknown node id " + std::to_string(id));
  return nodes_[id];
}

Node& DesignGraph::node(NodeId id) {
  if (!contains(id)) throw std::out_of_range("unknown node id " + std::to_string(id));
  return nodes_[id];
}

const Edge* DesignGraph::parent_edge(NodeId id) const {
  if (!contains(id) || !parent_edge_[id]) return nullptr;
  return &edges_[*parent_edge_[id]];
}

std::optional<NodeId> DesignGraph::parent(NodeId id) const {
  const Edge* e = parent_edge(id);
  if (!e) return std::nullopt;
  return e->from;
}

std::vector<const Edge*> DesignGraph::child_edges(NodeId id) const {
  std::vector<const Edge*> out;
  if (!contains(id)) return out;
  out.reserve(child_edges_[id].size());
  for (std::size_t i : child_edges_[id]) out.push_back(&edges_[i]);
  return out;
}

std::size_t DesignGraph::child_count(NodeId id) const {
  return contains(id) ? child_edges_[id].size() : 0;
}

const Edge* DesignGraph::child_on_port(NodeId id, std::string_view port) const {
  if (!contains(id)) return nullptr;
  for (std::size_t i : child_edges_[id])
    if (edges_[i].port_from == port) return &edges_[i];
  return nullptr;
}

std::optional<NodeId> DesignGraph::node_at(GridCell cell) const {
  for (const Node& n : nodes_)
    if (n.cell && *n.cell == cell) return n.id;
  return std::nullopt;
}

NodeId DesignGraph::add_node(std::string symbol, std::optional<int> k, std::optional<GridCell> cell) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{id, std::move(symbol), k, cell});
  parent_edge_.emplace_back();
  child_edges_.emplace_back();
  return id;
}

void DesignGraph::add_edge(Edge edge) {
  if (!contains(edge.from) || !contains(edge.to))
    throw std::out_of_range("edge references unknown node");
  if (parent_edge_[edge.to])
    throw std::logic_error("node " + std::to_string(edge.to) + " already has a parent");
  const std::size_t index = edges_.size();
  parent_edge_[edge.to] = index;
  child_edges_[edge.from].push_back(index);
  edges_.push_back(std::move(edge));
}

void DesignGraph::check_invariants() const {
  if (nodes_.empty()) throw std::logic_error("design has no nodes");
  if (edges_.size() + 1 != nodes_.size())
    throw std::logic_error("edge count must be node count - 1 for a tree");
  for (const Node& n : nodes_) {
    if (n.id != 0 && !parent_edge_[n.id])
      throw std::logic_error("node " + std::to_string(n.id) + " is disconnected");
    if (n.k && *n.k < 0) throw std::logic_error("node " + std::to_string(n.id) + " has negative k");
  }
  if (parent_edge_[0]) throw std::logic_error("wrist node has a parent");

  // Reachability from the root rules out cycles given one parent per node.
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeId> stack{0};
  std::size_t visited = 0;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (seen[id]) throw std::logic_error("cycle through node " + std::to_string(id));
    seen[id] = true;
    ++visited;
    std::set<std::string> ports;
    for (std::size_t i : child_edges_[id]) {
      if (!ports.insert(edges_[i].port_from).second)
        throw std::logic_error("node " + std::to_string(id) + " uses port " + edges_[i].port_from + " twice");
      stack.push_back(edges_[i].to);
    }
  }
  if (visited != nodes_.size()) throw std::logic_error("design is not connected");

  std::set<GridCell> cells;
  for (const Node& n : nodes_)
    if (n.cell && !cells.insert(*n.cell).second)
      throw std::logic_error("two palm nodes occupy cell (" + std::to_string(n.cell->x) + "," +
                             std::to_string(n.cell->y) + ")");
}

std::uint64_t structural_hash(const DesignGraph& design) {
  std::string buf;
  buf += to_string(design.phase());
  for (const Node& n : design.nodes()) {
    buf += "|n" + std::to_string(n.id) + ":" + n.symbol;
    if (n.k) buf += "k" + std::to_string(*n.k);
    if (n.cell) buf += "@" + std::to_string(n.cell->x) + "," + std::to_string(n.cell->y);
  }
  for (const Edge& e : design.edges())
    buf += "|e" + std::to_string(e.from) + ">" + std::to_string(e.to) + ":" + e.port_from + ">" + e.port_to +
           "r" + std::to_string(e.roll);
  return fnv1a64(buf);
}

}  // namespace forge::grammar
