#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace forge::grammar {

using NodeId = std::uint32_t;

/// Integer cell of the planar palm grid. x grows east, y grows north.
struct GridCell {
  int x = 0;
  int y = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

enum class Phase { Palm, Finger, Finished };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);

struct Node {
  NodeId id = 0;
  std::string symbol;
  std::optional<int> k;
  std::optional<GridCell> cell;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Connection from a parent node's port to a child node's port. `roll` is the
/// number of quarter turns of the child about the mating-face normal.
struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  std::string port_from;
  std::string port_to;
  int roll = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Tree-structured assembly graph. Node ids are dense and stable: node i is
/// stored at index i, and ids are never reused because no rule deletes nodes.
/// Node 0 is the wrist/start node.
class DesignGraph {
 public:
  DesignGraph() = default;

  static DesignGraph with_root(std::string symbol, std::optional<int> k, GridCell cell);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }
  Phase phase() const { return phase_; }
  void set_phase(Phase phase) { phase_ = phase; }

  static constexpr NodeId root() { return 0; }
  bool contains(NodeId id) const { return id < nodes_.size(); }
  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  /// Parent edge of `id`, or nullptr for the root.
  const Edge* parent_edge(NodeId id) const;
  std::optional<NodeId> parent(NodeId id) const;
  /// Edges leaving `id`, in insertion order.
  std::vector<const Edge*> child_edges(NodeId id) const;
  std::size_t child_count(NodeId id) const;
  const Edge* child_on_port(NodeId id, std::string_view port) const;

  std::optional<NodeId> node_at(GridCell cell) const;

  NodeId add_node(std::string symbol, std::optional<int> k, std::optional<GridCell> cell);
  void add_edge(Edge edge);

  /// Throws std::logic_error describing the first violated invariant.
  void check_invariants() const;

  friend bool operator==(const DesignGraph& a, const DesignGraph& b) {
    return a.phase_ == b.phase_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::optional<std::size_t>> parent_edge_;
  std::vector<std::vector<std::size_t>> child_edges_;
  Phase phase_ = Phase::Palm;
};

/// Structural hash of every field, including ids. Used to check purity.
std::uint64_t structural_hash(const DesignGraph& design);

}  // namespace forge::grammar
