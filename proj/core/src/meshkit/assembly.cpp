#include "forge/meshkit/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace forge::meshkit {

using grammar::DesignGraph;
using grammar::NodeId;

std::vector<geometry::Transform> place_design(const DesignGraph& design, const ComponentLibrary& library) {
  std::vector<geometry::Transform> out(design.size());
  for (NodeId id = 1; id < design.size(); ++id) {
    const grammar::Edge* e = design.parent_edge(id);
    if (!e) throw std::logic_error("node " + std::to_string(id) + " has no parent");
    if (e->from >= id) throw std::logic_error("node " + std::to_string(id) + " is placed before its parent");
    const auto& parent = library.bundle(design.node(e->from).symbol).port(e->port_from).frame;
    const auto& child = library.bundle(design.node(id).symbol).port(e->port_to).frame;
    out[id] = geometry::mate(parent.transformed(out[e->from]), child, e->roll);
  }
  return out;
}

std::vector<TriMesh> placed_print_meshes(const DesignGraph& design, const ComponentLibrary& library,
                                         const std::vector<geometry::Transform>& placement) {
  std::vector<TriMesh> out;
  out.reserve(design.size());
  for (const auto& n : design.nodes()) {
    TriMesh m = library.bundle(n.symbol).print;
    m.transform(placement.at(n.id));
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

// (node, shell) slots and the groups they fall into, in slot order.
struct PartMap {
  std::vector<std::size_t> offset;
  std::vector<std::pair<NodeId, int>> slots;
  std::vector<std::vector<std::size_t>> groups;
};

PartMap part_map(const DesignGraph& design, const ComponentLibrary& library) {
  PartMap pm;
  for (const auto& n : design.nodes()) {
    pm.offset.push_back(pm.slots.size());
    const int shells = std::max(1, library.bundle(n.symbol).shell_count());
    for (int s = 0; s < shells; ++s) pm.slots.emplace_back(n.id, s);
  }
  DisjointSets ds(pm.slots.size());
  for (const auto& e : design.edges()) {
    const int a = library.bundle(design.node(e.from).symbol).port(e.port_from).shell;
    const int b = library.bundle(design.node(e.to).symbol).port(e.port_to).shell;
    ds.unite(pm.offset[e.from] + static_cast<std::size_t>(a), pm.offset[e.to] + static_cast<std::size_t>(b));
  }
  std::unordered_map<std::size_t, std::size_t> group_of;
  for (std::size_t i = 0; i < pm.slots.size(); ++i) {
    auto [it, fresh] = group_of.try_emplace(ds.find(i), pm.groups.size());
    if (fresh) pm.groups.emplace_back();
    pm.groups[it->second].push_back(i);
  }
  return pm;
}

struct Cap {
  std::vector<std::size_t> triangles;
  std::vector<Vec3> points;
  Vec3 centroid = Vec3::Zero();
};

bool caps_coincide(const Cap& a, const Cap& b, double tol) {
  if (a.points.size() != b.points.size() || (a.centroid - b.centroid).norm() > tol) return false;
  std::vector<bool> used(b.points.size(), false);
  for (const auto& p : a.points) {
    bool hit = false;
    for (std::size_t j = 0; j < b.points.size() && !hit; ++j) {
      if (!used[j] && (p - b.points[j]).norm() <= tol) used[j] = hit = true;
    }
    if (!hit) return false;
  }
  return true;
}

TriMesh compact(const TriMesh& mesh) {
  std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
  TriMesh out;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    std::array<std::uint32_t, 3> t{};
    for (int k = 0; k < 3; ++k) {
      auto& r = remap[mesh.triangles[i][k]];
      if (r < 0) {
        r = static_cast<std::int64_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[mesh.triangles[i][k]]);
      }
      t[k] = static_cast<std::uint32_t>(r);
    }
    out.add_triangle(t[0], t[1], t[2], mesh.shell[i], mesh.port[i]);
  }
  return out;
}

}  // namespace

TriMesh weld_vertices(const TriMesh& mesh, double tol) {
  struct CellHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
      return static_cast<std::size_t>(c[0] * 73856093LL ^ c[1] * 19349663LL ^ c[2] * 83492791LL);
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>, CellHash> grid;
  auto cell_of = [&](const Vec3& p) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / tol)),
                                       static_cast<std::int64_t>(std::floor(p.y() / tol)),
                                       static_cast<std::int64_t>(std::floor(p.z() / tol))};
  };
  TriMesh out;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& p = mesh.vertices[i];
    const auto c = cell_of(p);
    std::optional<std::uint32_t> hit;
    for (int dx = -1; dx <= 1 && !hit; ++dx)
      for (int dy = -1; dy <= 1 && !hit; ++dy)
        for (int dz = -1; dz <= 1 && !hit; ++dz) {
          auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == grid.end()) continue;
          for (auto idx : it->second)
            if ((out.vertices[idx] - p).norm() <= tol) {
              hit = idx;
              break;
            }
        }
    if (!hit) {
      hit = static_cast<std::uint32_t>(out.vertices.size());
      out.vertices.push_back(p);
      grid[c].push_back(*hit);
    }
    remap[i] = *hit;
  }
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto& t = mesh.triangles[i];
    out.add_triangle(remap[t[0]], remap[t[1]], remap[t[2]], mesh.shell[i], mesh.port[i]);
  }
  return out;
}

std::vector<PrintablePart> merge_printable_parts(const DesignGraph& design, const ComponentLibrary& library,
                                                 const std::vector<TriMesh>& print_meshes) {
  if (print_meshes.size() != design.size())
    throw MeshError("expected " + std::to_string(design.size()) + " print meshes, got " + std::to_string(print_meshes.size()));
  constexpr double kWeld = 1e-6;
  const PartMap pm = part_map(design, library);
  std::vector<PrintablePart> parts;
  for (const auto& group : pm.groups) {
    PrintablePart part;
    TriMesh& m = part.mesh;
    std::vector<Cap> caps;
    for (std::size_t slot : group) {
      const auto [node, shell] = pm.slots[slot];
      if (part.source_nodes.empty() || part.source_nodes.back() != node) part.source_nodes.push_back(node);
      const TriMesh& src = print_meshes[node];
      const auto base = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.insert(m.vertices.end(), src.vertices.begin(), src.vertices.end());
      std::unordered_map<std::string, std::size_t> cap_index;
      for (std::size_t i = 0; i < src.size(); ++i) {
        if (src.shell[i] != shell) continue;
        const auto& t = src.triangles[i];
        if (!src.port[i].empty()) {
          auto [it, fresh] = cap_index.try_emplace(src.port[i], caps.size());
          if (fresh) caps.emplace_back();
          caps[it->second].triangles.push_back(m.size());
        }
        m.add_triangle(base + t[0], base + t[1], base + t[2], src.shell[i], src.port[i]);
      }
    }
    for (auto& cap : caps) {
      std::vector<std::uint32_t> idx;
      for (auto t : cap.triangles) idx.insert(idx.end(), m.triangles[t].begin(), m.triangles[t].end());
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      for (auto i : idx) cap.points.push_back(m.vertices[i]);
      for (const auto& p : cap.points) cap.centroid += p;
      cap.centroid /= static_cast<double>(cap.points.size());
    }
    std::vector<bool> drop(m.size(), false);
    std::vector<bool> matched(caps.size(), false);
    for (std::size_t a = 0; a < caps.size(); ++a) {
      if (matched[a]) continue;
      for (std::size_t b = a + 1; b < caps.size(); ++b) {
        if (matched[b] || !caps_coincide(caps[a], caps[b], kWeld)) continue;
        matched[a] = matched[b] = true;
        for (auto t : caps[a].triangles) drop[t] = true;
        for (auto t : caps[b].triangles) drop[t] = true;
        break;
      }
    }
    TriMesh kept;
    kept.vertices = std::move(m.vertices);
    for (std::size_t i = 0; i < drop.size(); ++i)
      if (!drop[i]) kept.add_triangle(m.triangles[i][0], m.triangles[i][1], m.triangles[i][2], m.shell[i], m.port[i]);
    part.mesh = compact(weld_vertices(kept, kWeld));
    const auto report = check_watertight(part.mesh);
    if (!report.is_watertight) {
      std::string nodes;
      for (auto n : part.source_nodes) nodes += (nodes.empty() ? "" : ",") + std::to_string(n);
      throw MeshError("part of nodes {" + nodes + "} does not close: " + std::to_string(report.boundary_edge_count) +
                      " boundary and " + std::to_string(report.nonmanifold_edge_count) +
                      " non-manifold edges (non-coincident boundary loops)");
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

std::size_t count_part_groups(const DesignGraph& design, const ComponentLibrary& library) {
  return part_map(design, library).groups.size();
}

}  // namespace forge::meshkit
