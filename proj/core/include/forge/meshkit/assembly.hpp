#pragma once

#include <vector>

#include "forge/grammar/design_graph.hpp"
#include "forge/meshkit/library.hpp"

namespace forge::meshkit {

/// World placement of every node (index = node id). The root sits at the
/// origin; every other node is mated onto its parent's port.
std::vector<geometry::Transform> place_design(const grammar::DesignGraph& design, const ComponentLibrary& library);

/// Rest-pose print mesh of every node in world coordinates.
std::vector<TriMesh> placed_print_meshes(const grammar::DesignGraph& design, const ComponentLibrary& library,
                                         const std::vector<geometry::Transform>& placement);

struct PrintablePart {
  TriMesh mesh;
  std::vector<grammar::NodeId> source_nodes;
};

/// Fuses node shells joined through ports into physical parts. A port fuses
/// the parent and child shells that own it; the joint pin shell stays alone.
/// Coincident port caps inside a part are dropped and the remaining surfaces
/// welded (1e-6 mm). Throws MeshError when a fused part is not watertight.
std::vector<PrintablePart> merge_printable_parts(const grammar::DesignGraph& design, const ComponentLibrary& library,
                                                 const std::vector<TriMesh>& print_meshes);

/// Number of parts `merge_printable_parts` produces, from the graph alone.
std::size_t count_part_groups(const grammar::DesignGraph& design, const ComponentLibrary& library);

/// Merges vertices closer than `tol`, keeping first occurrences in order.
TriMesh weld_vertices(const TriMesh& mesh, double tol);

}  // namespace forge::meshkit
