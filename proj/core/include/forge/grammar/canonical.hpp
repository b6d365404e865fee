#pragma once

#include <cstdint>
#include <string>

#include "forge/grammar/design_graph.hpp"

namespace forge::grammar {

/// Canonical encoding of the rooted assembly tree. Node ids and insertion
/// order do not matter; symbols, k, phase, and port labels do. Children are
/// ordered by (parent port, encoding), which is exact because a parent never
/// uses the same port twice.
std::string canonical_form(const DesignGraph& design);

/// Canonical encoding of the subtree below `node` (including it).
std::string canonical_subtree(const DesignGraph& design, NodeId node);

std::uint64_t canonical_hash(const DesignGraph& design);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace forge::grammar
