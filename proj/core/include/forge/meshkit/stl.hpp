#pragma once

#include <filesystem>
#include <string>

#include "forge/meshkit/mesh.hpp"

namespace forge::meshkit {

inline constexpr std::string_view kStlHeader = "forge-stl 1.0";

/// Binary STL: 80-byte space-padded header, uint32 count, then per triangle a
/// recomputed unit normal, three vertices (float32, little endian) and a zero
/// attribute word. Triangles are sorted so equal meshes give equal bytes.
/// Throws MeshError unless the mesh is watertight.
std::string stl_bytes(const TriMesh& mesh);
void export_stl(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace forge::meshkit
