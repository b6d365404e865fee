#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "forge/geometry/transform.hpp"
#include "forge/grammar/ruleset.hpp"
#include "forge/meshkit/mesh.hpp"

namespace forge::meshkit {

class LibraryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PortSpec {
  geometry::PortFrame frame;
  /// Shell of the print mesh that carries this port; parts fuse through it.
  int shell = 0;
};

enum class CageClass { Free, Joint };

/// The three meshes of one grammar component plus its connection faces, all in
/// component-local millimetres. Finger components run proximal (z = 0) to
/// distal along +z.
struct ComponentBundle {
  std::string symbol;
  TriMesh print;
  geometry::Box cage;
  /// Eight corners in cage corner order, six outward quads.
  PolyMesh knit;
  std::vector<PortSpec> ports;
  CageClass cage_class = CageClass::Free;
  /// Pin axis (0 = x, 1 = y, 2 = z) of a joint; -1 otherwise.
  int pin_axis = -1;

  int shell_count() const;
  const PortSpec* find_port(std::string_view name) const;
  const PortSpec& port(std::string_view name) const;
};

/// (parent symbol, parent port) may receive (child symbol, child port).
struct Connection {
  std::string parent_symbol;
  std::string parent_port;
  std::string child_symbol;
  std::string child_port;
  int roll = 0;

  auto operator<=>(const Connection&) const = default;
};

/// Every connection some derivation of `rules` can produce, with nodes taken
/// at any label they can reach.
std::vector<Connection> connectable_pairs(const grammar::RuleSet& rules);

class ComponentLibrary {
 public:
  /// Validates; throws LibraryError naming the offending bundle.
  ComponentLibrary(std::vector<ComponentBundle> bundles, const grammar::RuleSet& rules);
  /// Skips validation; for fault-injection tests and tooling.
  static ComponentLibrary unvalidated(std::vector<ComponentBundle> bundles);

  const ComponentBundle& bundle(std::string_view symbol) const;
  bool has(std::string_view symbol) const { return bundles_.count(std::string(symbol)) != 0; }
  const std::map<std::string, ComponentBundle, std::less<>>& bundles() const { return bundles_; }

 private:
  ComponentLibrary() = default;
  std::map<std::string, ComponentBundle, std::less<>> bundles_;
};

/// One subdirectory per declared symbol holding print.mesh, cage.mesh,
/// knit.mesh and ports.txt.
ComponentLibrary load_component_library(const std::filesystem::path& directory, const grammar::RuleSet& rules);

ComponentBundle read_bundle(const std::filesystem::path& directory, const std::string& symbol);
void write_bundle(const ComponentBundle& bundle, const std::filesystem::path& directory);

/// Parametric boxes and pin cylinders for the thirteen default symbols.
std::vector<ComponentBundle> placeholder_bundles();
void write_placeholder_library(const std::filesystem::path& directory);

/// Checks every bundle invariant against `rules`; throws LibraryError.
void validate_bundles(const std::map<std::string, ComponentBundle, std::less<>>& bundles, const grammar::RuleSet& rules);

}  // namespace forge::meshkit
