#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "forge/deform/cage.hpp"
#include "forge/grammar/engine.hpp"
#include "forge/meshkit/library.hpp"
#include "forge/service/session.hpp"

// Test-side reference implementations. None of them call the code path they
// check; they share only the data types.
namespace forge::oracle {

std::filesystem::path test_data_dir();
std::filesystem::path golden_dir();

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Rooted-tree encoding from symbols and port labels only.
std::string tree_form(const grammar::DesignGraph& design);

struct BruteLimits {
  int max_segments = 3;
  int max_grid = 3;
  int max_fingers = 6;
};

/// Exhaustive derivation search: every applicable rule at every node, in
/// every order, deduplicated by tree_form. Counts complete designs whose
/// fingers each carry 1..max_segments segment nodes.
std::size_t brute_force_designs(const grammar::RuleSet& rules, const BruteLimits& limits);

struct StlTriangle {
  std::array<float, 3> normal;
  std::array<std::array<float, 3>, 3> v;
};

struct StlFile {
  std::string header;
  std::vector<StlTriangle> triangles;
  std::vector<std::uint16_t> attributes;
};

/// Minimal binary STL reader; throws std::runtime_error on size mismatch.
StlFile read_stl(const std::string& bytes);

/// Product-of-linear-hats weight of `corner` (bit 0 = +x, bit 1 = +y,
/// bit 2 = +z) at parameter (u, v, w).
double hat_weight(int corner, double u, double v, double w);

/// Union-find over (node, shell) pairs joined through mated ports.
std::size_t part_groups_by_walk(const grammar::DesignGraph& design, const meshkit::ComponentLibrary& library);

/// CAST_ON + one op per face + one TURN per course boundary + BIND_OFF.
std::size_t expected_instruction_count(const std::vector<std::size_t>& course_sizes);

/// Stitch count per course from perimeter rounding.
std::vector<int> expected_course_counts(const std::vector<double>& perimeters, double wale_gauge);

/// Cage vertex ids two cells have in common.
std::vector<deform::VertexId> shared_vertices(const deform::CageAssembly& a, std::size_t c0, std::size_t c1);

/// Largest distance between the two cell maps of a design edge, sampled at
/// `samples` random rest points per shared face. Throws if an edge does not
/// share exactly four vertices.
double max_continuity_gap(const deform::CageAssembly& a, const grammar::DesignGraph& g, std::mt19937_64& rng, int samples);

// Egg fixtures built from the bundled script and presets.
std::shared_ptr<const service::Workspace> default_workspace();
service::DesignSession egg_session();
void apply_egg_deform(service::DesignSession& s);
void apply_egg_sensors(service::DesignSession& s);

}  // namespace forge::oracle
