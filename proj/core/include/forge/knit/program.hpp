#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "forge/knit/stitch.hpp"

namespace forge::knit {

enum class Op { CastOn, Knit, Inc, Dec, SensorH, SensorV, Turn, BindOff };
std::string_view to_string(Op op);
Op op_from_string(std::string_view text);

enum class FiberLayer { Horizontal, Vertical };
std::string_view to_string(FiberLayer layer);

struct Instruction {
  Op op = Op::Knit;
  int course = 0;
  int wale = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct KnitProgram {
  FiberLayer layer = FiberLayer::Horizontal;
  std::string patch;
  Gauge gauge;
  std::vector<Instruction> instructions;
};

/// Serpentine traversal: even courses run wale 0 upward, odd courses back
/// down. CAST_ON carries the first course's stitch count, TURN the next
/// course, BIND_OFF the last course's count.
std::pair<KnitProgram, KnitProgram> trace_knit_path(const StitchMesh& mesh);

struct SensorMatrix {
  std::vector<int> h_lines;
  std::vector<int> v_lines;
  /// (course, wale) of every sensor face, row-major.
  std::vector<std::pair<int, int>> taxels;
  std::vector<std::uint32_t> faces;
};

SensorMatrix build_sensor_matrix(const StitchMesh& mesh);

// File layout: four header lines (forge-knit 1, gauge C W, layer L,
// patch ID) then one "OP course wale" line per instruction.
std::string format_knit_program(const KnitProgram& program);
KnitProgram parse_knit_program(std::string_view text);
void emit_knit_file(const KnitProgram& program, const std::filesystem::path& path);

}  // namespace forge::knit
