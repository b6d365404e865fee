#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/tactile/trace.hpp"

namespace forge::tactile {

struct SynthSpec {
  std::vector<std::string> patches;
  int taxels_per_patch = 6;
  std::size_t frames = 80;
  double baseline_lo = 1.0;
  double baseline_hi = 2.0;
  double noise = 0.01;
  struct Ramp {
    std::string patch;
    long start = 0;
    double slope = 0;
    double peak = 0;
  };
  std::vector<Ramp> ramps;
  struct Event {
    long step = 0;
    std::string name;
  };
  std::vector<Event> events;
};

/// Per-taxel baseline, Gaussian noise, and a saturating ramp per patch scaled
/// by a per-taxel gain in [0.3, 1] (the first taxel of a patch has gain 1).
std::vector<SensorFrame> synthesize(const SynthSpec& spec, std::uint64_t seed);

std::vector<std::string> synth_presets();
/// Throws TraceError for an unknown preset.
SynthSpec synth_preset(const std::string& name);

/// "synth:NAME" uses the preset generator; anything else is a CSV path.
std::vector<SensorFrame> open_trace(const std::string& source, std::uint64_t seed);

/// Multiplies every reading by k.
std::vector<SensorFrame> scale_trace(std::vector<SensorFrame> frames, double k);

}  // namespace forge::tactile
