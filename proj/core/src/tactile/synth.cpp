#include "forge/tactile/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

namespace forge::tactile {

namespace {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// uniforms and normals are derived by hand to keep traces identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double normal() {
    if (spare_) {
      const double s = *spare_;
      spare_.reset();
      return s;
    }
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2 * std::log(u1));
    spare_ = r * std::sin(2 * std::numbers::pi * u2);
    return r * std::cos(2 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  std::optional<double> spare_;
};

}  // namespace

std::vector<SensorFrame> synthesize(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.patches.empty() || spec.taxels_per_patch < 1) throw TraceError("synthetic trace needs patches and taxels");
  Rng rng(seed);
  struct Taxel {
    std::string id;
    std::string patch;
    double baseline;
    double gain;
  };
  std::vector<Taxel> taxels;
  for (const auto& p : spec.patches)
    for (int i = 0; i < spec.taxels_per_patch; ++i) {
      const double b = spec.baseline_lo + (spec.baseline_hi - spec.baseline_lo) * rng.uniform();
      const double g = i == 0 ? 1.0 : 0.3 + 0.7 * rng.uniform();
      taxels.push_back({p + ":" + std::to_string(i), p, b, g});
    }
  for (const auto& r : spec.ramps)
    if (std::find(spec.patches.begin(), spec.patches.end(), r.patch) == spec.patches.end())
      throw TraceError("ramp names unknown patch '" + r.patch + "'");

  std::vector<SensorFrame> out(spec.frames);
  for (std::size_t s = 0; s < spec.frames; ++s) {
    auto& f = out[s];
    f.step = static_cast<long>(s);
    for (const auto& t : taxels) {
      double signal = 0;
      for (const auto& r : spec.ramps)
        if (r.patch == t.patch && f.step >= r.start)
          signal += std::min(r.peak, r.slope * static_cast<double>(f.step - r.start + 1));
      f.readings[t.id] = t.baseline + t.gain * signal + spec.noise * rng.normal();
    }
    for (const auto& e : spec.events)
      if (e.step == f.step) f.events.insert(e.name);
  }
  return out;
}

std::vector<std::string> synth_presets() { return {"empty", "flat", "full", "hard", "paper", "ramp", "tighten"}; }

SynthSpec synth_preset(const std::string& name) {
  SynthSpec s;
  if (name == "ramp") {
    s.patches = {"f0", "f1", "f2", "f3"};
    s.frames = 90;
    s.ramps = {{"f0", 20, 0.030, 1.0}, {"f1", 20, 0.025, 1.0}, {"f2", 20, 0.020, 1.0}, {"f3", 20, 0.006, 0.4}};
  } else if (name == "tighten") {
    s.patches = {"f0"};
    s.frames = 160;
    s.ramps = {{"f0", 20, 0.006, 1.0}};
  } else if (name == "full" || name == "empty") {
    const double load = name == "full" ? 0.8 : 0.15;
    s.patches = {"f0", "f1", "f2"};
    s.frames = 60;
    s.ramps = {{"f1", 16, 0.2, load}, {"f2", 16, 0.2, load}, {"f0", 16, 0.05, 0.1}};
    if (name == "full") s.events = {{36, "unscrewed"}};
  } else if (name == "paper" || name == "hard") {
    s.patches = {"f0", "f1", "f2"};
    s.frames = 60;
    s.events = {{18, "placed"}};
    s.ramps = {{"f1", 20, 0.1, 0.3}, {"f2", 20, 0.1, 0.3}};
    s.ramps.push_back(name == "paper" ? SynthSpec::Ramp{"f0", 25, 0.02, 0.25} : SynthSpec::Ramp{"f0", 25, 0.15, 1.2});
  } else if (name == "flat") {
    s.patches = {"f0", "f1", "f2", "f3"};
    s.frames = 40;
  } else {
    throw TraceError("unknown synthetic trace '" + name + "'");
  }
  return s;
}

std::vector<SensorFrame> open_trace(const std::string& source, std::uint64_t seed) {
  if (source.rfind("synth:", 0) == 0) return synthesize(synth_preset(source.substr(6)), seed);
  return read_trace_csv(source);
}

std::vector<SensorFrame> scale_trace(std::vector<SensorFrame> frames, double k) {
  if (!(k > 0)) throw TraceError("trace scale must be positive");
  for (auto& f : frames)
    for (auto& [_, v] : f.readings) v *= k;
  return frames;
}

}  // namespace forge::tactile
