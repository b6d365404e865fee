#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include "forge/grammar/design_graph.hpp"
#include "forge/grammar/ruleset.hpp"

namespace forge::grammar {

using BigInt = boost::multiprecision::cpp_int;

struct EnumerationLimits {
  /// Shafts and hub blocks (symbols tagged "segment") on any knuckle-to-tip path.
  int max_finger_segments = 3;
  /// Palm cells must fit in a max_grid x max_grid box.
  int max_grid = 3;
  int max_fingers = 6;
  /// Above this the total is reported as a lower bound with `capped` set.
  std::optional<BigInt> cap;
  /// Palm search gives up (lower bound) after visiting this many palm states.
  std::size_t max_palm_states = 4'000'000;
};

struct EnumerationResult {
  /// Distinct complete designs under the limits.
  BigInt count;
  /// Distinct fingers (1..max_finger_segments segments) that one knuckle can carry.
  BigInt fingers_per_slot;
  std::size_t palm_count = 0;
  /// False when the counting engine had to fall back to a lower bound.
  bool exact = true;
  bool capped = false;
  std::string note;
};

EnumerationResult enumerate_designs(const RuleSet& rules, const EnumerationLimits& limits);

/// Distinct finger subtrees with 1..max_segments segments growable from one
/// free knuckle of `knuckle_symbol`. `exact` is cleared when a union could
/// not be counted exactly (the value is then a lower bound).
BigInt count_fingers(const RuleSet& rules, std::string_view knuckle_symbol, int max_segments,
                     bool* exact = nullptr);

/// Product of per-slot finger counts over `slots` independent knuckles.
BigInt hand_lower_bound(const BigInt& fingers_per_slot, int slots);

/// Streams distinct complete designs under the limits by derivation search,
/// one at a time. Only canonical hashes of visited states are retained.
/// Single consumer.
class DesignStream {
 public:
  DesignStream(const RuleSet& rules, EnumerationLimits limits);
  ~DesignStream();
  DesignStream(DesignStream&&) noexcept;
  DesignStream& operator=(DesignStream&&) noexcept;

  std::optional<DesignGraph> next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace forge::grammar
