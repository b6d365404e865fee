#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace forge::tactile {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw readings of one time step. Taxel ids are "<patch>:<index>"; events are
/// external signals (an object placed, a cap removed) seen at this step.
struct SensorFrame {
  long step = 0;
  std::map<std::string, double> readings;
  std::set<std::string> events;
};

struct ProcessedFrame {
  long step = 0;
  std::map<std::string, double> values;
  std::map<std::string, double> p_max;
  std::set<std::string> events;
};

std::string patch_of(const std::string& taxel_id);

/// value' = max(0, value - mean of the first `baseline_window` frames), and
/// p_max per patch. Every frame must carry the taxels of the first frame.
std::vector<ProcessedFrame> normalize_trace(const std::vector<SensorFrame>& raw, std::size_t baseline_window = 15);

// CSV with header "step,taxel_id,value"; rows with taxel_id "event:NAME"
// mark events. Steps must run 0, 1, 2, ... without gaps.
std::vector<SensorFrame> parse_trace_csv(std::string_view text);
std::vector<SensorFrame> read_trace_csv(const std::filesystem::path& path);
std::string format_trace_csv(const std::vector<SensorFrame>& frames);

}  // namespace forge::tactile
