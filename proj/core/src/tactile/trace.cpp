#include "forge/tactile/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace forge::tactile {

std::string patch_of(const std::string& taxel_id) {
  const auto colon = taxel_id.find(':');
  if (colon == std::string::npos || colon == 0) throw TraceError("taxel id '" + taxel_id + "' lacks a patch prefix");
  return taxel_id.substr(0, colon);
}

std::vector<ProcessedFrame> normalize_trace(const std::vector<SensorFrame>& raw, std::size_t window) {
  if (window == 0) throw TraceError("baseline window must be positive");
  if (raw.size() < window)
    throw TraceError("trace has " + std::to_string(raw.size()) + " frames, fewer than the " + std::to_string(window) +
                     "-frame baseline window");
  std::map<std::string, double> baseline;
  for (const auto& [id, _] : raw.front().readings) baseline[id] = 0;
  for (const auto& f : raw) {
    for (const auto& [id, _] : baseline)
      if (!f.readings.count(id)) throw TraceError("frame " + std::to_string(f.step) + " is missing taxel " + id);
    for (const auto& [id, _] : f.readings)
      if (!baseline.count(id)) throw TraceError("frame " + std::to_string(f.step) + " has unknown taxel " + id);
  }
  for (std::size_t i = 0; i < window; ++i)
    for (auto& [id, sum] : baseline) sum += raw[i].readings.at(id);
  for (auto& [id, sum] : baseline) sum /= static_cast<double>(window);

  std::vector<ProcessedFrame> out;
  out.reserve(raw.size());
  std::set<std::string> seen;
  for (const auto& f : raw) {
    ProcessedFrame p;
    p.step = f.step;
    seen.insert(f.events.begin(), f.events.end());
    p.events = seen;
    for (const auto& [id, value] : f.readings) {
      const double v = std::max(0.0, value - baseline.at(id));
      p.values[id] = v;
      auto [it, fresh] = p.p_max.try_emplace(patch_of(id), v);
      if (!fresh) it->second = std::max(it->second, v);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<SensorFrame> parse_trace_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw TraceError("trace is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "step,taxel_id,value") throw TraceError("trace header must be 'step,taxel_id,value'");
  std::vector<SensorFrame> frames;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw TraceError("trace line " + std::to_string(line_no) + " needs three fields");
    long step = 0;
    double value = 0;
    try {
      std::size_t used = 0;
      step = std::stol(line.substr(0, c1), &used);
      if (used != c1) throw std::invalid_argument("");
      const std::string v = line.substr(c2 + 1);
      value = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw TraceError("trace line " + std::to_string(line_no) + " has a malformed number");
    }
    const std::string id = line.substr(c1 + 1, c2 - c1 - 1);
    if (step != static_cast<long>(frames.size()) - 1) {
      if (step != static_cast<long>(frames.size()))
        throw TraceError("trace line " + std::to_string(line_no) + ": steps must be consecutive from 0");
      frames.push_back({step, {}, {}});
    }
    if (id.rfind("event:", 0) == 0) {
      if (value != 0) frames.back().events.insert(id.substr(6));
    } else {
      patch_of(id);
      if (!frames.back().readings.emplace(id, value).second)
        throw TraceError("trace line " + std::to_string(line_no) + " repeats taxel " + id);
    }
  }
  return frames;
}

std::vector<SensorFrame> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace_csv(ss.str());
}

std::string format_trace_csv(const std::vector<SensorFrame>& frames) {
  std::string out = "step,taxel_id,value\n";
  char buf[64];
  for (const auto& f : frames) {
    for (const auto& [id, v] : f.readings) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += std::to_string(f.step) + "," + id + "," + buf + "\n";
    }
    for (const auto& e : f.events) out += std::to_string(f.step) + ",event:" + e + ",1\n";
  }
  return out;
}

}  // namespace forge::tactile
