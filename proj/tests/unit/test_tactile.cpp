#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "forge/data.hpp"
#include "forge/tactile/fsm.hpp"
#include "forge/tactile/synth.hpp"

using namespace forge;
using namespace forge::tactile;

namespace {

FsmSpec bundled(const std::string& name) { return FsmSpec::load(data_dir() / "fsm" / (name + ".fsm")); }

std::vector<ProcessedFrame> synth(const std::string& preset, std::uint64_t seed = 7) {
  return normalize_trace(open_trace("synth:" + preset, seed));
}

ProcessedFrame frame_with(long step, const std::map<std::string, double>& p_max) {
  ProcessedFrame f;
  f.step = step;
  f.p_max = p_max;
  return f;
}

std::vector<SensorFrame> random_trace(std::mt19937_64& rng, std::size_t frames, int taxels) {
  std::uniform_real_distribution<double> u(0.5, 3.0), bump(0.0, 2.0);
  std::vector<SensorFrame> out(frames);
  std::vector<double> base(static_cast<std::size_t>(taxels));
  for (auto& b : base) b = u(rng);
  for (std::size_t i = 0; i < frames; ++i) {
    out[i].step = static_cast<long>(i);
    for (int t = 0; t < taxels; ++t)
      out[i].readings["p" + std::to_string(t % 3) + ":" + std::to_string(t)] =
          base[static_cast<std::size_t>(t)] + (i < 15 ? 0.02 * (u(rng) - 1.75) : bump(rng));
  }
  return out;
}

// Baseline subtraction and per-patch max, recomputed without the library.
std::vector<std::map<std::string, double>> scan_p_max(const std::vector<SensorFrame>& raw, std::size_t window) {
  std::map<std::string, double> mean;
  for (std::size_t i = 0; i < window; ++i)
    for (const auto& [id, v] : raw[i].readings) mean[id] += v / static_cast<double>(window);
  std::vector<std::map<std::string, double>> out;
  for (const auto& f : raw) {
    std::map<std::string, double> pm;
    for (const auto& [id, v] : f.readings) {
      const auto patch = id.substr(0, id.find(':'));
      const double x = std::max(0.0, v - mean[id]);
      pm[patch] = pm.count(patch) ? std::max(pm[patch], x) : x;
    }
    out.push_back(pm);
  }
  return out;
}

std::vector<std::string> states_of(const TaskLog& log) { return log.states; }

}  // namespace

TEST(Normalize, ConstantTraceIsZero) {
  std::vector<SensorFrame> raw(20);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i].step = static_cast<long>(i);
    raw[i].readings = {{"f0:0", 1.7}, {"f0:1", 2.2}, {"f1:0", 0.4}};
  }
  for (const auto& f : normalize_trace(raw)) {
    for (const auto& [id, v] : f.values) EXPECT_NEAR(v, 0.0, 1e-12) << id;
    for (const auto& [p, v] : f.p_max) EXPECT_NEAR(v, 0.0, 1e-12) << p;
  }
}

TEST(Normalize, DropsBelowBaselineAndTakesPatchMax) {
  std::vector<SensorFrame> raw(16);
  for (std::size_t i = 0; i < 15; ++i) {
    raw[i].step = static_cast<long>(i);
    raw[i].readings = {{"f0:0", 1.0}, {"f0:1", 1.0}, {"f0:2", 1.0}};
  }
  raw[15].step = 15;
  raw[15].readings = {{"f0:0", 1.2}, {"f0:1", 1.7}, {"f0:2", 0.1}};
  const auto f = normalize_trace(raw).back();
  EXPECT_NEAR(f.values.at("f0:0"), 0.2, 1e-12);
  EXPECT_NEAR(f.values.at("f0:1"), 0.7, 1e-12);
  EXPECT_EQ(f.values.at("f0:2"), 0.0);
  EXPECT_NEAR(f.p_max.at("f0"), 0.7, 1e-12);
}

TEST(Normalize, RejectsShortOrRaggedTraces) {
  std::vector<SensorFrame> raw(5);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i].readings = {{"f0:0", 1.0}};
  EXPECT_THROW(normalize_trace(raw), TraceError);
  EXPECT_THROW(normalize_trace(raw, 0), TraceError);
  raw[3].readings = {{"f0:1", 1.0}};
  EXPECT_THROW(normalize_trace(raw, 2), TraceError);
  EXPECT_THROW(patch_of("nocolon"), TraceError);
}

TEST(Normalize, RandomTracesAgreeWithScan) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto raw = random_trace(rng, 40, 9);
    const auto got = normalize_trace(raw);
    const auto expect = scan_p_max(raw, 15);
    ASSERT_EQ(got.size(), raw.size());
    // Baseline frames average to zero before clipping.
    std::map<std::string, double> sum;
    for (std::size_t i = 0; i < 15; ++i)
      for (const auto& [id, v] : raw[i].readings) sum[id] += v;
    for (std::size_t i = 0; i < got.size(); ++i) {
      for (const auto& [id, v] : got[i].values) EXPECT_GE(v, 0.0);
      for (const auto& [p, v] : expect[i]) EXPECT_NEAR(got[i].p_max.at(p), v, 1e-12);
    }
    for (const auto& [id, s] : sum) {
      double centered = 0;
      for (std::size_t i = 0; i < 15; ++i) centered += raw[i].readings.at(id) - s / 15;
      EXPECT_NEAR(centered, 0.0, 1e-9);
    }
  }
}

TEST(TraceCsv, RoundTripAndErrors) {
  const auto raw = open_trace("synth:full", 3);
  const auto back = parse_trace_csv(format_trace_csv(raw));
  ASSERT_EQ(back.size(), raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_EQ(back[i].events, raw[i].events);
    for (const auto& [id, v] : raw[i].readings) EXPECT_NEAR(back[i].readings.at(id), v, 1e-9);
  }
  EXPECT_THROW(parse_trace_csv(""), TraceError);
  EXPECT_THROW(parse_trace_csv("a,b,c\n"), TraceError);
  EXPECT_THROW(parse_trace_csv("step,taxel_id,value\n1,f0:0,1\n"), TraceError);
  EXPECT_THROW(parse_trace_csv("step,taxel_id,value\n0,f0:0,x\n"), TraceError);
  EXPECT_THROW(open_trace("synth:nope", 1), TraceError);
}

TEST(EggFsm, TruthTableOverFingerPatterns) {
  const auto spec = bundled("egg");
  const double t = spec.thresholds.at("T");
  int shakes = 0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    std::map<std::string, double> pm;
    for (int i = 0; i < 4; ++i) pm["f" + std::to_string(i)] = (mask >> i) & 1 ? t : 0.9 * t;
    const auto r = step_fsm(spec, FsmRuntime::start(spec), frame_with(0, pm));
    const bool expect = std::popcount(mask) >= 3;
    EXPECT_EQ(r.next.state, expect ? "SHAKE" : "CLOSING") << "mask " << mask;
    if (!expect) {
      EXPECT_EQ(r.command.kind, CommandKind::FingerFlex);
      EXPECT_EQ(r.command.target, "all");
    }
    shakes += r.next.state == "SHAKE";
  }
  EXPECT_EQ(shakes, 5);
}

TEST(EggFsm, FirstShakeFrameMatchesScan) {
  const auto spec = bundled("egg");
  const auto raw = open_trace("synth:ramp", 7);
  const auto scan = scan_p_max(raw, 15);
  std::optional<long> first;
  for (std::size_t i = 0; i < scan.size() && !first; ++i) {
    int n = 0;
    for (const auto& [p, v] : scan[i]) n += v >= spec.thresholds.at("T");
    if (n >= 3) first = raw[i].step;
  }
  ASSERT_TRUE(first);
  const auto log = run_task(spec, normalize_trace(raw), 1000);
  EXPECT_EQ(log.entered("SHAKE"), first);
  EXPECT_EQ(log.outcome, Outcome::Success);
  EXPECT_EQ(log.final_state, "DONE");
  // SHAKE_STEPS shakes, then table, PLACE_STEPS holds and RELEASE_STEPS holds.
  const auto shake = *log.entered("SHAKE");
  EXPECT_EQ(*log.entered("PLACE") - shake, spec.params.at("SHAKE_STEPS") + 1);
  EXPECT_EQ(*log.entered("RELEASE") - *log.entered("PLACE"), spec.params.at("PLACE_STEPS") + 1);
  EXPECT_EQ(*log.entered("DONE") - *log.entered("RELEASE"), spec.params.at("RELEASE_STEPS") + 1);
}

TEST(EggFsm, TimesOutWhenFramesRunShort) {
  const auto log = run_task(bundled("egg"), synth("ramp"), 10);
  EXPECT_EQ(log.outcome, Outcome::Timeout);
  EXPECT_EQ(log.states.size(), 10u);
  EXPECT_EQ(log.final_state, "CLOSING");
  const auto flat = run_task(bundled("egg"), synth("flat"), 1000);
  EXPECT_EQ(flat.outcome, Outcome::Timeout);
}

TEST(ScissorsFsm, PaperCutsAndHardMaterialStops) {
  const auto spec = bundled("scissors");
  const auto paper = run_task(spec, synth("paper"), 1000);
  EXPECT_EQ(paper.outcome, Outcome::Success);
  EXPECT_EQ(paper.final_state, "CUT_DONE");
  const auto hard = run_task(spec, synth("hard"), 1000);
  EXPECT_EQ(hard.outcome, Outcome::Rejected);
  EXPECT_EQ(hard.final_state, "STOP");
  EXPECT_EQ(hard.commands.back().kind, CommandKind::FingerExtend);
  // The cut never starts before the placement event.
  const auto raw = open_trace("synth:paper", 7);
  long placed = -1;
  for (const auto& f : raw)
    if (placed < 0 && f.events.count("placed")) placed = f.step;
  ASSERT_GE(placed, 0);
  EXPECT_EQ(paper.entered("ABDUCT"), placed);
}

TEST(BottleFsm, EmptyIsDiscardedFullIsPoured) {
  const auto spec = bundled("bottle");
  const auto empty = run_task(spec, synth("empty"), 1000);
  EXPECT_EQ(empty.outcome, Outcome::Success);
  EXPECT_EQ(empty.final_state, "DISCARDED");
  EXPECT_TRUE(empty.entered("DISCARD"));
  EXPECT_FALSE(empty.entered("POUR"));
  const auto full = run_task(spec, synth("full"), 1000);
  EXPECT_EQ(full.final_state, "DONE");
  EXPECT_TRUE(full.entered("POUR"));
  EXPECT_FALSE(full.entered("DISCARD"));
}

TEST(WingFsm, TightensWithinWristLimit) {
  const auto log = run_task(bundled("wing_screw"), synth("tighten"), 1000);
  EXPECT_EQ(log.outcome, Outcome::Success);
  EXPECT_EQ(log.final_state, "TIGHT");
  EXPECT_TRUE(log.entered("ROTATE_BACK"));
  for (double w : log.wrist) EXPECT_LE(std::abs(w), 180.0);
}

TEST(Fsm, WristPastLimitIsError) {
  auto spec = FsmSpec::parse(
      "fsm spin\npatch f0\nstate A initial\nstate B terminal success\non A -> A do wrist_rotate 100\n");
  FsmRuntime rt = FsmRuntime::start(spec);
  rt = step_fsm(spec, rt, frame_with(0, {{"f0", 0}})).next;
  EXPECT_THROW(step_fsm(spec, rt, frame_with(1, {{"f0", 0}})), FsmError);
}

TEST(Fsm, OverlappingGuardsFailToLoad) {
  EXPECT_THROW(FsmSpec::parse("fsm x\npatch f0\nthreshold T 0.5\nstate A initial\nstate B terminal success\n"
                              "on A -> B when pmax(f0) >= T do done\non A -> A when pmax(f0) > 0.2 do hold\n"),
               FsmError);
  EXPECT_NO_THROW(FsmSpec::parse("fsm x\npatch f0\nthreshold T 0.5\nstate A initial\nstate B terminal success\n"
                                 "on A -> B when pmax(f0) >= T do done\non A -> A when pmax(f0) < T do hold\n"));
  EXPECT_THROW(FsmSpec::parse("fsm x\npatch f0\nstate A initial\non A -> Q do hold\n"), FsmError);
  EXPECT_THROW(FsmSpec::parse("fsm x\npatch f0\nstate A initial\non A -> A when pmax(f9) >= 1 do hold\n"), FsmError);
}

TEST(Fsm, BundledSpecsLoadAndRoundTrip) {
  const std::map<std::string, std::vector<std::string>> patches{
      {"bottle", {"f0", "f1", "f2"}}, {"egg", {"f0", "f1", "f2", "f3"}}, {"scissors", {"f0", "f1", "f2"}}, {"wing_screw", {"f0"}}};
  ASSERT_EQ(bundled_fsm_names().size(), patches.size());
  for (const auto& name : bundled_fsm_names()) {
    const auto spec = bundled(name);
    EXPECT_EQ(spec.name, name);
    EXPECT_EQ(spec.patches, patches.at(name));
    EXPECT_NO_THROW(spec.validate());
    EXPECT_EQ(FsmSpec::parse(spec.to_text()).to_text(), spec.to_text());
    EXPECT_TRUE(std::any_of(spec.states.begin(), spec.states.end(), [](const StateDecl& s) { return s.terminal.has_value(); }));
  }
}

TEST(Properties, RunsAreDeterministic) {
  for (const auto& [fsm, preset] : std::vector<std::pair<std::string, std::string>>{
           {"egg", "ramp"}, {"scissors", "paper"}, {"bottle", "full"}, {"wing_screw", "tighten"}})
    for (std::uint64_t seed : {1u, 7u, 42u}) {
      const auto a = run_task(bundled(fsm), synth(preset, seed), 1000).to_text();
      const auto b = run_task(bundled(fsm), synth(preset, seed), 1000).to_text();
      EXPECT_EQ(a, b) << fsm << " seed " << seed;
    }
}

TEST(Properties, ScalingTraceAndThresholdsTogetherKeepsTheRun) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> k(0.25, 8.0);
  for (const auto& [fsm, preset] : std::vector<std::pair<std::string, std::string>>{
           {"egg", "ramp"}, {"scissors", "hard"}, {"bottle", "empty"}, {"wing_screw", "tighten"}}) {
    const auto base = run_task(bundled(fsm), synth(preset), 1000);
    for (int i = 0; i < 5; ++i) {
      // Powers of two keep every comparison exact.
      const double s = std::exp2(std::round(std::log2(k(rng))));
      auto spec = bundled(fsm);
      for (const auto& [name, v] : bundled(fsm).thresholds) spec.set_threshold(name, v * s);
      const auto scaled = run_task(spec, normalize_trace(scale_trace(open_trace("synth:" + preset, 7), s)), 1000);
      EXPECT_EQ(states_of(scaled), states_of(base)) << fsm << " x" << s;
      EXPECT_EQ(scaled.outcome, base.outcome);
    }
  }
}

TEST(Properties, RaisingReadingsNeverLowersPatchMax) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lift(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto raw = random_trace(rng, 30, 6);
    auto raised = raw;
    for (std::size_t i = 15; i < raised.size(); ++i)
      for (auto& [id, v] : raised[i].readings) v += lift(rng);
    const auto a = normalize_trace(raw), b = normalize_trace(raised);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (const auto& [p, v] : a[i].p_max) EXPECT_GE(b[i].p_max.at(p), v);
  }
}

TEST(Properties, RandomPressuresFireAtMostOneTransition) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> p(0.0, 1.2);
  for (const auto& name : bundled_fsm_names()) {
    const auto spec = bundled(name);
    for (int walk = 0; walk < 200; ++walk) {
      FsmRuntime rt = FsmRuntime::start(spec);
      for (long step = 0; step < 60 && !spec.is_terminal(rt.state); ++step) {
        ProcessedFrame f;
        f.step = step;
        for (const auto& patch : spec.patches) f.p_max[patch] = p(rng);
        if (p(rng) > 0.9) f.events = {"placed", "unscrewed"};
        StepResult r;
        ASSERT_NO_THROW(r = step_fsm(spec, rt, f)) << name;
        if (!r.transition) {
          EXPECT_EQ(r.next.steps_in_state, rt.steps_in_state + 1);
        }
        EXPECT_LE(std::abs(r.next.wrist), 180.0);
        rt = r.next;
      }
    }
  }
}
