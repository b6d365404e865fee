#include <benchmark/benchmark.h>

#include <random>

#include "forge/data.hpp"
#include "forge/deform/cage.hpp"
#include "forge/grammar/enumerate.hpp"
#include "forge/knit/program.hpp"
#include "forge/meshkit/assembly.hpp"
#include "forge/meshkit/stl.hpp"
#include "forge/service/session.hpp"
#include "forge/tactile/fsm.hpp"
#include "forge/tactile/synth.hpp"

using namespace forge;

namespace {

std::shared_ptr<const service::Workspace> workspace() {
  static const auto ws = service::Workspace::load("default");
  return ws;
}

const service::DesignSession& egg() {
  static const auto s = [] {
    auto s = service::DesignSession::create("bench", workspace());
    s.apply_script(grammar::Script::load(data_dir() / "scripts" / "egg.script"));
    return s;
  }();
  return s;
}

void BM_ReplayEgg(benchmark::State& state) {
  const auto script = grammar::Script::load(data_dir() / "scripts" / "egg.script");
  for (auto _ : state) {
    auto s = service::DesignSession::create("b", workspace());
    s.apply_script(script);
    benchmark::DoNotOptimize(s.design().size());
  }
}
BENCHMARK(BM_ReplayEgg);

void BM_CountFingers(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(grammar::count_fingers(workspace()->rules, "k", static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CountFingers)->Arg(1)->Arg(2)->Arg(3);

void BM_ProposeVertexEdit(benchmark::State& state) {
  auto a = egg().cage();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.5);
  std::uniform_int_distribution<deform::VertexId> pick(0, static_cast<deform::VertexId>(a.vertex_count() - 1));
  for (auto _ : state) {
    const auto v = pick(rng);
    try {
      deform::propose_vertex_edit(a, v, a.rest_positions()[v] + geometry::Vec3(n(rng), n(rng), n(rng)));
    } catch (const deform::DeformError&) {
    }
    a.reset();
  }
}
BENCHMARK(BM_ProposeVertexEdit);

void BM_DeformMeshes(benchmark::State& state) {
  const auto& a = egg().cage();
  for (auto _ : state) benchmark::DoNotOptimize(deform::deform_meshes(a));
}
BENCHMARK(BM_DeformMeshes);

void BM_MergePrintableParts(benchmark::State& state) {
  const auto meshes = egg().preview();
  for (auto _ : state)
    benchmark::DoNotOptimize(meshkit::merge_printable_parts(egg().design(), workspace()->library, meshes.print));
}
BENCHMARK(BM_MergePrintableParts);

void BM_StlBytes(benchmark::State& state) {
  const auto parts = meshkit::merge_printable_parts(egg().design(), workspace()->library, egg().preview().print);
  for (auto _ : state)
    for (const auto& p : parts) benchmark::DoNotOptimize(meshkit::stl_bytes(p.mesh));
}
BENCHMARK(BM_StlBytes);

void BM_StitchAndTrace(benchmark::State& state) {
  std::vector<double> per;
  for (int i = 0; i < state.range(0); ++i) per.push_back(40.0 - 0.05 * i);
  for (auto _ : state) {
    const auto m = knit::stitch_band(per, {1, 1});
    benchmark::DoNotOptimize(knit::trace_knit_path(m));
  }
}
BENCHMARK(BM_StitchAndTrace)->Arg(20)->Arg(200);

void BM_RunEggTask(benchmark::State& state) {
  const auto spec = tactile::FsmSpec::load(data_dir() / "fsm" / "egg.fsm");
  const auto frames = tactile::normalize_trace(tactile::open_trace("synth:ramp", 7));
  for (auto _ : state) benchmark::DoNotOptimize(tactile::run_task(spec, frames, 10000));
}
BENCHMARK(BM_RunEggTask);

}  // namespace
BENCHMARK_MAIN();
