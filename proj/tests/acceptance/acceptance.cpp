#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "forge/data.hpp"
#include "forge/deform/cage.hpp"
#include "forge/grammar/canonical.hpp"
#include "forge/grammar/enumerate.hpp"
#include "forge/knit/program.hpp"
#include "forge/meshkit/assembly.hpp"
#include "forge/meshkit/stl.hpp"
#include "forge/service/session.hpp"
#include "forge/tactile/fsm.hpp"
#include "forge/tactile/synth.hpp"
#include "oracles.hpp"

using namespace forge;
using geometry::Vec3;
using nlohmann::json;

namespace {

// Collects failed checks of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ = failed_ || !ok;
  }
  bool failed() const { return failed_; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    return s;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
};

std::string num(double x) {
  std::ostringstream o;
  o << std::setprecision(6) << x;
  return o.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const grammar::RuleSet& rules() { return oracle::default_workspace()->rules; }

void replay_scripts(Check& c) {
  const std::vector<std::pair<std::string, std::size_t>> expect{{"egg", 4}, {"wing_screw", 1}, {"bottle", 3}, {"scissors", 3}};
  for (const auto& [name, fingers] : expect) {
    auto s = service::DesignSession::create(name, oracle::default_workspace());
    s.apply_script(grammar::Script::load(data_dir() / "scripts" / (name + ".script")));
    const auto got = grammar::finger_count(rules(), s.design());
    c.expect(got == fingers, name + " has " + std::to_string(got) + " fingers, want " + std::to_string(fingers));
    c.expect(grammar::is_complete(rules(), s.design()), name + " is not complete");
  }
}

void design_space(Check& c) {
  bool exact = false;
  const auto f = grammar::count_fingers(rules(), "k", 3, &exact);
  c.expect(exact, "finger count is not exact");
  c.expect(f >= grammar::BigInt(10'000'000) && f <= grammar::BigInt(1'000'000'000),
           "fingers per slot " + f.str() + " outside [1e7, 1e9]");
  const auto bound = grammar::hand_lower_bound(f, 6);
  c.expect(bound > grammar::BigInt("10000000000000000000000000000000000000000"), "6-slot bound " + bound.str() + " <= 1e40");

  const auto tiny = grammar::RuleSet::load(oracle::test_data_dir() / "tiny.ruleset");
  for (int seg = 0; seg <= 3; ++seg)
    for (int grid = 1; grid <= 3; ++grid)
      for (int fingers : {1, 2, 6}) {
        grammar::EnumerationLimits lim;
        lim.max_finger_segments = seg;
        lim.max_grid = grid;
        lim.max_fingers = fingers;
        const auto r = grammar::enumerate_designs(tiny, lim);
        const auto brute = oracle::brute_force_designs(tiny, {seg, grid, fingers});
        c.expect(r.exact && r.count == brute, "tiny grammar seg " + std::to_string(seg) + " grid " + std::to_string(grid) +
                                                  " fingers " + std::to_string(fingers) + ": " + r.count.str() +
                                                  " vs brute force " + std::to_string(brute));
      }
}

void deformation(Check& c) {
  const auto s = oracle::egg_session();
  const auto& a = s.cage();
  const auto rest = deform::deform_meshes(a);
  double worst = 0;
  for (std::size_t cell = 0; cell < a.cells().size(); ++cell)
    for (std::size_t i = 0; i < rest.print[cell].vertices.size(); ++i)
      worst = std::max(worst, (rest.print[cell].vertices[i] - a.rest_print(cell).vertices[i]).cwiseAbs().maxCoeff());
  c.expect(worst <= 1e-12, "rest displacement " + num(worst));

  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2), shift(-10, 10);
  double rel = 0;
  for (int trial = 0; trial < 20; ++trial) {
    geometry::Mat3 m = geometry::Mat3::Identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) += jitter(rng);
    const Vec3 t(shift(rng), shift(rng), shift(rng));
    auto moved = a;
    for (deform::VertexId v = 0; v < moved.vertex_count(); ++v) moved.set_position(v, m * moved.rest_positions()[v] + t);
    const auto out = deform::deform_meshes(moved);
    for (std::size_t cell = 0; cell < moved.cells().size(); ++cell)
      for (std::size_t i = 0; i < out.print[cell].vertices.size(); ++i) {
        const Vec3 expect = m * moved.rest_print(cell).vertices[i] + t;
        rel = std::max(rel, (out.print[cell].vertices[i] - expect).norm() / std::max(1.0, expect.norm()));
      }
  }
  c.expect(rel <= 1e-9, "affine relative error " + num(rel));

  std::array<Vec3, 8> k;
  for (int i = 0; i < 8; ++i) k[i] = Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const Vec3 center = deform::trilinear(k, Vec3(0.5, 0.5, 0.5));
  const Vec3 d(0.75, -0.5, 1.25);
  for (int corner = 0; corner < 8; ++corner) {
    auto moved = k;
    moved[corner] += d;
    c.expect(deform::trilinear(moved, Vec3(0.5, 0.5, 0.5)) - center == d / 8,
             "corner " + std::to_string(corner) + " center weight is not 1/8");
    c.expect(oracle::hat_weight(corner, 0.5, 0.5, 0.5) == 0.125, "hat weight oracle");
  }
}

void manufacturability(Check& c) {
  const auto s = oracle::egg_session();
  const auto& lib = s.workspace().library;
  std::mt19937_64 rng(500);
  std::normal_distribution<double> step(0, 2.0);
  double gap = 0;
  std::size_t accepted = 0;
  for (int seq = 0; seq < 500; ++seq) {
    auto a = s.cage();
    std::uniform_int_distribution<deform::VertexId> pick(0, static_cast<deform::VertexId>(a.vertex_count() - 1));
    for (int i = 0; i < 8; ++i) {
      const auto v = pick(rng);
      try {
        deform::propose_vertex_edit(a, v, a.current_positions()[v] + Vec3(step(rng), step(rng), step(rng)));
        ++accepted;
      } catch (const deform::DeformError&) {
      }
    }
    const auto violations = deform::check_constraints(a);
    c.expect(violations.empty(), "sequence " + std::to_string(seq) + ": " +
                                     (violations.empty() ? std::string() : violations.front().describe()));
    for (const auto& p : meshkit::merge_printable_parts(s.design(), lib, deform::deform_meshes(a).print))
      c.expect(meshkit::check_watertight(p.mesh).is_watertight, "sequence " + std::to_string(seq) + " part not watertight");
    gap = std::max(gap, oracle::max_continuity_gap(a, s.design(), rng, 20));
  }
  c.expect(accepted > 1000, "only " + std::to_string(accepted) + " of 4000 edits accepted");
  c.expect(gap <= 1e-9, "mating-face gap " + num(gap));
}

void stl_determinism(Check& c) {
  meshkit::TriMesh cube;
  for (int i = 0; i < 8; ++i) cube.vertices.push_back(Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1));
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    cube.add_triangle(q[0], q[1], q[2]);
    cube.add_triangle(q[0], q[2], q[3]);
  }
  const auto bytes = meshkit::stl_bytes(cube);
  c.expect(bytes.size() == 684, "unit cube is " + std::to_string(bytes.size()) + " bytes");

  auto s = oracle::egg_session();
  oracle::apply_egg_deform(s);
  oracle::apply_egg_sensors(s);
  const auto a = service::render_export(s);
  const auto b = service::render_export(service::DesignSession::from_json(s.to_json(), oracle::default_workspace()));
  c.expect(a.contents == b.contents, "repeat export differs");

  const auto parts = meshkit::merge_printable_parts(s.design(), s.workspace().library, s.preview().print);
  std::size_t stl = 0;
  for (std::size_t i = 0; i < a.manifest.files.size(); ++i) {
    if (a.manifest.files[i].kind != "stl") continue;
    const auto& mesh = parts.at(stl++).mesh;
    const auto parsed = oracle::read_stl(a.contents[i]);
    c.expect(parsed.triangles.size() == mesh.size(), a.manifest.files[i].name + " triangle count");
    std::multiset<std::array<float, 3>> want, got;
    for (const auto& t : mesh.triangles)
      for (auto v : t) {
        const auto& p = mesh.vertices[v];
        want.insert({static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())});
      }
    for (const auto& t : parsed.triangles)
      for (const auto& v : t.v) got.insert(v);
    c.expect(want == got, a.manifest.files[i].name + " vertex multiset");
  }
  c.expect(stl == parts.size() && stl > 0, "stl count " + std::to_string(stl));
}

void knit_paths(Check& c) {
  std::mt19937_64 rng(200);
  std::uniform_int_distribution<int> courses(2, 30);
  std::uniform_real_distribution<double> start(8, 60), taper(-0.09, 0.09);
  int bands = 0;
  while (bands < 200) {
    std::vector<double> per{start(rng)};
    const int n = courses(rng);
    for (int i = 1; i < n; ++i) per.push_back(std::max(4.0, per.back() * (1 + taper(rng))));
    knit::StitchMesh m;
    try {
      m = knit::stitch_band(per, {1, 1});
    } catch (const knit::KnitError&) {
      continue;
    }
    ++bands;
    const auto want = oracle::expected_course_counts(per, 1);
    for (std::size_t i = 0; i < m.courses.size(); ++i) {
      c.expect(static_cast<int>(m.courses[i].size()) == want[i], "band course size");
      std::size_t shaping = 0;
      for (auto id : m.courses[i]) shaping += m.face(id).is_pentagon();
      const auto diff = i == 0 ? 0 : static_cast<std::size_t>(std::abs(want[i] - want[i - 1]));
      c.expect(shaping == diff, "band shaping count differs from course change");
    }
    std::uniform_int_distribution<std::size_t> pick(0, m.faces.size() - 1);
    for (int i = 0; i < 4; ++i) {
      const auto id = static_cast<std::uint32_t>(pick(rng));
      if (!m.face(id).is_pentagon()) m = knit::place_sensor(m, id);
    }
    const auto [h, v] = knit::trace_knit_path(m);
    std::map<std::pair<int, int>, int> seen;
    for (const auto& i : h.instructions)
      if (i.op != knit::Op::CastOn && i.op != knit::Op::Turn && i.op != knit::Op::BindOff) ++seen[{i.course, i.wale}];
    bool once = seen.size() == m.faces.size();
    for (const auto& f : m.faces) once = once && seen[{f.course, f.wale}] == 1;
    c.expect(once, "path does not visit every stitch once");
    std::vector<std::size_t> sizes;
    for (const auto& course : m.courses) sizes.push_back(course.size());
    c.expect(h.instructions.size() == oracle::expected_instruction_count(sizes), "instruction count");
    bool layers = h.instructions.size() == v.instructions.size();
    for (std::size_t i = 0; layers && i < h.instructions.size(); ++i) {
      auto x = h.instructions[i];
      if (x.op == knit::Op::SensorH) x.op = knit::Op::SensorV;
      layers = x == v.instructions[i] && h.instructions[i].op != knit::Op::SensorV;
    }
    c.expect(layers, "layers differ beyond SENSOR_H/SENSOR_V");
  }

  auto s = oracle::egg_session();
  oracle::apply_egg_deform(s);
  oracle::apply_egg_sensors(s);
  c.expect(s.patches().size() == 4, "egg has " + std::to_string(s.patches().size()) + " patches");
  for (const auto& [name, p] : s.patches()) {
    const auto sm = knit::build_sensor_matrix(p.mesh);
    c.expect(sm.taxels.size() == 6, name + " has " + std::to_string(sm.taxels.size()) + " taxels");
  }
  c.expect(s.taxel_count() == 24, "egg has " + std::to_string(s.taxel_count()) + " taxels");
}

tactile::FsmSpec bundled_fsm(const std::string& name) {
  return tactile::FsmSpec::load(data_dir() / "fsm" / (name + ".fsm"));
}

tactile::TaskLog run(const std::string& fsm, const std::string& preset, std::uint64_t seed = 7) {
  return tactile::run_task(bundled_fsm(fsm), tactile::normalize_trace(tactile::open_trace("synth:" + preset, seed)), 10000);
}

void tactile_pipeline(Check& c) {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> base(0.5, 3.0), bump(0.0, 2.0), noise(-0.01, 0.01);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<tactile::SensorFrame> raw(40);
    std::vector<double> b(6);
    for (auto& x : b) x = base(rng);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i].step = static_cast<long>(i);
      for (int t = 0; t < 6; ++t)
        raw[i].readings["f" + std::to_string(t % 2) + ":" + std::to_string(t)] = b[t] + (i < 15 ? noise(rng) : bump(rng));
    }
    const auto out = tactile::normalize_trace(raw);
    std::map<std::string, double> mean;
    for (std::size_t i = 0; i < 15; ++i)
      for (const auto& [id, v] : raw[i].readings) mean[id] += v / 15;
    for (const auto& [id, m] : mean) {
      double centered = 0;
      for (std::size_t i = 0; i < 15; ++i) centered += raw[i].readings.at(id) - m;
      c.expect(std::abs(centered) <= 1e-9, "baseline window is not zero-mean");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (const auto& [id, v] : out[i].values) {
        c.expect(v >= 0, "negative normalized value");
        c.expect(std::abs(v - std::max(0.0, raw[i].readings.at(id) - mean[id])) <= 1e-12, "normalized value");
      }
    }
  }

  const auto egg = bundled_fsm("egg");
  int shakes = 0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    tactile::ProcessedFrame f;
    for (int i = 0; i < 4; ++i) f.p_max["f" + std::to_string(i)] = (mask >> i) & 1 ? 0.8 : 0.2;
    const auto r = tactile::step_fsm(egg, tactile::FsmRuntime::start(egg), f);
    const bool want = std::popcount(mask) >= 3;
    c.expect((r.next.state == "SHAKE") == want, "egg truth table at mask " + std::to_string(mask));
    shakes += r.next.state == "SHAKE";
  }
  c.expect(shakes == 5, "egg truth table has " + std::to_string(shakes) + " shaking patterns");

  const auto wing = run("wing_screw", "tighten");
  c.expect(wing.outcome == tactile::Outcome::Success && wing.final_state == "TIGHT", "wing screw ends in " + wing.final_state);
  c.expect(std::all_of(wing.wrist.begin(), wing.wrist.end(), [](double w) { return std::abs(w) <= 180; }),
           "wrist leaves +-180");
  const auto hard = run("scissors", "hard"), paper = run("scissors", "paper");
  c.expect(hard.outcome == tactile::Outcome::Rejected, "hard material ends in " + hard.final_state);
  c.expect(paper.outcome == tactile::Outcome::Success, "paper ends in " + paper.final_state);
  for (const auto& [fsm, preset] : std::vector<std::pair<std::string, std::string>>{
           {"egg", "ramp"}, {"wing_screw", "tighten"}, {"scissors", "hard"}, {"scissors", "paper"}, {"bottle", "full"}})
    c.expect(run(fsm, preset).to_text() == run(fsm, preset).to_text(), fsm + " log is not deterministic");
}

void cli_golden(Check& c) {
  oracle::TempDir dir("golden");
  const auto session = (dir.path() / "egg.json").string();
  const auto out = (dir.path() / "out").string();
  const std::vector<std::vector<std::string>> steps{
      {"--session", session, "script", (data_dir() / "scripts" / "egg.script").string()},
      {"--session", session, "deform", "--preset", "egg"},
      {"--session", session, "sensor", "--preset", "egg"},
      {"--session", session, "export", "--out", out}};
  for (const auto& args : steps) {
    std::ostringstream o, e;
    const int code = cli::run(args, o, e);
    c.expect(code == 0, "forge " + args[2] + " exited " + std::to_string(code) + ": " + e.str());
    if (code != 0) return;
  }
  const auto golden = json::parse(slurp(oracle::golden_dir() / "egg.manifest.json")).at("files");
  const auto got = json::parse(slurp(std::filesystem::path(out) / "manifest.json")).at("files");
  std::map<std::string, json> want;
  for (const auto& f : golden) want[f.at("name")] = f;
  c.expect(got.size() == golden.size(),
           "manifest lists " + std::to_string(got.size()) + " files, golden " + std::to_string(golden.size()));
  for (const auto& f : got) {
    const auto name = f.at("name").get<std::string>();
    const auto it = want.find(name);
    c.expect(it != want.end(), name + " is not in the golden manifest");
    if (it == want.end()) continue;
    c.expect(f == it->second, name + " differs from golden");
    const auto bytes = slurp(std::filesystem::path(out) / name);
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(grammar::fnv1a64(bytes)));
    c.expect(f.at("fnv1a") == hex, name + " hash does not match its bytes");
  }
}

struct Criterion {
  std::string name;
  double limit_s;
  std::function<void(Check&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"script-replay", 1, replay_scripts},
      {"design-space-scale", 300, design_space},
      {"deformation-identity-affinity", 10, deformation},
      {"manufacturability-properties", 120, manufacturability},
      {"stl-bit-determinism", 5, stl_determinism},
      {"knit-path-properties", 30, knit_paths},
      {"tactile-pipeline", 30, tactile_pipeline},
      {"cli-golden-run", 60, cli_golden},
  };
  // Shared fixtures load outside the timed sections.
  oracle::default_workspace();
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& cr = criteria[i];
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(secs <= cr.limit_s, "took " + num(secs) + " s");
    failed += check.failed();
    std::cout << (check.failed() ? "FAIL" : "PASS") << " [" << i + 1 << "/" << criteria.size() << "] " << cr.name << " "
              << std::fixed << std::setprecision(3) << secs << "s (limit " << std::defaultfloat << cr.limit_s << "s)";
    if (check.failed()) std::cout << ": " << check.summary();
    std::cout << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
