#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cli.hpp"
#include "forge/data.hpp"
#include "forge/service/api.hpp"
#include "oracles.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>

using namespace forge;
using namespace forge::service;
using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Fixture {
  SessionStore store{oracle::default_workspace()};
  Api api{store};

  ApiResponse call(const std::string& method, const std::string& path, const json& body = nullptr,
                   const std::map<std::string, std::string>& q = {}) {
    return api.handle(method, path, q, body.is_null() ? "" : body.dump());
  }
  json ok(const std::string& method, const std::string& path, const json& body = nullptr,
          const std::map<std::string, std::string>& q = {}) {
    const auto r = call(method, path, body, q);
    EXPECT_LT(r.status, 300) << method << " " << path << ": " << r.body;
    return json::parse(r.body);
  }
  std::string create(const std::string& script = "") {
    const auto r = call("POST", "/session", script.empty() ? json::object() : json{{"script", script}});
    EXPECT_EQ(r.status, 201) << r.body;
    return json::parse(r.body).at("id").get<std::string>();
  }
  std::uint64_t revision(const std::string& id) { return ok("GET", "/session/" + id).at("revision").get<std::uint64_t>(); }
};

std::string egg_script() { return read_file(data_dir() / "scripts" / "egg.script"); }

json preset(const std::string& file) { return json::parse(read_file(data_dir() / "presets" / file)); }

// Drives the egg presets through the HTTP routes one mutation at a time.
void api_egg_flow(Fixture& f, const std::string& id) {
  auto post = [&](const std::string& action, json body) {
    body["expected_revision"] = f.revision(id);
    return f.ok("POST", "/session/" + id + "/" + action, body);
  };
  const auto deform = preset("egg.deform.json");
  for (const auto& e : deform.at("edits")) post("cage-edit", {{"vertex", e["vertex"]}, {"position", e["position"]}});
  const auto sensors = preset("egg.sensors.json");
  for (const auto& p : sensors.at("patches")) {
    post("sensor", {{"action", "define"}, {"patch", p["name"]}, {"chain", p["chain"]}, {"sides", p["sides"]}, {"gauge", p["gauge"]}});
    for (const auto& c : p.at("sensors")) post("sensor", {{"action", "place"}, {"patch", p["name"]}, {"course", c[0]}, {"wale", c[1]}});
  }
  post("fsm", {{"name", sensors["fsm"]["name"]}, {"thresholds", sensors["fsm"]["thresholds"]}});
}

int run_forge(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  return code;
}

}  // namespace

TEST(Api, CreateAndRead) {
  Fixture f;
  const auto id = f.create();
  const auto j = f.ok("GET", "/session/" + id);
  EXPECT_EQ(j.at("revision"), 0);
  EXPECT_EQ(j.at("nodes").size(), 1u);
  EXPECT_EQ(j.at("phase"), "palm");
  EXPECT_NE(f.create(), id);
}

TEST(Api, CreateWithScriptReplays) {
  Fixture f;
  const auto id = f.create(egg_script());
  const auto j = f.ok("GET", "/session/" + id);
  EXPECT_EQ(j.at("fingers"), 4);
  EXPECT_EQ(j.at("complete"), true);
  EXPECT_EQ(j.at("state_hash").get<std::string>().size(), 16u);
}

TEST(Api, StatusCodes) {
  Fixture f;
  const auto id = f.create();
  EXPECT_EQ(f.call("GET", "/session/nope").status, 404);
  EXPECT_EQ(f.call("POST", "/session/nope/apply-rule", {{"rule", "Rp1"}, {"expected_revision", 0}}).status, 404);
  EXPECT_EQ(f.call("GET", "/elsewhere").status, 404);
  EXPECT_EQ(f.call("GET", "/session/" + id + "/applicable-rules", nullptr, {{"node", "99"}}).status, 404);
  EXPECT_EQ(f.call("POST", "/session/" + id + "/apply-rule", {{"rule", "Rp1"}, {"expected_revision", 5}}).status, 409);
  EXPECT_EQ(f.call("POST", "/session/" + id + "/apply-rule", {{"rule", "Rf1"}, {"expected_revision", 0}}).status, 422);
  EXPECT_EQ(f.call("POST", "/session/" + id + "/apply-rule", {{"rule", "Rp1"}}).status, 400);
  EXPECT_EQ(f.api.handle("POST", "/session/" + id + "/apply-rule", {}, "{oops").status, 400);
  EXPECT_EQ(f.call("GET", "/session/" + id + "/mesh", nullptr, {{"kind", "weird"}}).status, 400);
  EXPECT_EQ(f.call("POST", "/session/" + id + "/export", json::object()).status, 422);
  EXPECT_EQ(f.call("GET", "/session/" + id + "/simulate").status, 422);
  EXPECT_EQ(f.call("DELETE", "/session/" + id).status, 405);
  EXPECT_EQ(f.call("POST", "/session", {{"script", "Rp1\nbogus line here\n"}}).status, 400);
  EXPECT_EQ(f.revision(id), 0u);
}

TEST(Api, ApplicableRulesMatchesEngine) {
  Fixture f;
  const auto id = f.create();
  const auto j = f.ok("GET", "/session/" + id + "/applicable-rules");
  const auto& ws = *oracle::default_workspace();
  const auto apps = grammar::applicable_rules(ws.rules, grammar::new_design(ws.rules));
  ASSERT_EQ(j.at("rules").size(), apps.size());
  for (std::size_t i = 0; i < apps.size(); ++i) {
    EXPECT_EQ(j["rules"][i]["rule"], apps[i].rule_id);
    EXPECT_EQ(j["rules"][i]["anchor"], apps[i].anchor);
  }
  EXPECT_EQ(j.at("handoff"), false);
  EXPECT_TRUE(j.contains("handoff_reason"));
}

TEST(Api, ApplyRuleAdvancesRevision) {
  Fixture f;
  const auto id = f.create();
  const auto j = f.ok("POST", "/session/" + id + "/apply-rule", {{"rule", "Rp1"}, {"expected_revision", 0}});
  EXPECT_EQ(j.at("revision"), 1);
  EXPECT_TRUE(j.contains("applied"));
  EXPECT_GT(j.at("nodes").size(), 1u);
}

TEST(Api, CageEditEchoesStoredPosition) {
  Fixture f;
  const auto id = f.create(egg_script());
  auto local = oracle::egg_session();
  // Every vertex of one joint cell, pushed off its rest spot.
  std::size_t joint = 0;
  while (local.cage().cells()[joint].cls != deform::CellClass::Joint) ++joint;
  const auto corners = local.cage().cells()[joint].corners;
  for (const auto v : corners) {
    const auto rest = local.cage().current_positions()[v];
    const geometry::Vec3 target{rest.x() + 0.75, rest.y() - 0.5, rest.z() + 0.25};
    const auto expect = local.edit_cage(v, target);
    const auto j = f.ok("POST", "/session/" + id + "/cage-edit",
                        {{"vertex", v}, {"position", {target.x(), target.y(), target.z()}}, {"expected_revision", f.revision(id)}});
    EXPECT_EQ(j.at("projected"), expect.projected);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(j["position"][a].get<double>(), expect.position[a], 1e-12);
  }
  const auto mesh = f.ok("GET", "/session/" + id + "/mesh", nullptr, {{"kind", "cage"}});
  const auto& pos = mesh.at("cage").at("positions");
  ASSERT_EQ(pos.size(), local.cage().vertex_count());
  for (std::size_t v = 0; v < pos.size(); ++v)
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(pos[v][a].get<double>(), local.cage().current_positions()[v][a], 1e-12);
  EXPECT_EQ(f.ok("GET", "/session/" + id).at("state_hash"), json::parse(session_json(local)).at("state_hash"));
}

TEST(Api, CollapsingEditIsUnprocessable) {
  Fixture f;
  const auto id = f.create(egg_script());
  const auto local = oracle::egg_session();
  const auto& cell = local.cage().cells()[0];
  const auto far = local.cage().current_positions()[cell.corners[7]];
  const auto r = f.call("POST", "/session/" + id + "/cage-edit",
                        {{"vertex", cell.corners[0]}, {"position", {far.x() + 5, far.y() + 5, far.z() + 5}}, {"expected_revision", 1}});
  EXPECT_EQ(r.status, 422) << r.body;
  EXPECT_EQ(f.revision(id), 1u);
}

TEST(Api, RacingMutationsExactlyOneWins) {
  Fixture f;
  for (int round = 0; round < 20; ++round) {
    const auto id = f.create(egg_script());
    const auto rev = f.revision(id);
    constexpr int kThreads = 8;
    std::atomic<int> ok{0}, conflict{0}, other{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> threads;
    for (int t = 0; t < kThreads; ++t)
      threads.emplace_back([&, t] {
        while (!go) std::this_thread::yield();
        const auto r = f.call("POST", "/session/" + id + "/cage-edit",
                              {{"vertex", 0}, {"position", {-10.0 - t, -10.0, 0.0}}, {"expected_revision", rev}});
        (r.status == 200 ? ok : r.status == 409 ? conflict : other)++;
      });
    go = true;
    for (auto& th : threads) th.join();
    EXPECT_EQ(ok, 1);
    EXPECT_EQ(conflict, kThreads - 1);
    EXPECT_EQ(other, 0);
    EXPECT_EQ(f.revision(id), rev + 1);
  }
}

TEST(Api, SimulateAndExport) {
  Fixture f;
  const auto id = f.create(egg_script());
  api_egg_flow(f, id);
  const auto sim = f.ok("GET", "/session/" + id + "/simulate", nullptr, {{"trace", "synth:ramp"}, {"seed", "7"}});
  EXPECT_EQ(sim.at("outcome"), "success");
  EXPECT_EQ(sim.at("final_state"), "DONE");
  EXPECT_EQ(f.call("GET", "/session/" + id + "/simulate", nullptr, {{"trace", "synth:nope"}}).status, 422);
  EXPECT_EQ(f.call("GET", "/session/" + id + "/simulate", nullptr, {{"seed", "x"}}).status, 400);
  oracle::TempDir dir("apiexport");
  const auto m = f.ok("POST", "/session/" + id + "/export", {{"dir", dir.path().string()}});
  std::size_t stl = 0;
  for (const auto& file : m.at("files")) stl += file.at("kind") == "stl";
  EXPECT_EQ(stl, 25u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "manifest.json"));
  EXPECT_EQ(f.ok("GET", "/session/" + id).at("taxels"), 24);
}

TEST(Api, MatchesCliStateHash) {
  Fixture f;
  const auto id = f.create(egg_script());
  api_egg_flow(f, id);
  oracle::TempDir dir("cliapi");
  const auto session = (dir.path() / "egg.json").string();
  const auto script = (data_dir() / "scripts" / "egg.script").string();
  ASSERT_EQ(run_forge({"--session", session, "script", script}), 0);
  ASSERT_EQ(run_forge({"--session", session, "deform", "--preset", "egg"}), 0);
  ASSERT_EQ(run_forge({"--session", session, "sensor", "--preset", "egg"}), 0);
  std::string out;
  ASSERT_EQ(run_forge({"--session", session, "--format", "structured", "show"}, &out), 0);
  const auto cli = json::parse(out);
  const auto api = f.ok("GET", "/session/" + id);
  EXPECT_EQ(cli.at("state_hash"), api.at("state_hash"));
  EXPECT_EQ(cli.at("revision"), api.at("revision"));
}

TEST(Api, StoreMirrorsSessionsToDisk) {
  oracle::TempDir dir("store");
  std::string id, hash;
  {
    SessionStore store(oracle::default_workspace(), dir.path());
    Api api(store);
    id = json::parse(api.handle("POST", "/session", {}, json{{"script", egg_script()}}.dump()).body).at("id");
    const auto r = api.handle("POST", "/session/" + id + "/cage-edit", {},
                              json{{"vertex", 0}, {"position", {-11, -11, 0}}, {"expected_revision", 1}}.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    hash = json::parse(r.body).at("state_hash");
  }
  SessionStore again(oracle::default_workspace(), dir.path());
  EXPECT_EQ(again.load_existing(), 1u);
  Api api(again);
  const auto j = json::parse(api.handle("GET", "/session/" + id, {}, "").body);
  EXPECT_EQ(j.at("state_hash"), hash);
  EXPECT_EQ(j.at("revision"), 2);
}

TEST(ApiServer, ServesOverHttp) {
  SessionStore store(oracle::default_workspace());
  Api api(store);
  ApiServer server(api);
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/session", json{{"script", egg_script()}}.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = json::parse(created->body).at("id").get<std::string>();
  auto got = client.Get("/session/" + id);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(json::parse(got->body).at("fingers"), 4);
  auto stale = client.Post("/session/" + id + "/cage-edit",
                           json{{"vertex", 0}, {"position", {-11, -11, 0}}, {"expected_revision", 3}}.dump(), "application/json");
  ASSERT_TRUE(stale);
  EXPECT_EQ(stale->status, 409);
  auto missing = client.Get("/session/none");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto rules = client.Get("/session/" + id + "/applicable-rules?node=1");
  ASSERT_TRUE(rules);
  EXPECT_EQ(rules->status, 200);
  server.stop();
}
