#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <random>

#include "forge/deform/cage.hpp"
#include "forge/meshkit/assembly.hpp"
#include "oracles.hpp"

using namespace forge;
using namespace forge::deform;
using geometry::Vec3;
using grammar::DesignGraph;

namespace {

const service::Workspace& ws() { return *oracle::default_workspace(); }

// Shaft, pin joint, shaft along +z.
DesignGraph shaft_joint_shaft() {
  auto g = DesignGraph::with_root("s", std::nullopt, {0, 0});
  g.add_node("j", std::nullopt, std::nullopt);
  g.add_node("s", std::nullopt, std::nullopt);
  g.add_edge({0, 1, "distal", "proximal", 0});
  g.add_edge({1, 2, "distal", "proximal", 0});
  g.set_phase(grammar::Phase::Finished);
  return g;
}

// Least-squares fit of (uniform cross-section scale, pin-axis scale) to a
// requested corner offset `d` from the fixed opposite corner, offset `e` now.
Vec3 joint_projection_oracle(const Vec3& e, const Vec3& d, int pin) {
  Eigen::Matrix<double, 3, 2> m = Eigen::Matrix<double, 3, 2>::Zero();
  for (int k = 0; k < 3; ++k) m(k, k == pin ? 1 : 0) = e[k];
  const Eigen::Vector2d s = m.colPivHouseholderQr().solve(d);
  return m * s;
}

}  // namespace

TEST(BindCages, SingleComponentHasEightVertices) {
  auto g = DesignGraph::with_root("s", std::nullopt, {0, 0});
  const auto a = bind_cages(g, ws().library);
  EXPECT_EQ(a.cells().size(), 1u);
  EXPECT_EQ(a.vertex_count(), 8u);
}

TEST(BindCages, ShaftJointShaftMergesTwoFaces) {
  const auto a = bind_cages(shaft_joint_shaft(), ws().library);
  EXPECT_EQ(a.cells().size(), 3u);
  EXPECT_EQ(a.vertex_count(), 3u * 8 - 2 * 4);
  EXPECT_EQ(oracle::shared_vertices(a, 0, 1).size(), 4u);
  EXPECT_EQ(oracle::shared_vertices(a, 1, 2).size(), 4u);
  EXPECT_EQ(oracle::shared_vertices(a, 0, 2).size(), 0u);
  EXPECT_EQ(a.cells()[1].cls, CellClass::Joint);
  EXPECT_EQ(a.cells()[1].pin_axis, 0);
}

TEST(BindCages, EggVertexCountIsCellsMinusMerges) {
  const auto s = oracle::egg_session();
  const auto& a = s.cage();
  EXPECT_EQ(a.cells().size(), s.design().size());
  EXPECT_EQ(a.vertex_count(), 8 * a.cells().size() - 4 * s.design().edges().size());
  EXPECT_EQ(a.rest_positions().size(), a.current_positions().size());
}

TEST(BindCages, MismatchedMatingFaceNamesBothComponents) {
  auto bundles = meshkit::placeholder_bundles();
  for (auto& b : bundles)
    if (b.symbol == "j") {
      b.cage.max.x() += 1.0;
      b.knit.vertices.clear();
    }
  const auto lib = meshkit::ComponentLibrary::unvalidated(bundles);
  try {
    bind_cages(shaft_joint_shaft(), lib);
    FAIL() << "expected a bind error";
  } catch (const DeformError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(s)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(j)"), std::string::npos) << msg;
  }
}

TEST(Edit, FreeCornerAcceptedVerbatim) {
  auto a = bind_cages(shaft_joint_shaft(), ws().library);
  const VertexId v = a.cells()[0].corners[1];
  const Vec3 target = a.rest_positions()[v] + Vec3(5, 0, 0);
  const auto r = propose_vertex_edit(a, v, target);
  EXPECT_FALSE(r.projected);
  EXPECT_EQ(r.position, target);
  EXPECT_EQ(a.current_positions()[v], target);
  EXPECT_TRUE(check_constraints(a).empty());
}

TEST(Edit, JointShearIsProjectedToLeastSquaresBox) {
  auto a = bind_cages(shaft_joint_shaft(), ws().library);
  const auto& cell = a.cells()[1];
  for (int corner = 0; corner < 8; ++corner) {
    a.reset();
    const VertexId v = cell.corners[corner];
    const auto now = a.corners(1);
    const Vec3 request = now[corner] + Vec3(2.0, 3.0, -1.5);
    const auto r = propose_vertex_edit(a, v, request);
    EXPECT_TRUE(r.projected);
    const Vec3 o = now[7 - corner];
    const Vec3 expect = o + joint_projection_oracle(now[corner] - o, request - o, cell.pin_axis);
    EXPECT_LE((r.position - expect).norm(), 1e-9) << "corner " << corner;
    // Every incident cell sees the same vertex and the joint stays a box.
    for (auto c : a.cells_of(v)) {
      const auto k = a.corners(c);
      const auto& ids = a.cells()[c].corners;
      const auto at = std::find(ids.begin(), ids.end(), v) - ids.begin();
      EXPECT_EQ(k[at], r.position);
    }
    EXPECT_TRUE(check_constraints(a).empty());
    // Idempotent on its own output.
    const auto again = propose_vertex_edit(a, v, r.position);
    EXPECT_FALSE(again.projected);
    EXPECT_EQ(again.position, r.position);
  }
}

TEST(Edit, CollapseIsRejectedAndStateKept) {
  auto a = bind_cages(shaft_joint_shaft(), ws().library);
  const auto before = a.current_positions();
  const auto& c0 = a.cells()[0].corners;
  // Corner 0 of the first shaft onto its far z face: zero thickness there.
  EXPECT_THROW(propose_vertex_edit(a, c0[0], a.rest_positions()[c0[4]]), DeformError);
  EXPECT_THROW(propose_vertex_edit(a, c0[0], a.rest_positions()[c0[4]] + Vec3(0, 0, 5)), DeformError);
  EXPECT_EQ(a.current_positions(), before);
  EXPECT_THROW(propose_vertex_edit(a, 9999, Vec3::Zero()), DeformError);
}

TEST(DeformMeshes, RestPoseIsIdentity) {
  const auto s = oracle::egg_session();
  const auto& a = s.cage();
  const auto m = deform_meshes(a);
  double worst = 0;
  for (std::size_t c = 0; c < a.cells().size(); ++c) {
    ASSERT_EQ(m.print[c].vertices.size(), a.rest_print(c).vertices.size());
    for (std::size_t i = 0; i < m.print[c].vertices.size(); ++i) {
      worst = std::max(worst, (m.print[c].vertices[i] - a.rest_print(c).vertices[i]).cwiseAbs().maxCoeff());
      // The trilinear map itself reproduces the rest point.
      const Vec3 p = a.rest_print(c).vertices[i];
      worst = std::max(worst, (map_point(a, c, p) - p).cwiseAbs().maxCoeff());
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(DeformMeshes, GlobalAffineIsReproduced) {
  auto s = oracle::egg_session();
  auto a = s.cage();
  geometry::Mat3 m;
  m << 1.2, 0.1, -0.05, 0.02, 0.9, 0.1, 0.0, -0.03, 1.1;
  const Vec3 t(3, -2, 5);
  for (VertexId v = 0; v < a.vertex_count(); ++v) a.set_position(v, m * a.rest_positions()[v] + t);
  const auto out = deform_meshes(a);
  double worst = 0;
  for (std::size_t c = 0; c < a.cells().size(); ++c)
    for (std::size_t i = 0; i < out.print[c].vertices.size(); ++i) {
      const Vec3 expect = m * a.rest_print(c).vertices[i] + t;
      worst = std::max(worst, (out.print[c].vertices[i] - expect).norm() / std::max(1.0, expect.norm()));
    }
  EXPECT_LE(worst, 1e-9);
}

TEST(DeformMeshes, DoublingScalesVolumeByEight) {
  auto a = bind_cages(shaft_joint_shaft(), ws().library);
  for (VertexId v = 0; v < a.vertex_count(); ++v) a.set_position(v, 2.0 * a.rest_positions()[v]);
  const auto out = deform_meshes(a);
  for (std::size_t c = 0; c < a.cells().size(); ++c) {
    for (std::size_t i = 0; i < out.print[c].vertices.size(); ++i)
      EXPECT_LE((out.print[c].vertices[i] - 2.0 * a.rest_print(c).vertices[i]).norm(), 1e-12);
    EXPECT_NEAR(meshkit::signed_volume(out.print[c]), 8 * meshkit::signed_volume(a.rest_print(c)), 1e-6);
  }
}

TEST(Trilinear, CenterMovesByOneEighthOfCorner) {
  std::array<Vec3, 8> k;
  for (int i = 0; i < 8; ++i) k[i] = Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const Vec3 center = trilinear(k, Vec3(0.5, 0.5, 0.5));
  const Vec3 d(0.75, -0.5, 1.25);
  for (int corner = 0; corner < 8; ++corner) {
    auto moved = k;
    moved[corner] += d;
    EXPECT_EQ(trilinear(moved, Vec3(0.5, 0.5, 0.5)) - center, d / 8) << corner;
    EXPECT_EQ(oracle::hat_weight(corner, 0.5, 0.5, 0.5), 0.125);
  }
}

TEST(Trilinear, MatchesHatWeightOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1), x(-20, 20);
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<Vec3, 8> k;
    for (auto& p : k) p = Vec3(x(rng), x(rng), x(rng));
    const Vec3 t(u(rng), u(rng), u(rng));
    Vec3 expect = Vec3::Zero();
    for (int c = 0; c < 8; ++c) expect += oracle::hat_weight(c, t.x(), t.y(), t.z()) * k[c];
    EXPECT_LE((trilinear(k, t) - expect).norm(), 1e-12);
  }
}

TEST(Constraints, FreshAssemblyIsClean) {
  EXPECT_TRUE(check_constraints(oracle::egg_session().cage()).empty());
}

TEST(Constraints, HandShearedJointIsFlagged) {
  auto a = bind_cages(shaft_joint_shaft(), ws().library);
  const auto& ids = a.cells()[1].corners;
  for (int i = 4; i < 8; ++i) a.set_position(ids[i], a.rest_positions()[ids[i]] + Vec3(0, 2, 0));
  const auto v = check_constraints(a);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].cell, 1u);
  EXPECT_EQ(v[0].kind, "shear");
  EXPECT_GT(v[0].magnitude, 0);
  EXPECT_NE(v[0].describe().find("shear"), std::string::npos);
}

TEST(Constraints, ShearedFreeCellIsAllowed) {
  auto a = bind_cages(shaft_joint_shaft(), ws().library);
  const auto& ids = a.cells()[0].corners;
  for (int i = 0; i < 4; ++i) EXPECT_NO_THROW(propose_vertex_edit(a, ids[i], a.rest_positions()[ids[i]] + Vec3(4, -3, 0)));
  EXPECT_TRUE(check_constraints(a).empty());
}

TEST(Properties, EditIsLocal) {
  auto s = oracle::egg_session();
  auto a = s.cage();
  const auto rest = deform_meshes(a);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    a.reset();
    const VertexId v = std::uniform_int_distribution<VertexId>(0, static_cast<VertexId>(a.vertex_count() - 1))(rng);
    const auto r = propose_vertex_edit(a, v, a.rest_positions()[v] + Vec3(0.5, -0.25, 0.75));
    std::vector<bool> touched(a.cells().size(), false);
    for (std::size_t c = 0; c < a.cells().size(); ++c) touched[c] = a.dirty(c);
    const auto out = deform_meshes(a);
    for (std::size_t c = 0; c < a.cells().size(); ++c) {
      if (touched[c]) continue;
      EXPECT_EQ(out.print[c].vertices, rest.print[c].vertices) << "cell " << c;
    }
    // Without a joint only the incident cells move.
    if (!r.projected)
      for (std::size_t c = 0; c < a.cells().size(); ++c) {
        const auto& inc = a.cells_of(v);
        EXPECT_EQ(touched[c], std::find(inc.begin(), inc.end(), c) != inc.end()) << "cell " << c;
      }
  }
}

TEST(Properties, MatingFacesStayContinuous) {
  auto s = oracle::egg_session();
  auto a = s.cage();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 1.5);
  std::uniform_int_distribution<VertexId> pick(0, static_cast<VertexId>(a.vertex_count() - 1));
  int accepted = 0;
  for (int i = 0; i < 60; ++i) {
    const VertexId v = pick(rng);
    try {
      propose_vertex_edit(a, v, a.current_positions()[v] + Vec3(n(rng), n(rng), n(rng)));
      ++accepted;
    } catch (const DeformError&) {
    }
  }
  EXPECT_GT(accepted, 30);
  EXPECT_LE(oracle::max_continuity_gap(a, s.design(), rng, 10'000 / static_cast<int>(s.design().edges().size()) + 1), 1e-9);
}

TEST(Properties, RandomEditSequencesStayManufacturable) {
  const auto s = oracle::egg_session();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0, 2.0);
  for (int seq = 0; seq < 40; ++seq) {
    auto a = s.cage();
    std::uniform_int_distribution<VertexId> pick(0, static_cast<VertexId>(a.vertex_count() - 1));
    for (int i = 0; i < 8; ++i) {
      const VertexId v = pick(rng);
      try {
        propose_vertex_edit(a, v, a.current_positions()[v] + Vec3(n(rng), n(rng), n(rng)));
      } catch (const DeformError&) {
      }
    }
    ASSERT_TRUE(check_constraints(a).empty()) << "sequence " << seq;
    const auto parts = meshkit::merge_printable_parts(s.design(), ws().library, deform_meshes(a).print);
    for (const auto& p : parts) ASSERT_TRUE(meshkit::check_watertight(p.mesh).is_watertight) << "sequence " << seq;
  }
}
