// Procedural stand-ins for the thirteen default components. Each printed shell
// is a core box inset 1 mm from the cage with a 14 mm square collar running out
// to every port face it owns, so touching neighbours meet only on collar caps.
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "forge/meshkit/library.hpp"

namespace forge::meshkit {

using geometry::Box;
using geometry::PortFrame;
using geometry::Vec3;

namespace {

constexpr double kInset = 1.0;
constexpr double kCollar = 7.0;

PortFrame frame(std::string name, Vec3 center, Vec3 normal, Vec3 u) {
  PortFrame f;
  f.name = std::move(name);
  f.center = center;
  f.normal = normal;
  f.u = u;
  f.v = normal.cross(u);
  return f;
}

int axis_of(const Vec3& n) {
  int a = 0;
  n.cwiseAbs().maxCoeff(&a);
  return a;
}

class ShellBuilder {
 public:
  ShellBuilder(TriMesh& mesh, int shell) : mesh_(mesh), shell_(shell) {}

  void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& outward, const std::string& port = {}) {
    tri(a, b, c, outward, port);
    tri(a, c, d, outward, port);
  }

  void tri(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& outward, const std::string& port = {}) {
    auto ia = index(a), ib = index(b), ic = index(c);
    if ((b - a).cross(c - a).dot(outward) < 0) std::swap(ib, ic);
    mesh_.add_triangle(ia, ib, ic, shell_, port);
  }

 private:
  std::uint32_t index(const Vec3& p) {
    auto [it, fresh] = ids_.try_emplace({p.x(), p.y(), p.z()}, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (fresh) mesh_.vertices.push_back(p);
    return it->second;
  }

  TriMesh& mesh_;
  int shell_;
  std::map<std::array<double, 3>, std::uint32_t> ids_;
};

// Core box [lo, hi] plus a collar per port. Ports lie on the cage faces.
void collared_box(TriMesh& mesh, int shell, const Vec3& lo, const Vec3& hi, const std::vector<PortFrame>& ports) {
  ShellBuilder sb(mesh, shell);
  std::array<std::set<double>, 3> cuts;
  for (int d = 0; d < 3; ++d) {
    cuts[d] = {lo[d], hi[d]};
    for (const auto& p : ports) {
      if (axis_of(p.normal) == d) continue;
      for (double off : {-kCollar, 0.0, kCollar}) {
        const double x = p.center[d] + off;
        if (x > lo[d] && x < hi[d]) cuts[d].insert(x);
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      Vec3 out = Vec3::Zero();
      out[a] = side ? 1 : -1;
      const double level = side ? hi[a] : lo[a];
      const PortFrame* hole = nullptr;
      for (const auto& p : ports)
        if (p.normal.dot(out) > 0.5) hole = &p;
      const std::vector<double> bs(cuts[b].begin(), cuts[b].end()), cs(cuts[c].begin(), cuts[c].end());
      for (std::size_t i = 0; i + 1 < bs.size(); ++i) {
        for (std::size_t j = 0; j + 1 < cs.size(); ++j) {
          if (hole) {
            const double mb = 0.5 * (bs[i] + bs[i + 1]), mc = 0.5 * (cs[j] + cs[j + 1]);
            if (std::abs(mb - hole->center[b]) < kCollar && std::abs(mc - hole->center[c]) < kCollar) continue;
          }
          auto at = [&](double x, double y) {
            Vec3 p;
            p[a] = level;
            p[b] = x;
            p[c] = y;
            return p;
          };
          sb.quad(at(bs[i], cs[j]), at(bs[i + 1], cs[j]), at(bs[i + 1], cs[j + 1]), at(bs[i], cs[j + 1]), out);
        }
      }
    }
  }
  const double steps[3] = {-kCollar, 0.0, kCollar};
  for (const auto& p : ports) {
    const int a = axis_of(p.normal);
    const double inner = p.normal[a] > 0 ? hi[a] : lo[a];
    auto on = [&](double level, double su, double sv) {
      Vec3 q = p.center + su * p.u + sv * p.v;
      q[a] = level;
      return q;
    };
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        sb.quad(on(p.center[a], steps[i], steps[j]), on(p.center[a], steps[i + 1], steps[j]),
                on(p.center[a], steps[i + 1], steps[j + 1]), on(p.center[a], steps[i], steps[j + 1]), p.normal, p.name);
    for (int i = 0; i < 2; ++i) {
      for (double edge : {-kCollar, kCollar}) {
        sb.quad(on(inner, steps[i], edge), on(inner, steps[i + 1], edge), on(p.center[a], steps[i + 1], edge),
                on(p.center[a], steps[i], edge), edge * p.v);
        sb.quad(on(inner, edge, steps[i]), on(inner, edge, steps[i + 1]), on(p.center[a], edge, steps[i + 1]),
                on(p.center[a], edge, steps[i]), edge * p.u);
      }
    }
  }
}

void pin(TriMesh& mesh, int shell, int axis, const Vec3& center, double radius, double half_length) {
  ShellBuilder sb(mesh, shell);
  constexpr int kSegments = 12;
  const int b = (axis + 1) % 3, c = (axis + 2) % 3;
  auto ring = [&](int i, double end) {
    const double t = 2 * std::numbers::pi * (i % kSegments) / kSegments;
    Vec3 p = center;
    p[axis] += end;
    p[b] += radius * std::cos(t);
    p[c] += radius * std::sin(t);
    return p;
  };
  for (int i = 0; i < kSegments; ++i) {
    const double t = 2 * std::numbers::pi * (i + 0.5) / kSegments;
    Vec3 radial = Vec3::Zero();
    radial[b] = std::cos(t);
    radial[c] = std::sin(t);
    sb.quad(ring(i, -half_length), ring(i + 1, -half_length), ring(i + 1, half_length), ring(i, half_length), radial);
    for (double end : {-half_length, half_length}) {
      Vec3 hub = center;
      hub[axis] += end;
      Vec3 out = Vec3::Zero();
      out[axis] = end;
      sb.tri(hub, ring(i, end), ring(i + 1, end), out);
    }
  }
}

PolyMesh knit_box(double z0, double z1) {
  const Box box{{-9, -9, z0}, {9, 9, z1}};
  PolyMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.push_back(box.corner(i));
  m.faces = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  return m;
}

std::vector<PortFrame> palm_ports(bool rolled) {
  return {
      frame("east", {10, 0, 0}, Vec3::UnitX(), Vec3::UnitY()),
      frame("north", {0, 10, 0}, Vec3::UnitY(), Vec3::UnitZ()),
      frame("west", {-10, 0, 0}, -Vec3::UnitX(), Vec3::UnitY()),
      frame("south", {0, -10, 0}, -Vec3::UnitY(), Vec3::UnitZ()),
      frame("up", {0, 0, 10}, Vec3::UnitZ(), rolled ? Vec3::UnitY() : Vec3::UnitX()),
      frame("down", {0, 0, -10}, -Vec3::UnitZ(), Vec3::UnitX()),
  };
}

PortFrame proximal() { return frame("proximal", {0, 0, 0}, -Vec3::UnitZ(), Vec3::UnitX()); }
PortFrame distal(double z) { return frame("distal", {0, 0, z}, Vec3::UnitZ(), Vec3::UnitX()); }

ComponentBundle simple(const std::string& symbol, const Box& cage, std::vector<PortFrame> ports) {
  ComponentBundle b;
  b.symbol = symbol;
  b.cage = cage;
  const Vec3 inset = Vec3::Constant(kInset);
  collared_box(b.print, 0, cage.min + inset, cage.max - inset, ports);
  b.knit = knit_box(cage.min.z(), cage.max.z());
  for (auto& f : ports) b.ports.push_back({std::move(f), 0});
  return b;
}

ComponentBundle joint(const std::string& symbol, int pin_axis) {
  ComponentBundle b;
  b.symbol = symbol;
  b.cage = {{-10, -10, 0}, {10, 10, 20}};
  b.cage_class = CageClass::Joint;
  b.pin_axis = pin_axis;
  collared_box(b.print, 0, {-9, -9, 1}, {9, 9, 6.5}, {proximal()});
  pin(b.print, 1, pin_axis, {0, 0, 10}, 3, 9);
  collared_box(b.print, 2, {-9, -9, 13.5}, {9, 9, 19}, {distal(20)});
  b.knit = knit_box(0, 20);
  b.ports = {{proximal(), 0}, {distal(20), 2}};
  return b;
}

}  // namespace

std::vector<ComponentBundle> placeholder_bundles() {
  const Box cube{{-10, -10, -10}, {10, 10, 10}};
  std::vector<ComponentBundle> out;
  for (const char* s : {"W", "C", "c", "k"}) out.push_back(simple(s, cube, palm_ports(false)));
  out.push_back(simple("n", cube, palm_ports(true)));
  out.push_back(simple("P", {{-10, -10, 0}, {10, 10, 10}}, {proximal()}));
  for (const char* s : {"F", "y"}) {
    out.push_back(simple(s, {{-10, -10, 0}, {10, 10, 20}},
                         {proximal(), frame("b0", {0, 0, 20}, Vec3::UnitZ(), Vec3::UnitX()),
                          frame("b1", {10, 0, 10}, Vec3::UnitX(), Vec3::UnitY()),
                          frame("off", {0, 10, 10}, Vec3::UnitY(), Vec3::UnitZ())}));
  }
  out.push_back(simple("s", {{-10, -10, 0}, {10, 10, 30}}, {proximal(), distal(30)}));
  out.push_back(joint("j", 0));
  out.push_back(joint("a", 1));
  out.push_back(joint("b", 0));
  out.push_back(simple("t", {{-10, -10, 0}, {10, 10, 20}}, {proximal()}));
  return out;
}

void write_placeholder_library(const std::filesystem::path& directory) {
  for (const auto& b : placeholder_bundles()) write_bundle(b, directory);
}

}  // namespace forge::meshkit
