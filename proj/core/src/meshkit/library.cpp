#include "forge/meshkit/library.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace forge::meshkit {

using geometry::Box;
using geometry::PortFrame;

int ComponentBundle::shell_count() const {
  int n = 0;
  for (int s : print.shell) n = std::max(n, s + 1);
  return n;
}

const PortSpec* ComponentBundle::find_port(std::string_view name) const {
  for (const auto& p : ports)
    if (p.frame.name == name) return &p;
  return nullptr;
}

const PortSpec& ComponentBundle::port(std::string_view name) const {
  if (const PortSpec* p = find_port(name)) return *p;
  throw LibraryError("component '" + symbol + "' has no port '" + std::string(name) + "'");
}

std::vector<Connection> connectable_pairs(const grammar::RuleSet& rules) {
  int max_k = 1;
  for (const auto* list : {&rules.palm_rules(), &rules.finger_rules()})
    for (const auto& r : *list)
      for (const auto& t : r.adds)
        if (t.k.kind == grammar::KSpec::Kind::Literal) max_k = std::max(max_k, t.k.value);

  std::set<Connection> out;
  for (const auto* list : {&rules.palm_rules(), &rules.finger_rules()}) {
    for (const auto& r : *list) {
      for (const auto& alt : r.lhs) {
        const auto anchor_set = rules.nonleaf_closure(r.relabel.value_or(alt.symbol));
        for (const auto& t : r.adds) {
          const auto parents =
              t.parent == -1 ? anchor_set : rules.nonleaf_closure(r.adds[static_cast<std::size_t>(t.parent)].symbol);
          const auto children = rules.relabel_closure(t.symbol);
          std::vector<std::pair<std::string, std::string>> ports;
          if (t.grid) {
            for (int rot : r.rotations) {
              const auto p = grammar::rotate_grid_port(t.parent_port, rot);
              ports.emplace_back(p, grammar::opposite_grid_port(p));
            }
          } else if (!t.parent_port.empty() && t.parent_port.back() == '#') {
            const auto stem = t.parent_port.substr(0, t.parent_port.size() - 1);
            for (int i = 0; i < max_k; ++i) ports.emplace_back(stem + std::to_string(i), t.child_port);
          } else {
            ports.emplace_back(t.parent_port, t.child_port);
          }
          for (const auto& ps : parents)
            for (const auto& cs : children)
              for (const auto& [pp, cp] : ports) out.insert(Connection{ps, pp, cs, cp, t.roll});
        }
      }
    }
  }
  return {out.begin(), out.end()};
}

namespace {

bool same_point_set(std::vector<geometry::Vec3> a, std::vector<geometry::Vec3> b, double tol) {
  if (a.size() != b.size()) return false;
  for (const auto& p : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const geometry::Vec3& q) { return (p - q).norm() <= tol; });
    if (it == b.end()) return false;
    b.erase(it);
  }
  return true;
}

std::vector<geometry::Vec3> cap_vertices(const ComponentBundle& b, const std::string& port) {
  std::set<std::uint32_t> idx;
  for (std::size_t i = 0; i < b.print.size(); ++i)
    if (b.print.port[i] == port) idx.insert(b.print.triangles[i].begin(), b.print.triangles[i].end());
  std::vector<geometry::Vec3> out;
  for (auto i : idx) out.push_back(b.print.vertices[i]);
  return out;
}

void validate_bundle(const ComponentBundle& b) {
  const std::string who = "component '" + b.symbol + "'";
  try {
    b.print.validate();
  } catch (const MeshError& e) {
    throw LibraryError(who + " print mesh: " + e.what());
  }
  for (int s = 0; s < b.shell_count(); ++s) {
    TriMesh shell;
    shell.vertices = b.print.vertices;
    for (std::size_t i = 0; i < b.print.size(); ++i)
      if (b.print.shell[i] == s) shell.add_triangle(b.print.triangles[i][0], b.print.triangles[i][1], b.print.triangles[i][2]);
    const auto report = check_watertight(shell);
    if (!report.is_watertight) throw LibraryError(who + " print shell " + std::to_string(s) + " is not closed");
    if (signed_volume(shell) <= 0) throw LibraryError(who + " print shell " + std::to_string(s) + " faces inward");
  }
  const geometry::Vec3 ext = b.cage.extent();
  if ((ext.array() <= 0).any()) throw LibraryError(who + " has an empty cage");
  double worst = 0;
  for (const auto& v : b.print.vertices) {
    const geometry::Vec3 below = (b.cage.min - v).cwiseMax(0.0);
    const geometry::Vec3 above = (v - b.cage.max).cwiseMax(0.0);
    worst = std::max(worst, std::max(below.maxCoeff(), above.maxCoeff()));
  }
  if (worst > 1e-9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", worst);
    throw LibraryError(who + " print mesh pokes " + buf + " mm outside its cage");
  }
  if (b.knit.vertices.size() != 8) throw LibraryError(who + " knit mesh must have 8 corner vertices");
  if (b.cage_class == CageClass::Joint && (b.pin_axis < 0 || b.pin_axis > 2))
    throw LibraryError(who + " is a joint without a pin axis");

  std::vector<geometry::Vec3> cage_corners;
  for (int i = 0; i < 8; ++i) cage_corners.push_back(b.cage.corner(i));
  std::set<std::string> names;
  for (const auto& p : b.ports) {
    const PortFrame& f = p.frame;
    if (!names.insert(f.name).second) throw LibraryError(who + " declares port '" + f.name + "' twice");
    if ((f.u.cross(f.v) - f.normal).norm() > 1e-12 || std::abs(f.u.norm() - 1) > 1e-12 || std::abs(f.v.norm() - 1) > 1e-12)
      throw LibraryError(who + " port '" + f.name + "' frame is not right-handed orthonormal");
    for (const auto& c : f.corners())
      if (std::none_of(cage_corners.begin(), cage_corners.end(), [&](const geometry::Vec3& q) { return (c - q).norm() <= 1e-9; }))
        throw LibraryError(who + " port '" + f.name + "' is not a full cage face");
    if (p.shell < 0 || p.shell >= std::max(1, b.shell_count()))
      throw LibraryError(who + " port '" + f.name + "' names a missing shell");
  }
}

}  // namespace

void validate_bundles(const std::map<std::string, ComponentBundle, std::less<>>& bundles, const grammar::RuleSet& rules) {
  for (const auto& s : rules.symbols())
    if (!bundles.count(s.name)) throw LibraryError("missing bundle for symbol '" + s.name + "'");
  for (const auto& [name, b] : bundles) {
    if (b.symbol != name) throw LibraryError("bundle stored as '" + name + "' describes '" + b.symbol + "'");
    validate_bundle(b);
  }
  for (const auto& c : connectable_pairs(rules)) {
    auto pi = bundles.find(c.parent_symbol);
    auto ci = bundles.find(c.child_symbol);
    if (pi == bundles.end() || ci == bundles.end()) continue;
    const ComponentBundle& pb = pi->second;
    const ComponentBundle& cb = ci->second;
    const PortSpec* pp = pb.find_port(c.parent_port);
    const PortSpec* cp = cb.find_port(c.child_port);
    if (!pp) throw LibraryError("component '" + pb.symbol + "' lacks port '" + c.parent_port + "' used by the rules");
    if (!cp) throw LibraryError("component '" + cb.symbol + "' lacks port '" + c.child_port + "' used by the rules");
    const auto t = geometry::mate(pp->frame, cp->frame, c.roll);
    const std::string pair = pb.symbol + "." + c.parent_port + " / " + cb.symbol + "." + c.child_port;
    const auto pc = pp->frame.corners();
    std::vector<geometry::Vec3> child_corners;
    for (const auto& q : cp->frame.corners()) child_corners.push_back(t.apply(q));
    if (!same_point_set({pc.begin(), pc.end()}, child_corners, 1e-9))
      throw LibraryError("mating-port mismatch between " + pair);
    auto child_cap = cap_vertices(cb, c.child_port);
    for (auto& q : child_cap) q = t.apply(q);
    if (!same_point_set(cap_vertices(pb, c.parent_port), child_cap, 1e-9))
      throw LibraryError("print caps do not coincide between " + pair);
  }
}

ComponentLibrary::ComponentLibrary(std::vector<ComponentBundle> bundles, const grammar::RuleSet& rules) {
  for (auto& b : bundles) {
    const std::string name = b.symbol;
    if (!bundles_.emplace(name, std::move(b)).second) throw LibraryError("duplicate bundle for '" + name + "'");
  }
  validate_bundles(bundles_, rules);
}

ComponentLibrary ComponentLibrary::unvalidated(std::vector<ComponentBundle> bundles) {
  ComponentLibrary lib;
  for (auto& b : bundles) {
    const std::string name = b.symbol;
    lib.bundles_.insert_or_assign(name, std::move(b));
  }
  return lib;
}

const ComponentBundle& ComponentLibrary::bundle(std::string_view symbol) const {
  auto it = bundles_.find(symbol);
  if (it == bundles_.end()) throw LibraryError("missing bundle for symbol '" + std::string(symbol) + "'");
  return it->second;
}

namespace {

std::string num(double x) {
  if (x == 0) x = 0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string vec(const geometry::Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

geometry::Vec3 read_vec(std::istringstream& in, const std::string& what) {
  double x, y, z;
  if (!(in >> x >> y >> z)) throw LibraryError("ports: '" + what + "' needs three numbers");
  return {x, y, z};
}

MeshFile box_mesh(const Box& box) {
  MeshFile m;
  for (int i = 0; i < 8; ++i) m.vertices.push_back(box.corner(i));
  m.faces = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  m.shell.assign(6, 0);
  m.port.assign(6, "");
  return m;
}

}  // namespace

ComponentBundle read_bundle(const std::filesystem::path& directory, const std::string& symbol) {
  const auto dir = directory / symbol;
  if (!std::filesystem::is_directory(dir)) throw LibraryError("missing bundle for symbol '" + symbol + "'");
  ComponentBundle b;
  b.symbol = symbol;
  try {
    b.print = read_mesh_file(dir / "print.mesh").triangulated();
    const MeshFile cage = read_mesh_file(dir / "cage.mesh");
    if (cage.vertices.size() != 8) throw LibraryError("component '" + symbol + "' cage must have 8 vertices");
    b.cage = {cage.vertices[0], cage.vertices[0]};
    for (const auto& v : cage.vertices) {
      b.cage.min = b.cage.min.cwiseMin(v);
      b.cage.max = b.cage.max.cwiseMax(v);
    }
    for (int i = 0; i < 8; ++i)
      if ((cage.vertices[static_cast<std::size_t>(i)] - b.cage.corner(i)).norm() > 1e-12)
        throw LibraryError("component '" + symbol + "' cage is not an axis-aligned box in corner order");
    b.knit = read_mesh_file(dir / "knit.mesh").poly();
  } catch (const MeshError& e) {
    throw LibraryError(e.what());
  }

  std::ifstream in(dir / "ports.txt");
  if (!in) throw LibraryError("component '" + symbol + "' has no ports.txt");
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw) || kw[0] == '#') continue;
    if (!header) {
      int version = 0;
      if (kw != "forge-ports" || !(ls >> version) || version != 1)
        throw LibraryError("component '" + symbol + "' ports.txt has a bad header");
      header = true;
    } else if (kw == "class") {
      std::string cls;
      ls >> cls;
      if (cls == "free") {
        b.cage_class = CageClass::Free;
      } else if (cls == "joint") {
        std::string axis;
        ls >> axis;
        b.cage_class = CageClass::Joint;
        b.pin_axis = axis == "x" ? 0 : axis == "y" ? 1 : axis == "z" ? 2 : -1;
      } else {
        throw LibraryError("component '" + symbol + "' has unknown class '" + cls + "'");
      }
    } else if (kw == "port") {
      PortSpec p;
      ls >> p.frame.name;
      std::string key;
      while (ls >> key) {
        if (key == "center") {
          p.frame.center = read_vec(ls, key);
        } else if (key == "normal") {
          p.frame.normal = read_vec(ls, key);
        } else if (key == "u") {
          p.frame.u = read_vec(ls, key);
        } else if (key == "half") {
          ls >> p.frame.half_size;
        } else if (key == "shell") {
          ls >> p.shell;
        } else {
          throw LibraryError("component '" + symbol + "' port has unknown key '" + key + "'");
        }
      }
      p.frame.v = p.frame.normal.cross(p.frame.u);
      b.ports.push_back(std::move(p));
    } else {
      throw LibraryError("component '" + symbol + "' ports.txt has unknown record '" + kw + "'");
    }
  }
  return b;
}

void write_bundle(const ComponentBundle& b, const std::filesystem::path& directory) {
  const auto dir = directory / b.symbol;
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw LibraryError("cannot write " + (dir / name).string());
    out << text;
  };
  MeshFile print;
  print.vertices = b.print.vertices;
  for (std::size_t i = 0; i < b.print.size(); ++i) {
    print.faces.push_back({b.print.triangles[i].begin(), b.print.triangles[i].end()});
    print.shell.push_back(b.print.shell[i]);
    print.port.push_back(b.print.port[i]);
  }
  write("print.mesh", format_mesh(print));
  write("cage.mesh", format_mesh(box_mesh(b.cage)));
  MeshFile knit;
  knit.vertices = b.knit.vertices;
  knit.faces = b.knit.faces;
  knit.shell.assign(knit.faces.size(), 0);
  knit.port.assign(knit.faces.size(), "");
  write("knit.mesh", format_mesh(knit));

  std::string ports = "forge-ports 1\n";
  if (b.cage_class == CageClass::Joint) {
    ports += std::string("class joint ") + "xyz"[b.pin_axis] + "\n";
  } else {
    ports += "class free\n";
  }
  for (const auto& p : b.ports)
    ports += "port " + p.frame.name + " center " + vec(p.frame.center) + " normal " + vec(p.frame.normal) + " u " +
             vec(p.frame.u) + " half " + num(p.frame.half_size) + " shell " + std::to_string(p.shell) + "\n";
  write("ports.txt", ports);
}

ComponentLibrary load_component_library(const std::filesystem::path& directory, const grammar::RuleSet& rules) {
  if (!std::filesystem::is_directory(directory))
    throw LibraryError("component library directory " + directory.string() + " does not exist");
  std::vector<ComponentBundle> bundles;
  for (const auto& s : rules.symbols()) bundles.push_back(read_bundle(directory, s.name));
  return ComponentLibrary(std::move(bundles), rules);
}

}  // namespace forge::meshkit
