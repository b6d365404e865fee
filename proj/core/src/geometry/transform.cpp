#include "forge/geometry/transform.hpp"

#include <cmath>

namespace forge::geometry {

PortFrame PortFrame::transformed(const Transform& t) const {
  PortFrame out = *this;
  out.center = t.apply(center);
  out.u = t.apply_direction(u);
  out.v = t.apply_direction(v);
  out.normal = t.apply_direction(normal);
  return out;
}

std::array<Vec3, 4> PortFrame::corners() const {
  const Vec3 du = u * half_size;
  const Vec3 dv = v * half_size;
  return {center - du - dv, center + du - dv, center + du + dv, center - du + dv};
}

Transform mate(const PortFrame& parent_port, const PortFrame& child_port, int roll) {
  // Parent tangent frame turned by `roll` quarter turns about its normal.
  Vec3 pu = parent_port.u;
  Vec3 pv = parent_port.v;
  for (int i = 0; i < ((roll % 4) + 4) % 4; ++i) {
    const Vec3 t = pu;
    pu = pv;
    pv = -t;
  }
  // Target frame for the child's (u, v, n): (pu, -pv, -n) is right-handed.
  Mat3 target;
  target.col(0) = pu;
  target.col(1) = -pv;
  target.col(2) = -parent_port.normal;
  Mat3 source;
  source.col(0) = child_port.u;
  source.col(1) = child_port.v;
  source.col(2) = child_port.normal;
  Transform t;
  t.rotation = target * source.transpose();
  // Snap to the exact signed permutation this is meant to be.
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = std::round(t.rotation(r, c));
  t.translation = parent_port.center - t.rotation * child_port.center;
  return t;
}

Vec3 Box::corner(int index) const {
  return {(index & 1) ? max.x() : min.x(), (index & 2) ? max.y() : min.y(), (index & 4) ? max.z() : min.z()};
}

bool Box::contains(const Vec3& p, double tol) const {
  for (int i = 0; i < 3; ++i)
    if (p[i] < min[i] - tol || p[i] > max[i] + tol) return false;
  return true;
}

Box transform_box(const Box& box, const Transform& t) {
  Box out{t.apply(box.corner(0)), t.apply(box.corner(0))};
  for (int i = 1; i < 8; ++i) {
    const Vec3 p = t.apply(box.corner(i));
    out.min = out.min.cwiseMin(p);
    out.max = out.max.cwiseMax(p);
  }
  return out;
}

}  // namespace forge::geometry
