#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>

namespace forge::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid placement. Rotations produced by port mating are signed permutation
/// matrices, so placing integer-coordinate geometry stays exact.
struct Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }
  /// (this * other)(p) = this(other(p)).
  Transform operator*(const Transform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
};

/// A square connection face. `normal` points out of the component; (u, v, normal)
/// is right-handed; the face spans center +- half_size along u and v.
struct PortFrame {
  std::string name;
  Vec3 center = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
  double half_size = 10.0;

  PortFrame transformed(const Transform& t) const;
  /// Corners in order (-u,-v), (+u,-v), (+u,+v), (-u,+v).
  std::array<Vec3, 4> corners() const;
};

/// World transform of a child whose `child_port` (child-local) mates with the
/// world-space `parent_port`: faces coincide, normals oppose, and the child is
/// turned `roll` quarter turns about the parent normal.
Transform mate(const PortFrame& parent_port, const PortFrame& child_port, int roll);

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  double volume() const { return extent().prod(); }
  /// Corner with bits (bx, by, bz) = index & 1, & 2, & 4.
  Vec3 corner(int index) const;
  bool contains(const Vec3& p, double tol) const;
};

/// Axis-aligned bounds of a transformed box.
Box transform_box(const Box& box, const Transform& t);

}  // namespace forge::geometry
