#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>

namespace surad {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using RGB = Eigen::Array3d;

// Coefficient vector of one spherical function, (l,m) flattened as
// (0,0),(1,-1),(1,0),(1,1),...,(L,L).
using SHVector = Eigen::VectorXd;

// One coefficient vector per color channel; rows are coefficients,
// columns are R,G,B. Array semantics so element-wise products read naturally.
using ColorSH = Eigen::ArrayX3d;

constexpr int sh_count(int degree) { return (degree + 1) * (degree + 1); }
constexpr int sh_index(int l, int m) { return l * l + l + m; }

// Inverse of sh_count; throws if n is not a perfect square.
int sh_degree_from_count(Eigen::Index n);

inline ColorSH zero_color_sh(int degree) {
  return ColorSH::Zero(sh_count(degree), 3);
}

inline double rec709_luminance(const RGB& c) {
  return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2];
}

// Rodrigues rotation for an axis-angle vector (angle = |w|).
Mat3 axis_angle_rotation(const Vec3& w);

inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// Unit direction. Construction normalizes and rejects non-finite input.
class Direction {
 public:
  explicit Direction(const Vec3& v);
  Direction(double x, double y, double z) : Direction(Vec3(x, y, z)) {}

  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }
  Direction operator-() const;

 private:
  struct AlreadyUnit {};
  Direction(const Vec3& v, AlreadyUnit) : v_(v) {}
  Vec3 v_;
};

}  // namespace surad
