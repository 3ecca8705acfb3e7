#include "surad/types.hpp"

#include <cmath>

namespace surad {

int sh_degree_from_count(Eigen::Index n) {
  const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (root < 1 || static_cast<Eigen::Index>(root) * root != n) {
    throw std::invalid_argument("coefficient count " + std::to_string(n) +
                                " is not (L+1)^2 for any degree L");
  }
  return root - 1;
}

Mat3 axis_angle_rotation(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  const Vec3 axis = w / angle;
  const Mat3 k = skew(axis);
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

Direction::Direction(const Vec3& v) {
  if (!v.allFinite()) {
    throw std::invalid_argument("direction has non-finite components");
  }
  const double n = v.norm();
  if (n == 0.0) {
    throw std::invalid_argument("direction is the zero vector");
  }
  v_ = v / n;
}

Direction Direction::operator-() const { return Direction(Vec3(-v_), AlreadyUnit{}); }

}  // namespace surad
