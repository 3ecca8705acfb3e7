#pragma once

#include <functional>
#include <vector>

#include "surad/types.hpp"

namespace surad {

// Diffuse + Phong mixture. blend = 1 is pure diffuse, 0 pure specular.
struct Material {
  RGB diffuse_albedo = RGB::Constant(0.5);
  RGB specular_albedo = RGB::Zero();
  double shininess = 1.0;
  double blend = 1.0;
};

// Largest shininess the degree-L basis represents accurately.
inline double max_shininess(int degree) {
  return static_cast<double>(sh_count(degree)) / 5.0;
}

// Real fully-normalized basis with Condon-Shortley phase, flattened per
// sh_index. The reflected basis is eval_sh applied to the negated direction.
SHVector eval_sh(const Direction& dir, int degree);

// Raw-pointer path used by the transport inner loops; dir must be unit.
void eval_sh_into(const Vec3& unit_dir, int degree, double* out);

// Per-basis gradient w.r.t. the Cartesian direction, projected onto the
// tangent plane of the sphere at dir (each row is orthogonal to dir).
Eigen::Matrix<double, Eigen::Dynamic, 3> sh_jacobian(const Direction& dir, int degree);
void sh_jacobian_into(const Vec3& unit_dir, int degree,
                      Eigen::Matrix<double, Eigen::Dynamic, 3>& out);

struct QuadratureSpec {
  int n_theta = 64;   // Gauss-Legendre nodes in cos(theta)
  int n_phi = 128;    // uniform nodes in phi
};

// Deterministic product quadrature over the unit sphere.
struct SphereQuadrature {
  std::vector<Vec3> dirs;
  std::vector<double> weights;  // sum to 4*pi
};
SphereQuadrature make_sphere_quadrature(const QuadratureSpec& spec, int degree);

// c_lm = integral of h * Y_lm over the sphere. Throws if the node counts are
// below the floor needed to integrate degree-L polynomials (n_theta > L,
// n_phi > 2L).
SHVector project_function(const std::function<double(const Vec3&)>& h, int degree,
                          const QuadratureSpec& spec = {});

// Closed-form coefficients of the diffuse+Phong BRDF per color channel.
// m-dependence is the (-1)^m sign only; shininess above max_shininess(degree)
// is clamped with a warning.
ColorSH phong_brdf_coeffs(const Material& mat, int degree);

// Zonal profile of the clamped Phong lobe: (s+1)*integral_0^1 t^s P_l(t) dt.
double phong_zonal_coeff(int l, double shininess);

// f(w_in, w_out) = sum_lm c_lm Ybar_lm(w_in) Y_lm(w_out) per channel.
// Directions are expressed in the frame the coefficients live in.
RGB brdf_eval(const ColorSH& fc, const Direction& w_in, const Direction& w_out);

}  // namespace surad
