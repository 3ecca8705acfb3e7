#include "surad/sh.hpp"

#include <cmath>
#include <numbers>

#include "surad/log.hpp"

namespace surad {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxTableDegree = 32;

// K(l,m) = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!), stored at l*(l+1)/2 + m.
const std::vector<double>& norm_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t;
    t.reserve((kMaxTableDegree + 1) * (kMaxTableDegree + 2) / 2);
    for (int l = 0; l <= kMaxTableDegree; ++l) {
      double ratio = 1.0;  // (l-m)!/(l+m)!
      for (int m = 0; m <= l; ++m) {
        if (m > 0) ratio /= static_cast<double>((l - m + 1) * (l + m));
        t.push_back(std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio));
      }
    }
    return t;
  }();
  return table;
}

inline double norm_k(int l, int m) { return norm_table()[l * (l + 1) / 2 + m]; }

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxTableDegree) {
    throw std::invalid_argument("sh degree out of range: " + std::to_string(degree));
  }
}

// Scaled associated Legendre P~_l^m(z) = P_l^m(z) / (1-z^2)^(m/2), a
// polynomial in z, with the Condon-Shortley phase folded into the seed.
// Optionally carries d/dz through the same recurrences.
template <bool WithDerivative>
void sh_eval_impl(const Vec3& w, int degree, double* out, double* dx, double* dy,
                  double* dz) {
  const double x = w.x(), y = w.y(), z = w.z();
  const int order = degree + 1;
  const double sqrt2 = std::numbers::sqrt2;

  // (x+iy)^m split into real and imaginary parts.
  double a_prev = 0.0, b_prev = 0.0;  // order m-1
  double a = 1.0, b = 0.0;            // order m

  double pmm = 1.0;  // P~_m^m
  for (int m = 0; m < order; ++m) {
    // Walk l = m .. degree at fixed m.
    double p_prev2 = 0.0, d_prev2 = 0.0;
    double p_prev = pmm, d_prev = 0.0;  // l = m; P~_m^m is constant in z
    for (int l = m; l <= degree; ++l) {
      double p, dp = 0.0;
      if (l == m) {
        p = p_prev;
        dp = d_prev;
      } else if (l == m + 1) {
        p = z * (2.0 * m + 1.0) * p_prev;
        if constexpr (WithDerivative) dp = (2.0 * m + 1.0) * p_prev;
      } else {
        const double inv = 1.0 / (l - m);
        p = ((2.0 * l - 1.0) * z * p_prev - (l + m - 1.0) * p_prev2) * inv;
        if constexpr (WithDerivative) {
          dp = ((2.0 * l - 1.0) * (p_prev + z * d_prev) - (l + m - 1.0) * d_prev2) * inv;
        }
      }
      if (l > m) {
        p_prev2 = p_prev;
        d_prev2 = d_prev;
        p_prev = p;
        d_prev = dp;
      }

      const double k = norm_k(l, m);
      if (m == 0) {
        out[sh_index(l, 0)] = k * p;
        if constexpr (WithDerivative) {
          dx[sh_index(l, 0)] = 0.0;
          dy[sh_index(l, 0)] = 0.0;
          dz[sh_index(l, 0)] = k * dp;
        }
      } else {
        const double kp = sqrt2 * k * p;
        out[sh_index(l, m)] = kp * a;
        out[sh_index(l, -m)] = kp * b;
        if constexpr (WithDerivative) {
          const double kdp = sqrt2 * k * dp;
          dx[sh_index(l, m)] = sqrt2 * k * p * m * a_prev;
          dy[sh_index(l, m)] = -sqrt2 * k * p * m * b_prev;
          dz[sh_index(l, m)] = kdp * a;
          dx[sh_index(l, -m)] = sqrt2 * k * p * m * b_prev;
          dy[sh_index(l, -m)] = sqrt2 * k * p * m * a_prev;
          dz[sh_index(l, -m)] = kdp * b;
        }
      }
    }

    // Advance m: P~_{m+1}^{m+1} = -(2m+1) P~_m^m, (x+iy)^{m+1}.
    pmm *= -(2.0 * m + 1.0);
    a_prev = a;
    b_prev = b;
    const double na = x * a - y * b;
    const double nb = x * b + y * a;
    a = na;
    b = nb;
  }
}

}  // namespace

SHVector eval_sh(const Direction& dir, int degree) {
  check_degree(degree);
  SHVector out(sh_count(degree));
  eval_sh_into(dir.vec(), degree, out.data());
  return out;
}

void eval_sh_into(const Vec3& unit_dir, int degree, double* out) {
  sh_eval_impl<false>(unit_dir, degree, out, nullptr, nullptr, nullptr);
}

Eigen::Matrix<double, Eigen::Dynamic, 3> sh_jacobian(const Direction& dir, int degree) {
  check_degree(degree);
  Eigen::Matrix<double, Eigen::Dynamic, 3> out(sh_count(degree), 3);
  sh_jacobian_into(dir.vec(), degree, out);
  return out;
}

void sh_jacobian_into(const Vec3& unit_dir, int degree,
                      Eigen::Matrix<double, Eigen::Dynamic, 3>& out) {
  const int n = sh_count(degree);
  out.resize(n, 3);
  SHVector value(n), gx(n), gy(n), gz(n);
  sh_eval_impl<true>(unit_dir, degree, value.data(), gx.data(), gy.data(), gz.data());
  // Any smooth extension off the sphere has the same tangent-projected
  // gradient; project out the radial component.
  for (int i = 0; i < n; ++i) {
    Vec3 g(gx[i], gy[i], gz[i]);
    out.row(i) = (g - g.dot(unit_dir) * unit_dir).transpose();
  }
}

SphereQuadrature make_sphere_quadrature(const QuadratureSpec& spec, int degree) {
  if (spec.n_theta <= degree || spec.n_phi <= 2 * degree) {
    throw std::invalid_argument(
        "quadrature spec below floor: need n_theta > L and n_phi > 2L");
  }
  // Gauss-Legendre nodes in z via Newton iteration.
  const int n = spec.n_theta;
  std::vector<double> gl_x(n), gl_w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int l = 2; l <= n; ++l) {
        const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl_x[i] = -x;
    gl_x[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    gl_w[i] = w;
    gl_w[n - 1 - i] = w;
  }

  SphereQuadrature q;
  q.dirs.reserve(static_cast<std::size_t>(n) * spec.n_phi);
  q.weights.reserve(q.dirs.capacity());
  const double dphi = 2.0 * kPi / spec.n_phi;
  for (int i = 0; i < n; ++i) {
    const double z = gl_x[i];
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < spec.n_phi; ++j) {
      const double phi = dphi * j;
      q.dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
      q.weights.push_back(gl_w[i] * dphi);
    }
  }
  return q;
}

SHVector project_function(const std::function<double(const Vec3&)>& h, int degree,
                          const QuadratureSpec& spec) {
  check_degree(degree);
  const SphereQuadrature q = make_sphere_quadrature(spec, degree);
  const int n = sh_count(degree);
  SHVector acc = SHVector::Zero(n);
  SHVector basis(n);
  for (std::size_t i = 0; i < q.dirs.size(); ++i) {
    eval_sh_into(q.dirs[i], degree, basis.data());
    acc += (q.weights[i] * h(q.dirs[i])) * basis;
  }
  return acc;
}

double phong_zonal_coeff(int l, double shininess) {
  if (l == 0) return 1.0;
  const double s = shininess;
  double num = 1.0, den = 1.0;
  if (l % 2 == 1) {
    for (double a = s + 1.0; a >= s - l + 2.0 - 1e-12; a -= 2.0) num *= a;
    for (double a = s + 2.0; a <= s + l + 1.0 + 1e-12; a += 2.0) den *= a;
  } else {
    for (double a = s; a >= s - l + 2.0 - 1e-12; a -= 2.0) num *= a;
    for (double a = s + 3.0; a <= s + l + 1.0 + 1e-12; a += 2.0) den *= a;
  }
  return num / den;
}

ColorSH phong_brdf_coeffs(const Material& mat, int degree) {
  check_degree(degree);
  double s = mat.shininess;
  const double bound = max_shininess(degree);
  if (s > bound) {
    // The clamp only loses energy when a specular component exists.
    if (mat.blend < 1.0 && mat.specular_albedo.maxCoeff() > 0.0) {
      warn("shininess " + std::to_string(s) + " exceeds the degree-" +
           std::to_string(degree) + " bound " + std::to_string(bound) + "; clamping");
    }
    s = bound;
  }

  ColorSH fc = zero_color_sh(degree);
  const RGB dc = 4.0 * mat.blend * mat.diffuse_albedo +
                 (1.0 - mat.blend) * mat.specular_albedo;
  fc.row(0) = dc.transpose();
  const RGB specular = (1.0 - mat.blend) * mat.specular_albedo;
  for (int l = 1; l <= degree; ++l) {
    const double zonal = phong_zonal_coeff(l, s);
    for (int m = -l; m <= l; ++m) {
      const double sign = (std::abs(m) % 2 == 0) ? 1.0 : -1.0;
      fc.row(sh_index(l, m)) = (sign * zonal * specular).transpose();
    }
  }
  return fc;
}

RGB brdf_eval(const ColorSH& fc, const Direction& w_in, const Direction& w_out) {
  const int degree = sh_degree_from_count(fc.rows());
  const int n = sh_count(degree);
  SHVector ybar(n), yout(n);
  eval_sh_into(-w_in.vec(), degree, ybar.data());
  eval_sh_into(w_out.vec(), degree, yout.data());
  RGB result;
  for (int ch = 0; ch < 3; ++ch) {
    result[ch] = (fc.col(ch) * ybar.array()).matrix().dot(yout);
  }
  return result;
}

}  // namespace surad
