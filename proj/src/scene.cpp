#include "surad/scene.hpp"

#include <cmath>
#include <numbers>

namespace surad {

namespace {
constexpr double kOpacityScale = 0.03279;
constexpr double kOpacityPower = 3.4;
constexpr double kEulerGamma = 0.57721566490153286;

// E1(x) for x > 0 via the modified Lentz continued fraction.
double expint_e1(double x) {
  double b = x + 1.0;
  double c = 1.0 / 1e-290;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 200; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}
}  // namespace

Mat3 Surfel::frame() const {
  Mat3 f;
  f.col(0) = tangent_u;
  f.col(1) = tangent_v;
  f.col(2) = normal();
  return f;
}

double Surfel::alpha_center() const { return opacity_at(*this, 0.0, 0.0); }

bool Scene::has_light() const {
  for (const auto& k : kernels) {
    if (k.is_light) return true;
  }
  return false;
}

Vec3 Scene::centroid() const {
  Vec3 c = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& k : kernels) {
    if (k.kind == LightKind::directional) continue;
    c += k.center;
    ++n;
  }
  return n > 0 ? Vec3(c / static_cast<double>(n)) : c;
}

double Scene::bounding_radius() const {
  const Vec3 c = centroid();
  double r = 0.0;
  for (const auto& k : kernels) {
    if (k.kind == LightKind::directional) continue;
    r = std::max(r, (k.center - c).norm());
  }
  return r > 0.0 ? r : 1.0;
}

void Scene::validate() const {
  const int n_coeff = coeff_count();
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    const Surfel& s = kernels[i];
    const std::string where = "kernels[" + std::to_string(i) + "]";
    if (s.kind == LightKind::surfel) {
      if (std::abs(s.tangent_u.norm() - 1.0) > 1e-6 ||
          std::abs(s.tangent_v.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument(where + ".tangent_u/v: not unit length");
      }
      if (std::abs(s.tangent_u.dot(s.tangent_v)) > 1e-6) {
        throw std::invalid_argument(where + ".tangent_u/v: not orthogonal");
      }
      if (!(s.scale[0] > 0.0) || !(s.scale[1] > 0.0)) {
        throw std::invalid_argument(where + ".scale: must be positive");
      }
    }
    if (s.g < 0.0) throw std::invalid_argument(where + ".g: must be >= 0");
    if (!std::isfinite(s.log_lambda)) {
      throw std::invalid_argument(where + ".lambda: must be positive and finite");
    }
    if (s.emission.rows() != n_coeff || s.brdf.rows() != n_coeff) {
      throw std::invalid_argument(where + ": coefficient count does not match sh_degree");
    }
    if (!s.is_light && s.emission.abs().maxCoeff() != 0.0) {
      throw std::invalid_argument(where + ".emission: non-light kernel must not emit");
    }
  }
}

Vec3 tangent_point(const Surfel& s, double u, double v) {
  return s.center + s.scale[0] * s.tangent_u * u + s.scale[1] * s.tangent_v * v;
}

double opacity_at(const Surfel& s, double u, double v) {
  if (s.g <= 0.0) return 0.0;
  const double footprint = std::exp(-0.5 * (u * u + v * v));
  const double alpha = -std::expm1(-kOpacityScale * std::pow(s.g * footprint, kOpacityPower));
  // Saturate strictly below one so transmittance stays positive.
  return std::min(alpha, 1.0 - 1e-12);
}

double expint_lower(double c) {
  if (c < 0.0 || !std::isfinite(c)) {
    throw std::invalid_argument("expint_lower: argument must be >= 0");
  }
  if (c == 0.0) return 0.0;
  if (c <= 8.0) {
    // Alternating series sum (-1)^(n+1) c^n / (n * n!).
    double term = c;  // n = 1 value of c^n/n!
    double sum = c;
    for (int n = 2; n <= 80; ++n) {
      term *= -c / n;
      const double add = term / n;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return kEulerGamma + std::log(c) + expint_e1(c);
}

double alpha_integral(const Surfel& s) {
  if (s.g <= 0.0 || s.scale[0] <= 0.0 || s.scale[1] <= 0.0) return 0.0;
  const double c = kOpacityScale * std::pow(s.g, kOpacityPower);
  return (2.0 * std::numbers::pi / kOpacityPower) * s.scale[0] * s.scale[1] *
         expint_lower(c);
}

double alpha_integral_dg(const Surfel& s) {
  if (s.g <= 0.0 || s.scale[0] <= 0.0 || s.scale[1] <= 0.0) return 0.0;
  // d/dg expint_lower(c(g)) = (1-e^-c)/c * dc/dg with c = 0.03279 g^3.4.
  const double c = kOpacityScale * std::pow(s.g, kOpacityPower);
  const double dc_dg = kOpacityScale * kOpacityPower * std::pow(s.g, kOpacityPower - 1.0);
  const double integrand = c > 1e-300 ? -std::expm1(-c) / c : 1.0;
  return (2.0 * std::numbers::pi / kOpacityPower) * s.scale[0] * s.scale[1] *
         integrand * dc_dg;
}

double alpha_center_dg(const Surfel& s) {
  if (s.g <= 0.0) return 0.0;
  const double z = kOpacityScale * std::pow(s.g, kOpacityPower);
  return std::exp(-z) * kOpacityScale * kOpacityPower * std::pow(s.g, kOpacityPower - 1.0);
}

std::optional<IntersectionRecord> ray_intersect(const Surfel& s, std::size_t index,
                                                const Vec3& origin, const Vec3& dir,
                                                const SceneSettings& settings) {
  const Vec3 n = s.normal();
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-14) return std::nullopt;
  const double t = n.dot(s.center - origin) / denom;
  if (!(t > 0.0)) return std::nullopt;
  const Vec3 hit = origin + t * dir;
  const Vec3 rel = hit - s.center;
  const double u = rel.dot(s.tangent_u) / s.scale[0];
  const double v = rel.dot(s.tangent_v) / s.scale[1];
  if (u * u + v * v > settings.footprint_cutoff_sq) return std::nullopt;
  const double alpha = opacity_at(s, u, v);
  if (alpha <= settings.alpha_min) return std::nullopt;
  return IntersectionRecord{index, t, hit, u, v, alpha};
}

ColorSH isotropic_emission(const RGB& intensity, int degree) {
  ColorSH e = zero_color_sh(degree);
  // c_00 = 2*sqrt(pi) * I so the evaluated radiance equals I everywhere.
  e.row(0) = (2.0 * std::sqrt(std::numbers::pi) * intensity).transpose();
  return e;
}

}  // namespace surad
