#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "surad/rng.hpp"

namespace surad::oracle {

SHVector zonal_kernel_coeffs(const std::function<double(double)>& profile, int degree,
                             const QuadratureSpec& spec) {
  const SHVector projected =
      project_function([&](const Vec3& w) { return profile(w.z()); }, degree, spec);
  SHVector out = SHVector::Zero(sh_count(degree));
  for (int l = 0; l <= degree; ++l) {
    const double scale = std::sqrt(4.0 * std::numbers::pi / (2.0 * l + 1.0));
    out[sh_index(l, 0)] = projected[sh_index(l, 0)] * scale;
  }
  return out;
}

SHVector phong_kernel_coeffs_quadrature(const Material& mat, int channel, int degree) {
  const double kd = mat.diffuse_albedo[channel];
  const double ks = mat.specular_albedo[channel];
  const double k = mat.blend;
  const double s = mat.shininess;
  auto profile = [&](double t) {
    double value = k * kd / std::numbers::pi;
    if (t > 0.0) value += (1.0 - k) * ks * (s + 1.0) / (2.0 * std::numbers::pi) *
                          std::pow(t, s);
    return value;
  };
  const SHVector zonal = zonal_kernel_coeffs(profile, degree);
  // Expand the zonal profile to all m with the (-1)^m mirror sign.
  SHVector out = SHVector::Zero(sh_count(degree));
  for (int l = 0; l <= degree; ++l) {
    for (int m = -l; m <= l; ++m) {
      const double sign = std::abs(m) % 2 == 0 ? 1.0 : -1.0;
      out[sh_index(l, m)] = sign * zonal[sh_index(l, 0)];
    }
  }
  return out;
}

double expint_series(double c, int terms) {
  double term = c;
  double sum = c;
  for (int n = 2; n <= terms; ++n) {
    term *= -c / n;
    sum += term / n;
  }
  return sum;
}

namespace {
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2 == 1) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

void gauss_legendre(int nodes, double extent, std::vector<double>& x,
                    std::vector<double>& w) {
  x.assign(nodes, 0.0);
  w.assign(nodes, 0.0);
  for (int i = 0; i < (nodes + 1) / 2; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (nodes + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int l = 2; l <= nodes; ++l) {
        const double p2 = ((2.0 * l - 1.0) * t * p1 - (l - 1.0) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      pp = nodes * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / pp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t * extent;
    x[nodes - 1 - i] = t * extent;
    w[i] = w[nodes - 1 - i] = 2.0 / ((1.0 - t * t) * pp * pp) * extent;
  }
}
}  // namespace

double expint_quadrature(double c) {
  if (c == 0.0) return 0.0;
  auto integrand = [](double y) {
    return y < 1e-8 ? 1.0 - y / 2.0 : (1.0 - std::exp(-y)) / y;
  };
  // Split at 1 so the structure near zero is resolved.
  if (c <= 1.0) return simpson(integrand, 0.0, c, 4096);
  return simpson(integrand, 0.0, 1.0, 4096) + simpson(integrand, 1.0, c, 16384);
}

double alpha_integral_quadrature(const Surfel& s, int nodes, double extent) {
  std::vector<double> x, w;
  gauss_legendre(nodes, extent, x, w);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      acc += w[i] * w[j] * opacity_at(s, x[i], x[j]);
    }
  }
  return acc * s.scale[0] * s.scale[1];
}

double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

Vec3 random_unit(std::uint64_t seed, std::uint64_t index) {
  RngStream rng = RngStream::keyed(seed, index);
  for (;;) {
    const Vec3 v(2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                 2.0 * rng.next_double() - 1.0);
    const double n = v.norm();
    if (n > 1e-3 && n < 1.0) return v / n;
  }
}

}  // namespace surad::oracle
