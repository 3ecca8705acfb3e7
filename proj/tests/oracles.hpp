#pragma once

// Test-only oracles, kept independent of the library code paths they check.

#include <functional>

#include "surad/scene.hpp"
#include "surad/sh.hpp"

namespace surad::oracle {

// Funk-Hecke readout: the factored-kernel coefficient c_l0 of a zonal
// function around +z is its SH projection scaled by sqrt(4pi/(2l+1)).
SHVector zonal_kernel_coeffs(const std::function<double(double)>& profile, int degree,
                             const QuadratureSpec& spec = {});

// The diffuse+Phong generating function: constant diffuse plus the clamped
// cosine-power lobe around +z.
SHVector phong_kernel_coeffs_quadrature(const Material& mat, int channel, int degree);

// expint_lower by alternating series with explicit term count.
double expint_series(double c, int terms = 200);

// expint_lower by adaptive Simpson quadrature of (1-e^-y)/y.
double expint_quadrature(double c);

// 2D tensor Gauss-Legendre quadrature of the footprint opacity over the
// tangent plane (world measure).
double alpha_integral_quadrature(const Surfel& s, int nodes = 256, double extent = 6.0);

// Central finite difference of a scalar function.
double central_diff(const std::function<double(double)>& f, double x, double h);

// Deterministic random unit vector.
Vec3 random_unit(std::uint64_t seed, std::uint64_t index);

}  // namespace surad::oracle
