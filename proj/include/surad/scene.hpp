#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "surad/sh.hpp"
#include "surad/types.hpp"

namespace surad {

enum class LightKind { surfel, point, directional };

// One Gaussian kernel: an oriented 2D Gaussian footprint with material,
// emission, and the compensation factor of the center-to-center transport
// approximation. Point and directional lights are stored as infinitesimal
// kernels (zero scales) that emit but never receive, reflect, or occlude.
struct Surfel {
  Vec3 center = Vec3::Zero();          // directional lights store their travel direction here
  Vec3 tangent_u = Vec3::UnitX();
  Vec3 tangent_v = Vec3::UnitY();
  Vec2 scale = Vec2::Ones();           // s_u, s_v (world lengths)
  double g = 1.0;                      // opacity amplitude, >= 0
  double log_lambda = 0.0;             // compensation factor, stored as log
  Material material;
  ColorSH emission;                    // all-zero for non-lights
  ColorSH brdf;                        // f^c; derived from material at load time
  LightKind kind = LightKind::surfel;
  bool is_light = false;

  Vec3 normal() const { return tangent_u.cross(tangent_v); }
  Mat3 frame() const;                        // columns t_u, t_v, n (local -> world)
  Vec3 to_local(const Vec3& w) const { return frame().transpose() * w; }
  double lambda() const { return std::exp(log_lambda); }
  double alpha_center() const;               // opacity_at(*this, 0, 0)
  bool is_receiver() const { return kind == LightKind::surfel; }
  bool occludes() const { return kind == LightKind::surfel; }
  Vec3 light_direction() const { return center; }  // kind == directional only
};

struct SceneSettings {
  double footprint_cutoff_sq = 9.0;  // ignore footprint beyond u^2+v^2 > 9 (3 sigma)
  double alpha_min = 1e-4;           // occluder hits below this opacity are culled
  double segment_eps = 1e-4;         // endpoint exclusion band for transmittance
};

// Kernels are ordered: geometry surfels first, then point/directional lights.
// Immutable during a solve; mutation happens between solver invocations.
struct Scene {
  int sh_degree = 2;
  std::vector<Surfel> kernels;
  std::size_t surfel_count = 0;
  SceneSettings settings;

  std::size_t kernel_count() const { return kernels.size(); }
  int coeff_count() const { return sh_count(sh_degree); }
  bool has_light() const;
  Vec3 centroid() const;
  double bounding_radius() const;

  // Checks the type invariants; throws std::invalid_argument naming the
  // offending kernel and field.
  void validate() const;
};

// P(u,v) = center + s_u*t_u*u + s_v*t_v*v.
Vec3 tangent_point(const Surfel& s, double u, double v);

// Footprint opacity 1 - exp(-0.03279*(g*exp(-(u^2+v^2)/2))^3.4), in [0,1).
double opacity_at(const Surfel& s, double u, double v);

// integral_0^c (1 - e^-y)/y dy; strictly increasing, 0 at 0.
double expint_lower(double c);

// Closed form of the footprint opacity integral over the tangent plane:
// (2*pi/3.4) * s_u * s_v * expint_lower(0.03279 * g^3.4).
double alpha_integral(const Surfel& s);

// d alpha_integral / dg, used by the backward pass.
double alpha_integral_dg(const Surfel& s);

// d alpha_center / dg.
double alpha_center_dg(const Surfel& s);

struct IntersectionRecord {
  std::size_t surfel = 0;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  double u = 0.0, v = 0.0;
  double alpha = 0.0;
};

// Ray/tangent-plane intersection. Empty when the ray is parallel, behind the
// origin, outside the 3-sigma footprint, or below the alpha_min threshold.
std::optional<IntersectionRecord> ray_intersect(const Surfel& s, std::size_t index,
                                                const Vec3& origin, const Vec3& dir,
                                                const SceneSettings& settings = {});

// Maps a light intensity to the isotropic emission vector (DC term only).
ColorSH isotropic_emission(const RGB& intensity, int degree);

}  // namespace surad
