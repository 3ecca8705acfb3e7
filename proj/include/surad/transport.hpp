#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "surad/scene.hpp"
#include "surad/solve_state.hpp"

namespace surad {

struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Product of (1 - alpha_k) over occluding kernels whose plane intersection
// lies strictly inside the segment (parametric (eps, 1-eps)); kernels in
// `exclude` are skipped. Always in (0, 1].
double transmittance(const Scene& scene, const Vec3& from, const Vec3& to,
                     std::optional<std::size_t> exclude_a = std::nullopt,
                     std::optional<std::size_t> exclude_b = std::nullopt);

// Fused decay V from kernel `source` into kernel `receiver`:
//   lambda_j * alpha_integral(j) * transmittance * |n_i.w||n_j.w| / d^2
// with w the unit vector from source to receiver. Point lights drop the
// alpha_integral and source-cosine factors; both faces must see each other
// (reception through the front face only), otherwise 0. Directional lights
// are handled by the gather path, not here.
double decay(const Scene& scene, std::size_t source, std::size_t receiver);

// One visible ordered pair with everything the solvers and the backward pass
// reuse: the decay, the geometric direction, basis evaluations at both ends,
// occluder hits along the segment, and the importance proxy for next-event
// sampling (cosines over squared distance, no transmittance or BRDF).
struct PairEntry {
  std::uint32_t receiver = 0;
  std::uint32_t source = 0;
  double decay = 0.0;
  Vec3 omega = Vec3::Zero();       // unit source -> receiver (directional: light dir)
  double geom_weight = 0.0;
  SHVector ybar_recv;              // Y(-omega) in the receiver frame
  SHVector y_src;                  // Y(omega) in the source frame
  struct OccluderHit {
    std::uint32_t kernel;
    double h;                      // segment parameter in (0,1)
    double alpha;
  };
  std::vector<OccluderHit> occluders;
};

struct PairCache {
  std::vector<PairEntry> entries;  // sorted by (receiver, source)
  // Entry index ranges per receiver and per source, for forward gathers and
  // the reversed (adjoint) traversal respectively.
  std::vector<std::pair<std::size_t, std::size_t>> receiver_range;
  std::vector<std::vector<std::size_t>> by_source;
  std::size_t degenerate_pairs = 0;  // coincident-center pairs, skipped

  const PairEntry* find(std::size_t receiver, std::size_t source) const;
};

// Enumerates exactly the ordered pairs with decay > 0.
PairCache build_pair_cache(const Scene& scene);

// Receiver response vector alpha_i(p_i) * (f^c_i x Ybar_i(omega)) per channel,
// given the cached Ybar evaluation.
ColorSH receiver_response(const Surfel& receiver, const SHVector& ybar);

// Y(omega)^T B in the source frame, one scalar per channel.
RGB source_radiance(const SHVector& y_src, const ColorSH& b);

// Direct illumination gather: sum over light kernels of
// f_i(w) (Y(w)^T E_j) V_ji, with the alpha_i(p_i) absorption folded in.
ColorSH gather_direct(const Scene& scene, std::size_t receiver);

// Single-pair contribution f_i(w) (Y(w)^T B_j) V_ji; linear in B_j.
ColorSH gather_from(const Scene& scene, std::size_t receiver, std::size_t source,
                    const ColorSH& b_source);

// Distributes `unshot` energy from kernel `source` to every receiver, adding
// each contribution to both the accumulated and unshot radiance, then zeroes
// the shooter's unshot.
void shoot(const Scene& scene, std::size_t source, const ColorSH& unshot,
           SolveState& state);

// Same, but driven by a prebuilt cache (bit-identical results).
void shoot_cached(const Scene& scene, const PairCache& cache, std::size_t source,
                  const ColorSH& unshot, SolveState& state);

// Forward gather of a full state through the cache:
//   G_i = alpha_i * sum_j V_ji Ybar_i(w) (Y_j(w)^T B_j)
// so that B_i - E_i = f^c_i x G_i at the fixed point. This is the
// division-free factor reused by the BRDF gradient.
std::vector<ColorSH> forward_gather(const Scene& scene, const PairCache& cache,
                                    const std::vector<ColorSH>& radiosity);

}  // namespace surad
