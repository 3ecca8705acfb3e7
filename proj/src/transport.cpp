#include "surad/transport.hpp"

#include <algorithm>
#include <cmath>

#include "surad/parallel.hpp"

namespace surad {

namespace {

double segment_transmittance(const Scene& scene, const Vec3& from, const Vec3& to,
                             std::optional<std::size_t> exclude_a,
                             std::optional<std::size_t> exclude_b,
                             std::vector<PairEntry::OccluderHit>* hits) {
  const Vec3 seg = to - from;
  const double eps = scene.settings.segment_eps;
  double product = 1.0;
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    if ((exclude_a && *exclude_a == k) || (exclude_b && *exclude_b == k)) continue;
    const Surfel& occ = scene.kernels[k];
    if (!occ.occludes()) continue;
    const Vec3 n = occ.normal();
    const double denom = n.dot(seg);
    if (std::abs(denom) < 1e-14) continue;
    const double h = n.dot(occ.center - from) / denom;
    if (h <= eps || h >= 1.0 - eps) continue;
    const Vec3 hit = from + h * seg;
    const Vec3 rel = hit - occ.center;
    const double u = rel.dot(occ.tangent_u) / occ.scale[0];
    const double v = rel.dot(occ.tangent_v) / occ.scale[1];
    if (u * u + v * v > scene.settings.footprint_cutoff_sq) continue;
    const double alpha = opacity_at(occ, u, v);
    if (alpha <= scene.settings.alpha_min) continue;
    product *= 1.0 - alpha;
    if (hits) hits->push_back({static_cast<std::uint32_t>(k), h, alpha});
  }
  return product;
}

struct PairGeometry {
  double decay = 0.0;
  Vec3 omega = Vec3::Zero();
  double geom_weight = 0.0;
  std::vector<PairEntry::OccluderHit> occluders;
};

// Decay geometry for any source kind; empty when the pair carries no energy.
// Coincident centers set *degenerate instead of producing a pair.
std::optional<PairGeometry> pair_geometry(const Scene& scene, std::size_t source,
                                          std::size_t receiver, bool collect,
                                          bool* degenerate = nullptr) {
  const Surfel& src = scene.kernels[source];
  const Surfel& recv = scene.kernels[receiver];
  PairGeometry out;

  if (src.kind == LightKind::directional) {
    out.omega = src.light_direction();
    const double cos_recv = recv.normal().dot(out.omega);
    if (cos_recv >= 0.0) return std::nullopt;  // light behind the back face
    const double span = 4.0 * scene.bounding_radius() + 1.0;
    const Vec3 far_point = recv.center - span * out.omega;
    out.decay = src.lambda() * (-cos_recv) *
                segment_transmittance(scene, far_point, recv.center, source, receiver,
                                      collect ? &out.occluders : nullptr);
    out.geom_weight = -cos_recv;
    return out.decay > 0.0 ? std::optional<PairGeometry>(std::move(out)) : std::nullopt;
  }

  const Vec3 diff = recv.center - src.center;
  const double dist_sq = diff.squaredNorm();
  if (dist_sq == 0.0) {
    if (degenerate) *degenerate = true;
    return std::nullopt;
  }
  out.omega = diff / std::sqrt(dist_sq);
  const double cos_recv = recv.normal().dot(out.omega);
  if (cos_recv >= 0.0) return std::nullopt;  // source not in the receiver's front hemisphere

  double source_factor = src.lambda();
  double geom = -cos_recv / dist_sq;
  if (src.kind == LightKind::surfel) {
    const double cos_src = src.normal().dot(out.omega);
    if (cos_src <= 0.0) return std::nullopt;  // emission leaves the front face only
    source_factor *= alpha_integral(src) * cos_src;
    geom *= cos_src;
  }
  if (source_factor <= 0.0) return std::nullopt;

  const double tau = segment_transmittance(scene, src.center, recv.center, source,
                                           receiver, collect ? &out.occluders : nullptr);
  out.decay = source_factor * tau * (-cos_recv) / dist_sq;
  out.geom_weight = geom;
  return out.decay > 0.0 ? std::optional<PairGeometry>(std::move(out)) : std::nullopt;
}

SHVector eval_in_frame(const Surfel& s, const Vec3& world_dir, int degree) {
  SHVector y(sh_count(degree));
  if (s.kind == LightKind::surfel) {
    eval_sh_into(s.to_local(world_dir), degree, y.data());
  } else {
    eval_sh_into(world_dir, degree, y.data());  // infinitesimal lights have no frame
  }
  return y;
}

}  // namespace

double transmittance(const Scene& scene, const Vec3& from, const Vec3& to,
                     std::optional<std::size_t> exclude_a,
                     std::optional<std::size_t> exclude_b) {
  if ((to - from).squaredNorm() == 0.0) {
    throw DegenerateGeometryError("transmittance endpoints coincide");
  }
  return segment_transmittance(scene, from, to, exclude_a, exclude_b, nullptr);
}

double decay(const Scene& scene, std::size_t source, std::size_t receiver) {
  if (source == receiver) throw std::invalid_argument("decay: source == receiver");
  if (scene.kernels[source].kind == LightKind::directional ||
      scene.kernels[receiver].kind == LightKind::directional) {
    throw std::invalid_argument("decay: directional lights are handled by the gather path");
  }
  if (!scene.kernels[receiver].is_receiver()) return 0.0;
  if ((scene.kernels[receiver].center - scene.kernels[source].center).squaredNorm() == 0.0) {
    throw DegenerateGeometryError("decay: kernels " + std::to_string(source) + " and " +
                                  std::to_string(receiver) + " have coincident centers");
  }
  const auto geom = pair_geometry(scene, source, receiver, false);
  return geom ? geom->decay : 0.0;
}

const PairEntry* PairCache::find(std::size_t receiver, std::size_t source) const {
  const auto [begin, end] = receiver_range[receiver];
  for (std::size_t e = begin; e < end; ++e) {
    if (entries[e].source == source) return &entries[e];
  }
  return nullptr;
}

PairCache build_pair_cache(const Scene& scene) {
  const std::size_t n = scene.kernel_count();
  const int degree = scene.sh_degree;
  PairCache cache;
  cache.receiver_range.assign(n, {0, 0});
  cache.by_source.assign(n, {});

  // Geometry per receiver in parallel, then one ordered splice.
  std::vector<std::vector<PairEntry>> per_receiver(n);
  std::vector<unsigned char> degenerate_flags(n, 0);
  parallel_for(n, [&](std::size_t i) {
    if (!scene.kernels[i].is_receiver()) return;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      bool degenerate = false;
      auto geom = pair_geometry(scene, j, i, true, &degenerate);
      if (degenerate) degenerate_flags[i] += 1;
      if (!geom) continue;
      PairEntry e;
      e.receiver = static_cast<std::uint32_t>(i);
      e.source = static_cast<std::uint32_t>(j);
      e.decay = geom->decay;
      e.omega = geom->omega;
      e.geom_weight = geom->geom_weight;
      e.occluders = std::move(geom->occluders);
      e.ybar_recv = eval_in_frame(scene.kernels[i], Vec3(-geom->omega), degree);
      e.y_src = eval_in_frame(scene.kernels[j], geom->omega, degree);
      per_receiver[i].push_back(std::move(e));
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = cache.entries.size();
    for (auto& e : per_receiver[i]) cache.entries.push_back(std::move(e));
    cache.receiver_range[i] = {begin, cache.entries.size()};
    cache.degenerate_pairs += degenerate_flags[i];
  }
  for (std::size_t e = 0; e < cache.entries.size(); ++e) {
    cache.by_source[cache.entries[e].source].push_back(e);
  }
  return cache;
}

ColorSH receiver_response(const Surfel& receiver, const SHVector& ybar) {
  ColorSH r = receiver.brdf.colwise() * ybar.array();
  r *= receiver.alpha_center();
  return r;
}

RGB source_radiance(const SHVector& y_src, const ColorSH& b) {
  return (b.matrix().transpose() * y_src).array();
}

ColorSH gather_direct(const Scene& scene, std::size_t receiver) {
  if (!scene.kernels[receiver].is_receiver()) {
    throw std::invalid_argument("gather_direct: receiver must be a surfel kernel");
  }
  ColorSH acc = zero_color_sh(scene.sh_degree);
  for (std::size_t j = 0; j < scene.kernel_count(); ++j) {
    if (j == receiver || !scene.kernels[j].is_light) continue;
    acc += gather_from(scene, receiver, j, scene.kernels[j].emission);
  }
  return acc;
}

ColorSH gather_from(const Scene& scene, std::size_t receiver, std::size_t source,
                    const ColorSH& b_source) {
  if (receiver == source) throw std::invalid_argument("gather_from: receiver == source");
  ColorSH acc = zero_color_sh(scene.sh_degree);
  if (!scene.kernels[receiver].is_receiver()) return acc;
  const auto geom = pair_geometry(scene, source, receiver, false);
  if (!geom) return acc;
  const SHVector ybar = eval_in_frame(scene.kernels[receiver], Vec3(-geom->omega),
                                      scene.sh_degree);
  const SHVector y_src = eval_in_frame(scene.kernels[source], geom->omega, scene.sh_degree);
  const RGB radiance = source_radiance(y_src, b_source);
  const ColorSH response = receiver_response(scene.kernels[receiver], ybar);
  for (int ch = 0; ch < 3; ++ch) {
    acc.col(ch) = response.col(ch) * (geom->decay * radiance[ch]);
  }
  return acc;
}

void shoot(const Scene& scene, std::size_t source, const ColorSH& unshot,
           SolveState& state) {
  if (unshot.abs().maxCoeff() > 0.0) {
    for (std::size_t i = 0; i < scene.kernel_count(); ++i) {
      if (i == source || !scene.kernels[i].is_receiver()) continue;
      const ColorSH delta = gather_from(scene, i, source, unshot);
      state.radiosity[i] += delta;
      state.unshot[i] += delta;
    }
  }
  state.unshot[source].setZero();
}

void shoot_cached(const Scene& scene, const PairCache& cache, std::size_t source,
                  const ColorSH& unshot, SolveState& state) {
  if (unshot.abs().maxCoeff() > 0.0) {
    const auto& outgoing = cache.by_source[source];
    parallel_for(outgoing.size(), [&](std::size_t idx) {
      const PairEntry& e = cache.entries[outgoing[idx]];
      const RGB radiance = source_radiance(e.y_src, unshot);
      const ColorSH response = receiver_response(scene.kernels[e.receiver], e.ybar_recv);
      for (int ch = 0; ch < 3; ++ch) {
        const Eigen::ArrayXd delta = response.col(ch) * (e.decay * radiance[ch]);
        state.radiosity[e.receiver].col(ch) += delta;
        state.unshot[e.receiver].col(ch) += delta;
      }
    });
  }
  state.unshot[source].setZero();
}

std::vector<ColorSH> forward_gather(const Scene& scene, const PairCache& cache,
                                    const std::vector<ColorSH>& radiosity) {
  const std::size_t n = scene.kernel_count();
  std::vector<ColorSH> gather(n, zero_color_sh(scene.sh_degree));
  parallel_for(n, [&](std::size_t i) {
    const auto [begin, end] = cache.receiver_range[i];
    if (begin == end) return;
    ColorSH& g = gather[i];
    for (std::size_t e = begin; e < end; ++e) {
      const PairEntry& entry = cache.entries[e];
      const RGB radiance = source_radiance(entry.y_src, radiosity[entry.source]);
      for (int ch = 0; ch < 3; ++ch) {
        g.col(ch) += entry.ybar_recv.array() * (entry.decay * radiance[ch]);
      }
    }
    g *= scene.kernels[i].alpha_center();
  });
  return gather;
}

SolveState make_solve_state(const Scene& scene) {
  SolveState st;
  st.sh_degree = scene.sh_degree;
  const std::size_t n = scene.kernel_count();
  st.radiosity.assign(n, zero_color_sh(scene.sh_degree));
  st.unshot.assign(n, zero_color_sh(scene.sh_degree));
  st.sum.assign(n, zero_color_sh(scene.sh_degree));
  st.sum_sq.assign(n, zero_color_sh(scene.sh_degree));
  st.visits = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  st.variance_score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  return st;
}

}  // namespace surad
