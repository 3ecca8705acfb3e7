#include "surad/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <limits>
#include <numbers>

#include "surad/parallel.hpp"

namespace surad {

namespace {

std::atomic<std::uint64_t> g_solve_count{0};

double clamp_luminance(const RGB& c) { return std::max(0.0, rec709_luminance(c)); }

// One directed flow along a cache entry. Forward transport moves energy
// source -> receiver; the dual system moves gradient receiver -> source along
// the same entry with the same decay, which is the reversed-decay rule.
struct Flow {
  std::size_t from, to;
  const SHVector* eval_from;
  const SHVector* resp_to;
  double decay;
  double geom_weight;
};

Flow flow_of(const PairEntry& e, bool dual) {
  if (!dual) return {e.source, e.receiver, &e.y_src, &e.ybar_recv, e.decay, e.geom_weight};
  return {e.receiver, e.source, &e.ybar_recv, &e.y_src, e.decay, e.geom_weight};
}

// Entry indices whose flow arrives at kernel k.
const std::vector<std::size_t>* inflow_list(const detail::SystemView& sys, std::size_t k,
                                            std::vector<std::size_t>& scratch) {
  if (sys.dual) return &sys.cache->by_source[k];
  const auto [begin, end] = sys.cache->receiver_range[k];
  scratch.clear();
  for (std::size_t e = begin; e < end; ++e) scratch.push_back(e);
  return &scratch;
}

// Entry indices whose flow leaves kernel k.
const std::vector<std::size_t>* outflow_list(const detail::SystemView& sys, std::size_t k,
                                             std::vector<std::size_t>& scratch) {
  if (!sys.dual) return &sys.cache->by_source[k];
  const auto [begin, end] = sys.cache->receiver_range[k];
  scratch.clear();
  for (std::size_t e = begin; e < end; ++e) scratch.push_back(e);
  return &scratch;
}

double estimate_weight(const detail::SystemView& sys, const SHVector& eval,
                       const ColorSH& mean) {
  const RGB toward = (mean.matrix().transpose() * eval).array();
  if (sys.gradient_norm_weights) return toward.matrix().norm();
  return clamp_luminance(toward);
}

std::optional<NextEventSample> system_next_event(const detail::SystemView& sys,
                                                 const std::vector<ColorSH>& means,
                                                 std::size_t receiver,
                                                 const Grouping* grouping, RngStream& rng);

void system_shoot(const detail::SystemView& sys, std::size_t shooter, SolveState& st) {
  const ColorSH u = st.unshot[shooter];
  st.unshot[shooter].setZero();
  if (u.abs().maxCoeff() == 0.0) return;
  std::vector<std::size_t> scratch;
  const auto* out = outflow_list(sys, shooter, scratch);
  parallel_for(out->size(), [&](std::size_t idx) {
    const Flow f = flow_of(sys.cache->entries[(*out)[idx]], sys.dual);
    if (!sys.active(f.to)) return;
    const RGB rad = (u.matrix().transpose() * *f.eval_from).array();
    const ColorSH resp = receiver_response(sys.scene->kernels[f.to], *f.resp_to);
    for (int ch = 0; ch < 3; ++ch) {
      const Eigen::ArrayXd delta = resp.col(ch) * (f.decay * rad[ch]);
      st.radiosity[f.to].col(ch) += delta;
      st.unshot[f.to].col(ch) += delta;
    }
  });
}

int resolve_group_count(const McOptions& opt, std::size_t n) {
  if (opt.n_groups > 0) return std::min<int>(opt.n_groups, static_cast<int>(n));
  return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
}

Eigen::VectorXd selection_scores(const detail::SystemView& sys, const SolveState& st,
                                 const std::vector<std::size_t>& active) {
  const RGB w = sys.gradient_norm_weights
                    ? RGB::Constant(1.0 / 3.0)
                    : RGB(0.2126, 0.7152, 0.0722);
  Eigen::VectorXd scores(static_cast<Eigen::Index>(active.size()));
  for (std::size_t a = 0; a < active.size(); ++a) {
    const std::size_t k = active[a];
    const double d = st.visits[static_cast<Eigen::Index>(k)];
    double s = 0.0;
    if (d >= 2.0) {
      const ColorSH mean = st.sum[k] / d;
      const ColorSH var = (st.sum_sq[k] / d - mean * mean).max(0.0);
      for (int ch = 0; ch < 3; ++ch) s += w[ch] * var.col(ch).sum();
    }
    scores[static_cast<Eigen::Index>(a)] = s;
  }
  return scores;
}

}  // namespace

std::uint64_t transport_solve_count() { return g_solve_count.load(); }

void ReservoirSampler::offer(std::size_t index, double weight) {
  if (!(weight > 0.0)) return;
  total_ += weight;
  if (rng_->next_double() * total_ < weight) {
    selected_ = index;
    selected_weight_ = weight;
  }
}

double ReservoirSampler::probability() const {
  return selected_ ? selected_weight_ / total_ : 0.0;
}

Grouping group_kernels(const Scene& scene, const std::vector<ColorSH>& radiosity,
                       int n_groups, int iterations) {
  const std::size_t n = scene.kernel_count();
  if (n_groups < 1 || static_cast<std::size_t>(n_groups) > n) {
    throw std::invalid_argument("group_kernels: n_groups must lie in [1, N]");
  }
  const Vec3 centroid = scene.centroid();
  const double radius = scene.bounding_radius();
  using Feature = Eigen::Matrix<double, 6, 1>;
  std::vector<Feature> features(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Surfel& s = scene.kernels[k];
    Feature f;
    const Vec3 pos = s.kind == LightKind::directional
                         ? Vec3(centroid - 4.0 * radius * s.light_direction())
                         : s.center;
    f.head<3>() = pos;
    f.tail<3>() = s.kind == LightKind::surfel ? Vec3(s.normal() * (radius / 4.0))
                                              : Vec3::Zero();
    features[k] = f;
  }

  // Deterministic farthest-point seeding.
  std::vector<Feature> centers;
  Feature mean = Feature::Zero();
  for (const auto& f : features) mean += f;
  mean /= static_cast<double>(n);
  std::size_t seed = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = (features[k] - mean).squaredNorm();
    if (d > best) {
      best = d;
      seed = k;
    }
  }
  centers.push_back(features[seed]);
  while (static_cast<int>(centers.size()) < n_groups) {
    std::size_t far = 0;
    best = -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d = std::min(d, (features[k] - c).squaredNorm());
      if (d > best) {
        best = d;
        far = k;
      }
    }
    centers.push_back(features[far]);
  }

  std::vector<int> assign(n, 0);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      int bg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int g = 0; g < n_groups; ++g) {
        const double d = (features[k] - centers[g]).squaredNorm();
        if (d < bd) {
          bd = d;
          bg = g;
        }
      }
      assign[k] = bg;
    }
    std::vector<Feature> sums(n_groups, Feature::Zero());
    std::vector<int> counts(n_groups, 0);
    for (std::size_t k = 0; k < n; ++k) {
      sums[assign[k]] += features[k];
      counts[assign[k]] += 1;
    }
    for (int g = 0; g < n_groups; ++g) {
      if (counts[g] > 0) {
        centers[g] = sums[g] / counts[g];
        continue;
      }
      // Re-seed an empty group with the point farthest from its own center.
      std::size_t far = 0;
      best = -1.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (counts[assign[k]] <= 1) continue;
        const double d = (features[k] - centers[assign[k]]).squaredNorm();
        if (d > best) {
          best = d;
          far = k;
        }
      }
      counts[assign[far]] -= 1;
      assign[far] = g;
      counts[g] = 1;
      centers[g] = features[far];
    }
  }

  Grouping out;
  out.n_groups = n_groups;
  out.group_of = assign;
  out.mean_center.assign(n_groups, Vec3::Zero());
  out.mean_normal.assign(n_groups, Vec3::Zero());
  out.summed_radiosity.assign(n_groups, zero_color_sh(scene.sh_degree));
  out.summed_luminance.assign(n_groups, 0.0);
  std::vector<int> counts(n_groups, 0);
  const double dc = 2.0 * std::sqrt(std::numbers::pi);
  for (std::size_t k = 0; k < n; ++k) {
    const int g = assign[k];
    counts[g] += 1;
    out.mean_center[g] += features[k].head<3>();
    if (scene.kernels[k].kind == LightKind::surfel) {
      out.mean_normal[g] += scene.kernels[k].normal();
    }
    out.summed_radiosity[g] += radiosity[k];
    out.summed_luminance[g] +=
        std::max(0.0, rec709_luminance(RGB(radiosity[k].row(0).transpose()) / dc));
  }
  for (int g = 0; g < n_groups; ++g) {
    if (counts[g] > 0) out.mean_center[g] /= counts[g];
    const double len = out.mean_normal[g].norm();
    if (len > 1e-12) out.mean_normal[g] /= len;
  }
  return out;
}

namespace {

std::optional<NextEventSample> system_next_event(const detail::SystemView& sys,
                                                 const std::vector<ColorSH>& means,
                                                 std::size_t receiver,
                                                 const Grouping* grouping, RngStream& rng) {
  const PairCache& cache = *sys.cache;
  std::vector<std::size_t> scratch;
  const auto* candidates = inflow_list(sys, receiver, scratch);
  if (candidates->empty()) return std::nullopt;

  auto member_weight = [&](std::size_t entry_idx) {
    const Flow f = flow_of(cache.entries[entry_idx], sys.dual);
    return estimate_weight(sys, *f.eval_from, means[f.from]) * f.geom_weight;
  };

  if (grouping == nullptr) {
    ReservoirSampler sampler(rng);
    for (std::size_t idx : *candidates) sampler.offer(idx, member_weight(idx));
    if (!sampler.has_selection()) return std::nullopt;
    const Flow f = flow_of(cache.entries[sampler.index()], sys.dual);
    return NextEventSample{sampler.index(), f.from, sampler.probability()};
  }

  // Two-level sampling: pick a group from its proxy (summed estimate at the
  // averaged center and normal), then a member with the exact weights.
  const Scene& scene = *sys.scene;
  const Surfel& recv = scene.kernels[receiver];
  const double dist_floor = 1e-12 * scene.bounding_radius() * scene.bounding_radius();
  ReservoirSampler group_sampler(rng);
  const int degree = scene.sh_degree;
  SHVector y(sh_count(degree));
  for (int g = 0; g < grouping->n_groups; ++g) {
    const Vec3 diff = recv.center - grouping->mean_center[g];
    const double d2 = std::max(diff.squaredNorm(), dist_floor);
    const Vec3 omega = diff / std::sqrt(d2);
    eval_sh_into(omega, degree, y.data());
    const double emit = estimate_weight(sys, y, grouping->summed_radiosity[g]);
    double geom = std::abs(recv.normal().dot(omega)) / d2;
    if (grouping->mean_normal[g].norm() > 1e-12) {
      geom *= std::abs(grouping->mean_normal[g].dot(omega));
    }
    group_sampler.offer(static_cast<std::size_t>(g), emit * geom);
  }
  if (!group_sampler.has_selection()) return std::nullopt;
  const int chosen = static_cast<int>(group_sampler.index());

  ReservoirSampler member_sampler(rng);
  for (std::size_t idx : *candidates) {
    const Flow f = flow_of(cache.entries[idx], sys.dual);
    if (grouping->group_of[f.from] != chosen) continue;
    member_sampler.offer(idx, member_weight(idx));
  }
  if (!member_sampler.has_selection()) return std::nullopt;
  const Flow f = flow_of(cache.entries[member_sampler.index()], sys.dual);
  return NextEventSample{member_sampler.index(), f.from,
                         group_sampler.probability() * member_sampler.probability()};
}

}  // namespace

std::optional<NextEventSample> next_event(const Scene& scene, const PairCache& cache,
                                          const std::vector<ColorSH>& means,
                                          std::size_t receiver, const Grouping* grouping,
                                          RngStream& rng) {
  detail::SystemView view;
  view.scene = &scene;
  view.cache = &cache;
  return system_next_event(view, means, receiver, grouping, rng);
}

namespace detail {

SystemView SystemView::forward_full(const Scene& scene, const PairCache& cache) {
  SystemView v;
  v.scene = &scene;
  v.cache = &cache;
  v.pinned.assign(scene.kernel_count(), false);
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    v.pinned[k] = scene.kernels[k].is_light && !scene.kernels[k].is_receiver();
  }
  return v;
}

SystemView SystemView::forward_residual(const Scene& scene, const PairCache& cache,
                                        const std::vector<ColorSH>& residual_emission) {
  SystemView v = forward_full(scene, cache);
  v.emission = &residual_emission;
  return v;
}

SystemView SystemView::dual_system(const Scene& scene, const PairCache& cache,
                                   const std::vector<ColorSH>& weighted_gradient) {
  SystemView v;
  v.scene = &scene;
  v.cache = &cache;
  v.dual = true;
  v.gradient_norm_weights = true;
  v.emission = &weighted_gradient;
  v.pinned.assign(scene.kernel_count(), false);
  return v;
}

bool SystemView::active(std::size_t k) const {
  return scene->kernels[k].is_receiver() && !pinned[k];
}

std::vector<ColorSH> plain_gather(const SystemView& sys, const std::vector<ColorSH>& x) {
  const Scene& scene = *sys.scene;
  const std::size_t n = scene.kernel_count();
  std::vector<ColorSH> out(n, zero_color_sh(scene.sh_degree));
  parallel_for(n, [&](std::size_t k) {
    std::vector<std::size_t> scratch;
    const auto* in = inflow_list(sys, k, scratch);
    for (std::size_t idx : *in) {
      const Flow f = flow_of(sys.cache->entries[idx], sys.dual);
      const RGB rad = (x[f.from].matrix().transpose() * *f.eval_from).array();
      for (int ch = 0; ch < 3; ++ch) {
        out[k].col(ch) += f.resp_to->array() * (f.decay * rad[ch]);
      }
    }
  });
  return out;
}

SolveState pr_core(const SystemView& sys, const ProgressiveTermination& term) {
  const Scene& scene = *sys.scene;
  SolveState st = make_solve_state(scene);
  st.solver = sys.dual ? "pr-dual" : "pr";
  const std::size_t n = scene.kernel_count();
  for (std::size_t k = 0; k < n; ++k) {
    st.radiosity[k] = (*sys.emission)[k];
    st.unshot[k] = (*sys.emission)[k];
  }
  const std::size_t cap = static_cast<std::size_t>(std::max(0, term.max_sweeps)) * n;
  std::size_t shots = 0;
  while (shots < cap) {
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double score = st.unshot[k].matrix().norm();
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    if (best_score <= term.unshot_threshold) break;
    system_shoot(sys, best, st);
    ++shots;
  }
  st.steps = static_cast<int>(shots);
  return st;
}

SolveState mc_core(const SystemView& sys, int steps, std::uint64_t seed,
                   const McOptions& options) {
  if (steps < 1) throw std::invalid_argument("mc solver: steps must be >= 1");
  const Scene& scene = *sys.scene;
  const std::size_t n = scene.kernel_count();
  SolveState st = make_solve_state(scene);
  st.solver = sys.dual ? "mc-dual" : "mc";
  st.steps = steps;
  st.seed = seed;

  std::vector<ColorSH> means(n, zero_color_sh(scene.sh_degree));
  for (std::size_t k = 0; k < n; ++k) {
    if (sys.pinned[k]) means[k] = (*sys.emission)[k];
  }
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < n; ++k) {
    if (sys.active(k)) active.push_back(k);
  }

  Grouping grouping;
  const bool grouped = options.use_grouping && n >= 4;

  std::vector<std::size_t> slots;
  std::vector<ColorSH> deltas;
  for (int t = 1; t <= steps && !active.empty(); ++t) {
    if (grouped && (t - 1) % std::max(1, options.regroup_interval) == 0) {
      grouping = group_kernels(scene, means, resolve_group_count(options, n),
                               options.kmeans_iterations);
    }

    // Kernel selection: everything for the first 8 steps, then proportional
    // to the tracked variance with a small floor so no kernel starves.
    slots.clear();
    if (t <= 8) {
      slots = active;
    } else {
      const Eigen::VectorXd scores = selection_scores(sys, st, active);
      const double total_score = scores.sum();
      const double floor = 1e-6 * total_score / static_cast<double>(active.size());
      Eigen::VectorXd cdf(scores.size());
      double acc = 0.0;
      for (Eigen::Index i = 0; i < scores.size(); ++i) {
        acc += total_score > 0.0 ? scores[i] + floor : 1.0;
        cdf[i] = acc;
      }
      RngStream select_rng = RngStream::keyed(seed, static_cast<std::uint64_t>(t), 0);
      for (std::size_t d = 0; d < active.size(); ++d) {
        const double u = select_rng.next_double() * acc;
        const auto it = std::upper_bound(cdf.data(), cdf.data() + cdf.size(), u);
        const Eigen::Index pick = std::min<Eigen::Index>(it - cdf.data(), cdf.size() - 1);
        slots.push_back(active[static_cast<std::size_t>(pick)]);
      }
    }

    // Snapshot reads: every slot sees the means from the end of step t-1.
    deltas.assign(slots.size(), ColorSH());
    parallel_chunks(slots.size(), 16, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t s = begin; s < end; ++s) {
        const std::size_t r = slots[s];
        RngStream rng = RngStream::keyed(seed, static_cast<std::uint64_t>(t),
                                         1 + static_cast<std::uint64_t>(s));
        ColorSH delta = (*sys.emission)[r];
        const auto ne = system_next_event(sys, means, r, grouped ? &grouping : nullptr, rng);
        if (ne) {
          const Flow f = flow_of(sys.cache->entries[ne->entry_index], sys.dual);
          const RGB rad = (means[f.from].matrix().transpose() * *f.eval_from).array();
          const ColorSH resp = receiver_response(scene.kernels[r], *f.resp_to);
          const double scale = f.decay / ne->probability;
          for (int ch = 0; ch < 3; ++ch) delta.col(ch) += resp.col(ch) * (scale * rad[ch]);
        }
        deltas[s] = std::move(delta);
      }
    });

    // Merge in slot order, then refresh the touched means.
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const std::size_t r = slots[s];
      st.sum[r] += deltas[s];
      st.sum_sq[r] += deltas[s] * deltas[s];
      st.visits[static_cast<Eigen::Index>(r)] += 1.0;
    }
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const std::size_t r = slots[s];
      means[r] = st.sum[r] / st.visits[static_cast<Eigen::Index>(r)];
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (sys.pinned[k]) {
      st.radiosity[k] = (*sys.emission)[k];
    } else if (st.visits[static_cast<Eigen::Index>(k)] > 0.0) {
      st.radiosity[k] = st.sum[k] / st.visits[static_cast<Eigen::Index>(k)];
    }
  }
  const Eigen::VectorXd final_scores = selection_scores(sys, st, active);
  for (std::size_t a = 0; a < active.size(); ++a) {
    st.variance_score[static_cast<Eigen::Index>(active[a])] = final_scores[a];
  }
  return st;
}

SolveState hybrid_core(const SystemView& sys, int steps, std::uint64_t seed,
                       const McOptions& options) {
  const Scene& scene = *sys.scene;
  const std::size_t n = scene.kernel_count();
  SolveState st = make_solve_state(scene);
  for (std::size_t k = 0; k < n; ++k) {
    st.radiosity[k] = (*sys.emission)[k];
    st.unshot[k] = (*sys.emission)[k];
  }
  // One shooting pass over the kernels with system emission.
  for (std::size_t k = 0; k < n; ++k) {
    if ((*sys.emission)[k].abs().maxCoeff() > 0.0) system_shoot(sys, k, st);
  }
  std::vector<ColorSH> b_hat = st.radiosity;
  std::vector<ColorSH> delta = st.unshot;

  SystemView residual = sys;
  residual.emission = &delta;
  SolveState mc = mc_core(residual, steps, seed, options);

  for (std::size_t k = 0; k < n; ++k) {
    mc.radiosity[k] = b_hat[k] + mc.radiosity[k] - delta[k];
    mc.unshot[k].setZero();
  }
  mc.solver = sys.dual ? "hybrid-dual" : "hybrid";
  return mc;
}

}  // namespace detail

namespace {

// Power-iteration estimate of the spectral radius; the Neumann series (and
// the stochastic solvers) converge only below one.
double spectral_radius_estimate(const Eigen::MatrixXd& a) {
  Eigen::VectorXd v(a.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = 1.0 + 1e-3 * static_cast<double>(i % 17);
  }
  v.normalize();
  double radius = 0.0;
  for (int it = 0; it < 128; ++it) {
    const Eigen::VectorXd w = a * v;
    const double n = w.norm();
    if (n < 1e-300) return 0.0;
    v = w / n;
    radius = n;
  }
  return radius;
}

}  // namespace

Eigen::MatrixXd assemble_transport_matrix(const Scene& scene, const PairCache& cache,
                                          int channel) {
  const int k = scene.coeff_count();
  const Eigen::Index dim = static_cast<Eigen::Index>(scene.kernel_count()) * k;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (const PairEntry& e : cache.entries) {
    const Surfel& recv = scene.kernels[e.receiver];
    const Eigen::VectorXd resp =
        recv.alpha_center() * (recv.brdf.col(channel) * e.ybar_recv.array()).matrix();
    a.block(e.receiver * k, e.source * k, k, k) += (e.decay * resp) * e.y_src.transpose();
  }
  return a;
}

SolveState solve_dense(const Scene& scene, const DenseOptions& options) {
  g_solve_count.fetch_add(1);
  scene.validate();
  const int k = scene.coeff_count();
  const Eigen::Index dim = static_cast<Eigen::Index>(scene.kernel_count()) * k;
  if (dim > options.max_unknowns) {
    throw std::invalid_argument("solve_dense: " + std::to_string(dim) +
                                " unknowns per channel exceeds the guard of " +
                                std::to_string(options.max_unknowns));
  }
  const PairCache cache = build_pair_cache(scene);
  SolveState st = make_solve_state(scene);
  st.solver = "dense";
  for (int ch = 0; ch < 3; ++ch) {
    const Eigen::MatrixXd a = assemble_transport_matrix(scene, cache, ch);
    const double radius = spectral_radius_estimate(a);
    if (radius >= 1.0) {
      throw NonConvergentError("solve_dense: transport operator spectral radius " +
                               std::to_string(radius) + " >= 1");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim) - a;
    Eigen::VectorXd e(dim);
    for (std::size_t i = 0; i < scene.kernel_count(); ++i) {
      e.segment(static_cast<Eigen::Index>(i) * k, k) = scene.kernels[i].emission.col(ch);
    }
    const Eigen::VectorXd b = m.partialPivLu().solve(e);
    const double residual = (m * b - e).cwiseAbs().maxCoeff();
    if (!b.allFinite() || residual > options.residual_tol) {
      throw NonConvergentError(
          "solve_dense: system did not reach the fixed point (residual " +
          std::to_string(residual) + ")");
    }
    for (std::size_t i = 0; i < scene.kernel_count(); ++i) {
      st.radiosity[i].col(ch) = b.segment(static_cast<Eigen::Index>(i) * k, k);
    }
  }
  return st;
}

SolveState solve_progressive(const Scene& scene, const ProgressiveTermination& term) {
  g_solve_count.fetch_add(1);
  scene.validate();
  const PairCache cache = build_pair_cache(scene);
  std::vector<ColorSH> emission(scene.kernel_count());
  for (std::size_t i = 0; i < scene.kernel_count(); ++i) emission[i] = scene.kernels[i].emission;
  detail::SystemView sys = detail::SystemView::forward_full(scene, cache);
  sys.emission = &emission;
  return detail::pr_core(sys, term);
}

SolveState solve_mc(const Scene& scene, int steps, std::uint64_t seed,
                    const McOptions& options) {
  g_solve_count.fetch_add(1);
  scene.validate();
  const PairCache cache = build_pair_cache(scene);
  std::vector<ColorSH> emission(scene.kernel_count());
  for (std::size_t i = 0; i < scene.kernel_count(); ++i) emission[i] = scene.kernels[i].emission;
  detail::SystemView sys = detail::SystemView::forward_full(scene, cache);
  sys.emission = &emission;
  return detail::mc_core(sys, steps, seed, options);
}

SolveState solve_hybrid(const Scene& scene, int steps, std::uint64_t seed,
                        const McOptions& options) {
  g_solve_count.fetch_add(1);
  scene.validate();
  const PairCache cache = build_pair_cache(scene);
  std::vector<ColorSH> emission(scene.kernel_count());
  for (std::size_t i = 0; i < scene.kernel_count(); ++i) emission[i] = scene.kernels[i].emission;
  detail::SystemView sys = detail::SystemView::forward_full(scene, cache);
  sys.emission = &emission;
  return detail::hybrid_core(sys, steps, seed, options);
}

SolveState solve_direct(const Scene& scene) {
  g_solve_count.fetch_add(1);
  scene.validate();
  const PairCache cache = build_pair_cache(scene);
  SolveState st = make_solve_state(scene);
  st.solver = "direct";
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    st.radiosity[k] = scene.kernels[k].emission;
    st.unshot[k] = scene.kernels[k].emission;
  }
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    if (scene.kernels[k].is_light) shoot_cached(scene, cache, k, st.unshot[k], st);
  }
  return st;
}

}  // namespace surad
