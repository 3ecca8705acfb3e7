#pragma once

#include <cstdint>
#include <optional>

#include "surad/rng.hpp"
#include "surad/transport.hpp"

namespace surad {

struct NonConvergentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Number of forward transport solves performed so far (process-wide).
// Rendering from a solved state must not move this counter.
std::uint64_t transport_solve_count();

// Streaming choice of one index with probability w_i / sum(w); single pass,
// O(1) memory. probability() reports the realized w_sel / total.
class ReservoirSampler {
 public:
  explicit ReservoirSampler(RngStream& rng) : rng_(&rng) {}
  void offer(std::size_t index, double weight);
  bool has_selection() const { return selected_.has_value(); }
  std::size_t index() const { return *selected_; }
  double weight_total() const { return total_; }
  double probability() const;

 private:
  RngStream* rng_;
  std::optional<std::size_t> selected_;
  double selected_weight_ = 0.0;
  double total_ = 0.0;
};

// Per-kernel group assignment for two-level next-event sampling.
struct Grouping {
  int n_groups = 0;
  std::vector<int> group_of;
  std::vector<Vec3> mean_center;
  std::vector<Vec3> mean_normal;
  std::vector<ColorSH> summed_radiosity;
  std::vector<double> summed_luminance;
};

// K-means over (center, normal scaled by bounding_radius/4) with
// deterministic farthest-point seeding; empty groups are re-seeded with the
// point farthest from its own center.
Grouping group_kernels(const Scene& scene, const std::vector<ColorSH>& radiosity,
                       int n_groups, int iterations);

struct NextEventSample {
  std::size_t entry_index;  // into cache.entries
  std::size_t source;
  double probability;
};

// Importance-samples the source kernel for one gather estimate. Weights are
// clamp(luminance of the source estimate toward the receiver) times the
// cosine/falloff proxy; transmittance and BRDF are left out. Empty when every
// candidate has zero weight.
std::optional<NextEventSample> next_event(const Scene& scene, const PairCache& cache,
                                          const std::vector<ColorSH>& means,
                                          std::size_t receiver, const Grouping* grouping,
                                          RngStream& rng);

struct DenseOptions {
  double residual_tol = 1e-10;
  int max_unknowns = 4096;  // per channel
};

// Assembles (I - A) b = e per channel and solves directly; the test oracle.
SolveState solve_dense(const Scene& scene, const DenseOptions& options = {});

// Transport operator A for one color channel (N*K square), built from the
// cache. Exposed for the dense adjoint and for self-consistency tests.
Eigen::MatrixXd assemble_transport_matrix(const Scene& scene, const PairCache& cache,
                                          int channel);

struct ProgressiveTermination {
  int max_sweeps = 1024;          // cap of max_sweeps * kernel_count shoots
  double unshot_threshold = 1e-8; // on the Frobenius norm of a kernel's unshot block
};

// Shooting-style progressive refinement: repeatedly shoots the kernel with
// the largest unshot block. On stop the state keeps the residual unshot so
// another solver can finish the composition B = Bhat + Br - deltaB.
SolveState solve_progressive(const Scene& scene,
                             const ProgressiveTermination& termination = {});

struct McOptions {
  bool use_grouping = false;
  int n_groups = 0;      // 0: ceil(sqrt(N))
  int kmeans_iterations = 10;
  int regroup_interval = 8;
};

// TD(0) Monte-Carlo solver: per step every selected kernel blends one
// next-event estimate into its running average; after step 8 kernels are
// selected with replacement proportional to their variance score.
// Deterministic for a fixed (scene, steps, seed) at any worker count.
SolveState solve_mc(const Scene& scene, int steps, std::uint64_t seed,
                    const McOptions& options = {});

// One progressive-refinement pass over the light kernels (zero variance),
// then the Monte-Carlo solver on the residual system of unshot radiance.
SolveState solve_hybrid(const Scene& scene, int steps, std::uint64_t seed,
                        const McOptions& options = {});

// Direct illumination only: a single shooting pass over the light kernels.
// Backs the render decomposition; counts as a transport solve.
SolveState solve_direct(const Scene& scene);

namespace detail {

// Shared machinery between the forward solvers and the adjoint: the dual
// system walks the same pair entries backwards (gradient flows receiver ->
// source with the entry's own decay, which realizes the reversed-decay rule).
struct SystemView {
  const Scene* scene = nullptr;
  const PairCache* cache = nullptr;
  bool dual = false;
  bool gradient_norm_weights = false;      // importance from coefficient norms
  const std::vector<ColorSH>* emission = nullptr;
  std::vector<bool> pinned;                // mean held constant at emission

  static SystemView forward_full(const Scene& scene, const PairCache& cache);
  static SystemView forward_residual(const Scene& scene, const PairCache& cache,
                                     const std::vector<ColorSH>& residual_emission);
  static SystemView dual_system(const Scene& scene, const PairCache& cache,
                                const std::vector<ColorSH>& weighted_gradient);

  bool active(std::size_t k) const;
};

SolveState pr_core(const SystemView& sys, const ProgressiveTermination& term);

SolveState mc_core(const SystemView& sys, int steps, std::uint64_t seed,
                   const McOptions& options);

// PR pass over the kernels with nonzero system emission, then mc_core on the
// residual, composed as B = Bhat + Br - deltaB.
SolveState hybrid_core(const SystemView& sys, int steps, std::uint64_t seed,
                       const McOptions& options);

// Plain gather sum_flows resp * (eval . x_from) * decay, without the
// destination kernel's BRDF or opacity factor.
std::vector<ColorSH> plain_gather(const SystemView& sys, const std::vector<ColorSH>& x);

}  // namespace detail

}  // namespace surad
