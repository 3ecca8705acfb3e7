#pragma once

#include <optional>

#include "surad/render.hpp"
#include "surad/solvers.hpp"

namespace surad {

enum class SolverChoice { dense, progressive, mc, hybrid };
SolverChoice parse_solver_choice(const std::string& name);

struct AdjointOptions {
  SolverChoice solver = SolverChoice::dense;
  int steps = 128;
  std::uint64_t seed = 1;
  ProgressiveTermination pr_termination{};
  McOptions mc{};
};

struct AdjointResult {
  std::vector<ColorSH> emission_grad;  // dL/dE^c per kernel
  std::vector<ColorSH> dual_gather;    // dE - dB, kept division-free
};

// Solves the dual transport system: the weighted gradient f~ x dB propagates
// backwards along the cached pairs (each entry reused with its own decay,
// which realizes the reversed-decay rule), then dE = dB + gather.
AdjointResult adjoint_emission(const Scene& scene, const PairCache& cache,
                               const std::vector<ColorSH>& radiosity_grad,
                               const AdjointOptions& options = {});

// dL/df^c_i = dL/dE_i x G_i with G_i the division-free forward gather, equal
// to dL/dE_i x (B_i - E_i)/f^c_i wherever the coefficients allow the division.
std::vector<ColorSH> grad_brdf(const Scene& scene, const PairCache& cache,
                               const SolveState& state,
                               const std::vector<ColorSH>& emission_grad);

struct GradBuffer {
  std::vector<ColorSH> emission;  // dL/dE^c
  std::vector<ColorSH> brdf;      // dL/df^c
  std::vector<Vec3> center;
  std::vector<Vec2> scale;
  std::vector<Vec3> frame;        // axis-angle increment, world frame
  Eigen::VectorXd g;
  Eigen::VectorXd lambda;         // w.r.t. lambda itself
  std::size_t skipped_pairs = 0;

  bool all_finite() const;
};

GradBuffer make_grad_buffer(const Scene& scene);

// Decay-term and directional-effect gradients accumulated over the cached
// visible pairs. Light positions receive gradients like any other center;
// occluders pick up gradients through the transmittance of every segment
// they cut.
void grad_geometry(const Scene& scene, const PairCache& cache, const SolveState& state,
                   const std::vector<ColorSH>& emission_grad, GradBuffer& grads);

// Full backward pass from an image-loss gradient dL/dB.
GradBuffer compute_gradients(const Scene& scene, const PairCache& cache,
                             const SolveState& state,
                             const std::vector<ColorSH>& radiosity_grad,
                             const AdjointOptions& options = {});

// ---- Finite-difference verification harness ----

enum class ParamFamily { emission, brdf, light_position, center, scale, frame, g, lambda };
ParamFamily parse_param_family(const std::string& name);
std::string param_family_name(ParamFamily family);

// The loss each family is checked against. Families that never move the
// compositing geometry are checked through the image loss; surfel geometry
// families use a radiosity-space loss because camera-ray compositing
// gradients are intentionally not part of the backward pass.
enum class FdLoss { image, radiosity };
FdLoss fd_loss_for(ParamFamily family);

struct FdCheckOptions {
  std::vector<double> eps_scales = {1e-3, 1e-4, 1e-5};
  double tolerance = 1e-3;
  std::optional<Camera> camera;  // image-loss viewpoint; auto-framed when unset
  DenseOptions dense{};
};

struct FdEntry {
  ParamFamily family;
  std::size_t kernel;
  int component;
  double analytic = 0.0;
  double finite_diff = 0.0;
  double rel_error = 0.0;
  double eps = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_error = 0.0;
  bool passed = false;
  double tolerance = 0.0;
};

FdReport finite_diff_check(const Scene& scene, const std::vector<ParamFamily>& families,
                           const FdCheckOptions& options);

}  // namespace surad
