#pragma once

#include <array>

#include "surad/adjoint.hpp"

namespace surad {

struct ParamSelection {
  bool emission = false;
  bool brdf = false;
  bool centers = false;
  bool scales = false;
  bool frames = false;
  bool g = false;
  bool lambda = false;
  bool light_positions = false;

  bool any() const;
  // Comma-separated names; "geometry" expands to centers,scales,frames,g,lambda.
  static ParamSelection from_list(const std::string& names);
};

struct StepSizes {
  double emission = 1e-2;
  double brdf = 1e-2;
  double centers = 1e-2;
  double scales = 1e-2;
  double frames = 1e-2;
  double g = 1e-2;
  double lambda = 1e-2;
  double light_positions = 1e-2;

  static StepSizes uniform(double lr);
};

struct OptimConfig {
  int iterations = 100;
  StepSizes step;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  SolverChoice solver = SolverChoice::dense;
  int solver_steps = 64;
  LossKind loss = LossKind::l1;
};

struct AdamMoments {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;
};

// Standard adaptive-moment descent step with bias correction; lr is
// per-element. Throws on non-finite gradients.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               const Eigen::VectorXd& lr, AdamMoments& moments, double beta1,
               double beta2, double eps);

constexpr int kFamilyCount = 8;
const std::array<const char*, kFamilyCount>& family_names();

struct OptimResult {
  Scene scene;
  std::vector<double> loss_trace;
  std::vector<std::array<double, kFamilyCount>> grad_norms;  // per iteration
};

// Desk-scale inverse rendering: per iteration one transport solve, batch
// rendering of every target from that state, the analytic backward pass, and
// one optimizer step. lambda and g are updated in log space.
OptimResult run_optimization(const Scene& scene,
                             const std::vector<std::pair<Camera, ImageBuffer>>& targets,
                             const ParamSelection& selection, const OptimConfig& config);

void write_loss_trace_csv(const OptimResult& result, const std::string& path);

}  // namespace surad
