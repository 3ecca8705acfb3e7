#include "surad/optim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "surad/rng.hpp"

namespace surad {

namespace {

enum Family : int {
  kEmission = 0,
  kBrdf,
  kCenters,
  kScales,
  kFrames,
  kG,
  kLambda,
  kLightPositions,
};

struct Segment {
  int family;
  std::size_t kernel;
  Eigen::Index offset;
  Eigen::Index size;
};

double family_step(const StepSizes& st, int family) {
  switch (family) {
    case kEmission: return st.emission;
    case kBrdf: return st.brdf;
    case kCenters: return st.centers;
    case kScales: return st.scales;
    case kFrames: return st.frames;
    case kG: return st.g;
    case kLambda: return st.lambda;
    case kLightPositions: return st.light_positions;
  }
  return 0.0;
}

}  // namespace

bool ParamSelection::any() const {
  return emission || brdf || centers || scales || frames || g || lambda ||
         light_positions;
}

ParamSelection ParamSelection::from_list(const std::string& names) {
  ParamSelection sel;
  std::stringstream ss(names);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "emission") sel.emission = true;
    else if (item == "brdf") sel.brdf = true;
    else if (item == "centers" || item == "center") sel.centers = true;
    else if (item == "scales" || item == "scale") sel.scales = true;
    else if (item == "frames" || item == "frame") sel.frames = true;
    else if (item == "g") sel.g = true;
    else if (item == "lambda") sel.lambda = true;
    else if (item == "light_pos" || item == "light_position" || item == "light_positions")
      sel.light_positions = true;
    else if (item == "geometry") {
      sel.centers = sel.scales = sel.frames = sel.g = sel.lambda = true;
    } else {
      throw std::invalid_argument("unknown parameter family: " + item);
    }
  }
  return sel;
}

StepSizes StepSizes::uniform(double lr) {
  StepSizes st;
  st.emission = st.brdf = st.centers = st.scales = st.frames = st.g = st.lambda =
      st.light_positions = lr;
  return st;
}

const std::array<const char*, kFamilyCount>& family_names() {
  static const std::array<const char*, kFamilyCount> names = {
      "emission", "brdf", "centers", "scales", "frames", "g", "lambda", "light_pos"};
  return names;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               const Eigen::VectorXd& lr, AdamMoments& moments, double beta1,
               double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != lr.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!grads.allFinite()) {
    for (Eigen::Index i = 0; i < grads.size(); ++i) {
      if (!std::isfinite(grads[i])) {
        throw std::runtime_error("adam_step: non-finite gradient at parameter " +
                                 std::to_string(i));
      }
    }
  }
  if (moments.m.size() != params.size()) {
    moments.m = Eigen::VectorXd::Zero(params.size());
    moments.v = Eigen::VectorXd::Zero(params.size());
    moments.t = 0;
  }
  moments.t += 1;
  moments.m = beta1 * moments.m + (1.0 - beta1) * grads;
  moments.v = beta2 * moments.v + (1.0 - beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(beta1, moments.t);
  const double bc2 = 1.0 - std::pow(beta2, moments.t);
  const Eigen::VectorXd m_hat = moments.m / bc1;
  const Eigen::VectorXd v_hat = moments.v / bc2;
  params -= lr.cwiseProduct(
      m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                          Eigen::VectorXd::Constant(params.size(), eps)));
}

OptimResult run_optimization(const Scene& scene,
                             const std::vector<std::pair<Camera, ImageBuffer>>& targets,
                             const ParamSelection& selection, const OptimConfig& config) {
  if (targets.empty()) throw std::invalid_argument("run_optimization: no targets");
  if (!selection.any()) {
    throw std::invalid_argument("run_optimization: no parameter family selected");
  }
  if (config.iterations < 1) throw std::invalid_argument("run_optimization: iterations >= 1");
  for (const auto& [cam, img] : targets) {
    if (img.width != cam.width || img.height != cam.height) {
      throw std::invalid_argument("run_optimization: target resolution mismatch");
    }
  }

  OptimResult result;
  result.scene = scene;
  Scene& s = result.scene;
  const int n_coeff = s.coeff_count();

  // Pack the selected families into one flat parameter vector. Frames are
  // axis-angle increments re-zeroed after application; g and lambda live in
  // log space.
  std::vector<Segment> segments;
  Eigen::Index total = 0;
  auto add_segment = [&](int family, std::size_t kernel, Eigen::Index size) {
    segments.push_back({family, kernel, total, size});
    total += size;
  };
  for (std::size_t k = 0; k < s.kernel_count(); ++k) {
    const Surfel& kern = s.kernels[k];
    if (selection.emission && kern.is_light) add_segment(kEmission, k, 3 * n_coeff);
    if (kern.kind == LightKind::surfel) {
      if (selection.brdf) add_segment(kBrdf, k, 3 * n_coeff);
      if (selection.centers) add_segment(kCenters, k, 3);
      if (selection.scales) add_segment(kScales, k, 2);
      if (selection.frames) add_segment(kFrames, k, 3);
      if (selection.g) add_segment(kG, k, 1);
      if (selection.lambda) add_segment(kLambda, k, 1);
    }
    if (selection.light_positions && kern.kind == LightKind::point) {
      add_segment(kLightPositions, k, 3);
    }
  }
  if (total == 0) {
    throw std::invalid_argument("run_optimization: selection matches no parameters");
  }

  Eigen::VectorXd params(total), lr(total);
  for (const Segment& seg : segments) lr.segment(seg.offset, seg.size).setConstant(
      family_step(config.step, seg.family));

  auto pack = [&]() {
    for (const Segment& seg : segments) {
      Surfel& kern = s.kernels[seg.kernel];
      auto block = params.segment(seg.offset, seg.size);
      switch (seg.family) {
        case kEmission:
          for (int ch = 0; ch < 3; ++ch) block.segment(ch * n_coeff, n_coeff) =
              kern.emission.col(ch);
          break;
        case kBrdf:
          for (int ch = 0; ch < 3; ++ch) block.segment(ch * n_coeff, n_coeff) =
              kern.brdf.col(ch);
          break;
        case kCenters:
        case kLightPositions:
          block = kern.center;
          break;
        case kScales:
          block = kern.scale;
          break;
        case kFrames:
          block.setZero();
          break;
        case kG:
          block[0] = std::log(std::max(kern.g, 1e-12));
          break;
        case kLambda:
          block[0] = kern.log_lambda;
          break;
      }
    }
  };

  auto unpack = [&]() {
    for (const Segment& seg : segments) {
      Surfel& kern = s.kernels[seg.kernel];
      const auto block = params.segment(seg.offset, seg.size);
      switch (seg.family) {
        case kEmission:
          for (int ch = 0; ch < 3; ++ch) kern.emission.col(ch) =
              block.segment(ch * n_coeff, n_coeff).array();
          break;
        case kBrdf:
          for (int ch = 0; ch < 3; ++ch) kern.brdf.col(ch) =
              block.segment(ch * n_coeff, n_coeff).array();
          break;
        case kCenters:
        case kLightPositions:
          kern.center = block;
          break;
        case kScales:
          kern.scale = block.cwiseMax(1e-9);
          break;
        case kFrames: {
          const Mat3 rot = axis_angle_rotation(block);
          kern.tangent_u = rot * kern.tangent_u;
          kern.tangent_v = rot * kern.tangent_v;
          kern.tangent_u.normalize();
          kern.tangent_v =
              (kern.tangent_v - kern.tangent_v.dot(kern.tangent_u) * kern.tangent_u)
                  .normalized();
          break;
        }
        case kG:
          kern.g = std::exp(block[0]);
          break;
        case kLambda:
          kern.log_lambda = block[0];
          break;
      }
    }
  };

  auto gather_gradient = [&](const GradBuffer& grads, Eigen::VectorXd& out) {
    for (const Segment& seg : segments) {
      const Surfel& kern = s.kernels[seg.kernel];
      auto block = out.segment(seg.offset, seg.size);
      switch (seg.family) {
        case kEmission:
          for (int ch = 0; ch < 3; ++ch) block.segment(ch * n_coeff, n_coeff) =
              grads.emission[seg.kernel].col(ch);
          break;
        case kBrdf:
          for (int ch = 0; ch < 3; ++ch) block.segment(ch * n_coeff, n_coeff) =
              grads.brdf[seg.kernel].col(ch);
          break;
        case kCenters:
        case kLightPositions:
          block = grads.center[seg.kernel];
          break;
        case kScales:
          block = grads.scale[seg.kernel];
          break;
        case kFrames:
          block = grads.frame[seg.kernel];
          break;
        case kG:
          block[0] = grads.g[static_cast<Eigen::Index>(seg.kernel)] * kern.g;
          break;
        case kLambda:
          block[0] = grads.lambda[static_cast<Eigen::Index>(seg.kernel)] * kern.lambda();
          break;
      }
    }
  };

  AdamMoments moments;
  Eigen::VectorXd grad_vec(total);
  for (int iter = 0; iter < config.iterations; ++iter) {
    s.validate();
    SolveState state;
    switch (config.solver) {
      case SolverChoice::dense:
        state = solve_dense(s);
        break;
      case SolverChoice::progressive:
        state = solve_progressive(s);
        break;
      case SolverChoice::mc:
        state = solve_mc(s, config.solver_steps,
                         RngStream::mix(config.seed + static_cast<std::uint64_t>(iter)));
        break;
      case SolverChoice::hybrid:
        state = solve_hybrid(s, config.solver_steps,
                             RngStream::mix(config.seed + static_cast<std::uint64_t>(iter)));
        break;
    }

    // Batch rendering: every target view reads the one solved state.
    double loss = 0.0;
    std::vector<ColorSH> db(s.kernel_count(), zero_color_sh(s.sh_degree));
    for (const auto& [cam, img] : targets) {
      const LossBackward lb = image_loss_backward(s, state, cam, img, config.loss);
      loss += lb.loss;
      for (std::size_t k = 0; k < s.kernel_count(); ++k) db[k] += lb.radiosity_grad[k];
    }
    result.loss_trace.push_back(loss);

    const PairCache cache = build_pair_cache(s);
    AdjointOptions adj;
    adj.solver = config.solver;
    adj.steps = config.solver_steps;
    adj.seed = RngStream::mix(config.seed + 0x9E37u + static_cast<std::uint64_t>(iter));
    const GradBuffer grads = compute_gradients(s, cache, state, db, adj);

    pack();
    gather_gradient(grads, grad_vec);

    std::array<double, kFamilyCount> norms{};
    for (const Segment& seg : segments) {
      norms[seg.family] += grad_vec.segment(seg.offset, seg.size).squaredNorm();
    }
    for (double& v : norms) v = std::sqrt(v);
    result.grad_norms.push_back(norms);

    adam_step(params, grad_vec, lr, moments, config.beta1, config.beta2, config.adam_eps);
    unpack();
  }
  return result;
}

void write_loss_trace_csv(const OptimResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "iteration,loss";
  for (const char* n : family_names()) out << ",grad_" << n;
  out << "\n";
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    out << i << "," << result.loss_trace[i];
    for (double v : result.grad_norms[i]) out << "," << v;
    out << "\n";
  }
}

}  // namespace surad
