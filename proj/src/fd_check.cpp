#include <cmath>
#include <limits>
#include <algorithm>

#include "surad/adjoint.hpp"

namespace surad {

namespace {

struct ParamRef {
  ParamFamily family;
  std::size_t kernel;
  int component;
};

void apply_delta(Scene& scene, const ParamRef& p, double delta) {
  Surfel& s = scene.kernels[p.kernel];
  const int n = scene.coeff_count();
  switch (p.family) {
    case ParamFamily::emission:
      s.emission(p.component % n, p.component / n) += delta;
      break;
    case ParamFamily::brdf:
      s.brdf(p.component % n, p.component / n) += delta;
      break;
    case ParamFamily::light_position:
    case ParamFamily::center:
      s.center[p.component] += delta;
      break;
    case ParamFamily::scale:
      s.scale[p.component] += delta;
      break;
    case ParamFamily::frame: {
      Vec3 axis = Vec3::Zero();
      axis[p.component] = delta;
      const Mat3 rot = axis_angle_rotation(axis);
      s.tangent_u = rot * s.tangent_u;
      s.tangent_v = rot * s.tangent_v;
      // Keep the frame invariants exact under accumulated rounding.
      s.tangent_u.normalize();
      s.tangent_v = (s.tangent_v - s.tangent_v.dot(s.tangent_u) * s.tangent_u).normalized();
      break;
    }
    case ParamFamily::g:
      s.g += delta;
      break;
    case ParamFamily::lambda:
      s.log_lambda = std::log(s.lambda() + delta);
      break;
  }
}

double analytic_of(const GradBuffer& grads, const ParamRef& p, int n_coeff) {
  switch (p.family) {
    case ParamFamily::emission:
      return grads.emission[p.kernel](p.component % n_coeff, p.component / n_coeff);
    case ParamFamily::brdf:
      return grads.brdf[p.kernel](p.component % n_coeff, p.component / n_coeff);
    case ParamFamily::light_position:
    case ParamFamily::center:
      return grads.center[p.kernel][p.component];
    case ParamFamily::scale:
      return grads.scale[p.kernel][p.component];
    case ParamFamily::frame:
      return grads.frame[p.kernel][p.component];
    case ParamFamily::g:
      return grads.g[static_cast<Eigen::Index>(p.kernel)];
    case ParamFamily::lambda:
      return grads.lambda[static_cast<Eigen::Index>(p.kernel)];
  }
  return 0.0;
}

double eps_unit(const Scene& scene, const ParamRef& p) {
  const Surfel& s = scene.kernels[p.kernel];
  switch (p.family) {
    case ParamFamily::light_position:
    case ParamFamily::center:
      return scene.bounding_radius();
    case ParamFamily::scale:
      return s.scale[p.component];
    case ParamFamily::g:
      return std::max(s.g, 0.5);
    case ParamFamily::lambda:
      return std::max(s.lambda(), 0.5);
    case ParamFamily::frame:
      return 1.0;
    case ParamFamily::emission:
      return std::max(1.0, std::abs(s.emission(p.component, 0)));
    case ParamFamily::brdf:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

ParamFamily parse_param_family(const std::string& name) {
  if (name == "emission") return ParamFamily::emission;
  if (name == "brdf") return ParamFamily::brdf;
  if (name == "light_pos" || name == "light_position") return ParamFamily::light_position;
  if (name == "center" || name == "centers") return ParamFamily::center;
  if (name == "scale" || name == "scales") return ParamFamily::scale;
  if (name == "frame" || name == "frames") return ParamFamily::frame;
  if (name == "g") return ParamFamily::g;
  if (name == "lambda") return ParamFamily::lambda;
  throw std::invalid_argument("unknown parameter family: " + name);
}

std::string param_family_name(ParamFamily family) {
  switch (family) {
    case ParamFamily::emission: return "emission";
    case ParamFamily::brdf: return "brdf";
    case ParamFamily::light_position: return "light_pos";
    case ParamFamily::center: return "center";
    case ParamFamily::scale: return "scale";
    case ParamFamily::frame: return "frame";
    case ParamFamily::g: return "g";
    case ParamFamily::lambda: return "lambda";
  }
  return "?";
}

FdLoss fd_loss_for(ParamFamily family) {
  switch (family) {
    case ParamFamily::emission:
    case ParamFamily::brdf:
    case ParamFamily::lambda:
    case ParamFamily::light_position:
      return FdLoss::image;
    default:
      // Surfel geometry also moves the camera-ray compositing, whose
      // gradients are out of scope; check these against a radiosity-space
      // loss instead.
      return FdLoss::radiosity;
  }
}

FdReport finite_diff_check(const Scene& scene, const std::vector<ParamFamily>& families,
                           const FdCheckOptions& options) {
  scene.validate();
  Camera camera;
  if (options.camera) {
    camera = *options.camera;
  } else {
    const Vec3 c = scene.centroid();
    const double r = scene.bounding_radius();
    camera = Camera::look_at(c + r * Vec3(1.9, 1.3, 1.6), c, Vec3(0, 0, 1), 0.9, 48, 48);
  }
  const ImageBuffer black(camera.width, camera.height);

  // Image loss: L2 against a black target. Radiosity loss: squared
  // coefficient norm of the solved state.
  auto evaluate = [&](const Scene& s, FdLoss loss_kind,
                      std::vector<ColorSH>* radiosity_grad) -> double {
    const SolveState state = solve_dense(s, options.dense);
    if (loss_kind == FdLoss::image) {
      const LossBackward lb = image_loss_backward(s, state, camera, black, LossKind::l2);
      if (radiosity_grad) *radiosity_grad = lb.radiosity_grad;
      return lb.loss;
    }
    double loss = 0.0;
    if (radiosity_grad) radiosity_grad->assign(s.kernel_count(), zero_color_sh(s.sh_degree));
    for (std::size_t k = 0; k < s.kernel_count(); ++k) {
      loss += (state.radiosity[k] * state.radiosity[k]).sum();
      if (radiosity_grad) (*radiosity_grad)[k] = 2.0 * state.radiosity[k];
    }
    return loss;
  };

  // One analytic backward pass per loss flavor in use.
  std::vector<FdLoss> flavors;
  for (ParamFamily f : families) {
    const FdLoss fl = fd_loss_for(f);
    if (std::find(flavors.begin(), flavors.end(), fl) == flavors.end()) flavors.push_back(fl);
  }
  const PairCache cache = build_pair_cache(scene);
  const SolveState state = solve_dense(scene, options.dense);
  std::vector<GradBuffer> grads_by_flavor;
  for (FdLoss fl : flavors) {
    std::vector<ColorSH> db;
    evaluate(scene, fl, &db);
    grads_by_flavor.push_back(compute_gradients(scene, cache, state, db));
  }
  auto grads_of = [&](FdLoss fl) -> const GradBuffer& {
    for (std::size_t i = 0; i < flavors.size(); ++i) {
      if (flavors[i] == fl) return grads_by_flavor[i];
    }
    return grads_by_flavor.front();
  };

  // Enumerate the scalar parameters of each requested family.
  std::vector<ParamRef> params;
  const int n_coeff = scene.coeff_count();
  for (ParamFamily f : families) {
    for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
      const Surfel& s = scene.kernels[k];
      switch (f) {
        case ParamFamily::emission:
          if (s.is_light) {
            for (int c = 0; c < 3 * n_coeff; ++c) params.push_back({f, k, c});
          }
          break;
        case ParamFamily::brdf:
          if (s.is_receiver()) {
            for (int c = 0; c < 3 * n_coeff; ++c) params.push_back({f, k, c});
          }
          break;
        case ParamFamily::light_position:
          if (s.kind == LightKind::point) {
            for (int c = 0; c < 3; ++c) params.push_back({f, k, c});
          }
          break;
        case ParamFamily::center:
          if (s.kind == LightKind::surfel) {
            for (int c = 0; c < 3; ++c) params.push_back({f, k, c});
          }
          break;
        case ParamFamily::scale:
          if (s.kind == LightKind::surfel) {
            for (int c = 0; c < 2; ++c) params.push_back({f, k, c});
          }
          break;
        case ParamFamily::frame:
          if (s.kind == LightKind::surfel) {
            for (int c = 0; c < 3; ++c) params.push_back({f, k, c});
          }
          break;
        case ParamFamily::g:
          if (s.kind == LightKind::surfel) params.push_back({f, k, 0});
          break;
        case ParamFamily::lambda:
          if (s.kind == LightKind::surfel) params.push_back({f, k, 0});
          break;
      }
    }
  }

  FdReport report;
  report.tolerance = options.tolerance;
  for (const ParamRef& p : params) {
    const FdLoss flavor = fd_loss_for(p.family);
    const double analytic = analytic_of(grads_of(flavor), p, n_coeff);
    FdEntry entry{p.family, p.kernel, p.component, analytic, 0.0,
                  std::numeric_limits<double>::infinity(), 0.0};
    const double unit = eps_unit(scene, p);
    for (double eps_scale : options.eps_scales) {
      const double h = eps_scale * unit;
      Scene plus = scene;
      apply_delta(plus, p, h);
      Scene minus = scene;
      apply_delta(minus, p, -h);
      const double fd =
          (evaluate(plus, flavor, nullptr) - evaluate(minus, flavor, nullptr)) / (2.0 * h);
      const double rel = std::abs(analytic - fd) /
                         std::max({std::abs(analytic), std::abs(fd), 1e-12});
      if (rel < entry.rel_error) {
        entry.rel_error = rel;
        entry.finite_diff = fd;
        entry.eps = h;
      }
    }
    report.entries.push_back(entry);
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace surad
