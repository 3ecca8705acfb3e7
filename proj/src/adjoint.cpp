#include "surad/adjoint.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "surad/log.hpp"
#include "surad/parallel.hpp"

namespace surad {

namespace {

// Reciprocity f(w_in, w_out) = f(-w_out, -w_in) underpins the dual solve;
// check it once on a representative kernel before trusting the reversal.
void assert_reciprocity(const Scene& scene) {
  for (const Surfel& s : scene.kernels) {
    if (!s.is_receiver()) continue;
    const Direction a(0.3, -0.5, 0.81);
    const Direction b(-0.62, 0.2, 0.76);
    const RGB lhs = brdf_eval(s.brdf, a, b);
    const RGB rhs = brdf_eval(s.brdf, -b, -a);
    if ((lhs - rhs).abs().maxCoeff() > 1e-9 * (1.0 + lhs.abs().maxCoeff())) {
      throw std::logic_error("adjoint: BRDF reciprocity violated");
    }
    return;
  }
}

std::vector<ColorSH> weighted_gradient(const Scene& scene,
                                       const std::vector<ColorSH>& radiosity_grad) {
  std::vector<ColorSH> w(scene.kernel_count());
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    const Surfel& s = scene.kernels[k];
    w[k] = s.is_receiver() ? ColorSH(s.alpha_center() * s.brdf * radiosity_grad[k])
                           : zero_color_sh(scene.sh_degree);
  }
  return w;
}

}  // namespace

SolverChoice parse_solver_choice(const std::string& name) {
  if (name == "dense") return SolverChoice::dense;
  if (name == "pr") return SolverChoice::progressive;
  if (name == "mc") return SolverChoice::mc;
  if (name == "hybrid") return SolverChoice::hybrid;
  throw std::invalid_argument("unknown solver: " + name);
}

AdjointResult adjoint_emission(const Scene& scene, const PairCache& cache,
                               const std::vector<ColorSH>& radiosity_grad,
                               const AdjointOptions& options) {
  assert_reciprocity(scene);
  const std::size_t n = scene.kernel_count();
  const int k = scene.coeff_count();
  AdjointResult out;
  out.emission_grad.assign(n, zero_color_sh(scene.sh_degree));
  out.dual_gather.assign(n, zero_color_sh(scene.sh_degree));

  if (options.solver == SolverChoice::dense) {
    const Eigen::Index dim = static_cast<Eigen::Index>(n) * k;
    for (int ch = 0; ch < 3; ++ch) {
      const Eigen::MatrixXd a = assemble_transport_matrix(scene, cache, ch);
      Eigen::MatrixXd mt = (Eigen::MatrixXd::Identity(dim, dim) - a).transpose();
      Eigen::VectorXd rhs(dim);
      for (std::size_t i = 0; i < n; ++i) {
        rhs.segment(static_cast<Eigen::Index>(i) * k, k) = radiosity_grad[i].col(ch);
      }
      const Eigen::VectorXd x = mt.partialPivLu().solve(rhs);
      if (!x.allFinite()) throw NonConvergentError("adjoint_emission: dual system diverged");
      for (std::size_t i = 0; i < n; ++i) {
        out.emission_grad[i].col(ch) = x.segment(static_cast<Eigen::Index>(i) * k, k);
        out.dual_gather[i].col(ch) =
            x.segment(static_cast<Eigen::Index>(i) * k, k).array() -
            radiosity_grad[i].col(ch);
      }
    }
    return out;
  }

  // Stochastic route: solve the dual system in the weighted variable
  // W = f~ x dE, then one plain gather recovers dE = dB + G division-free.
  const std::vector<ColorSH> emission = weighted_gradient(scene, radiosity_grad);
  detail::SystemView sys = detail::SystemView::dual_system(scene, cache, emission);
  SolveState dual;
  switch (options.solver) {
    case SolverChoice::progressive:
      dual = detail::pr_core(sys, options.pr_termination);
      break;
    case SolverChoice::mc:
      dual = detail::mc_core(sys, options.steps, options.seed, options.mc);
      break;
    case SolverChoice::hybrid:
      dual = detail::hybrid_core(sys, options.steps, options.seed, options.mc);
      break;
    case SolverChoice::dense:
      break;
  }
  const std::vector<ColorSH> gather = detail::plain_gather(sys, dual.radiosity);
  for (std::size_t i = 0; i < n; ++i) {
    out.dual_gather[i] = gather[i];
    out.emission_grad[i] = radiosity_grad[i] + gather[i];
  }
  return out;
}

std::vector<ColorSH> grad_brdf(const Scene& scene, const PairCache& cache,
                               const SolveState& state,
                               const std::vector<ColorSH>& emission_grad) {
  const std::vector<ColorSH> gather = forward_gather(scene, cache, state.radiosity);
  std::vector<ColorSH> out(scene.kernel_count());
  for (std::size_t i = 0; i < scene.kernel_count(); ++i) {
    out[i] = emission_grad[i] * gather[i];
  }
  return out;
}

GradBuffer make_grad_buffer(const Scene& scene) {
  GradBuffer g;
  const std::size_t n = scene.kernel_count();
  g.emission.assign(n, zero_color_sh(scene.sh_degree));
  g.brdf.assign(n, zero_color_sh(scene.sh_degree));
  g.center.assign(n, Vec3::Zero());
  g.scale.assign(n, Vec2::Zero());
  g.frame.assign(n, Vec3::Zero());
  g.g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  g.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  return g;
}

bool GradBuffer::all_finite() const {
  for (const auto& e : emission) {
    if (!e.isFinite().all()) return false;
  }
  for (const auto& b : brdf) {
    if (!b.isFinite().all()) return false;
  }
  for (const auto& c : center) {
    if (!c.allFinite()) return false;
  }
  for (const auto& s : scale) {
    if (!s.allFinite()) return false;
  }
  for (const auto& f : frame) {
    if (!f.allFinite()) return false;
  }
  return g.allFinite() && lambda.allFinite();
}

namespace {

void merge_grads(GradBuffer& into, const GradBuffer& part) {
  for (std::size_t i = 0; i < into.center.size(); ++i) {
    into.center[i] += part.center[i];
    into.scale[i] += part.scale[i];
    into.frame[i] += part.frame[i];
  }
  into.g += part.g;
  into.lambda += part.lambda;
}

// Gradients of one occluder hit's opacity w.r.t. the segment endpoints, the
// occluder's center/frame/scales/g. `o` and `to` are the segment endpoints.
struct HitChain {
  Vec3 d_o = Vec3::Zero();
  Vec3 d_to = Vec3::Zero();
  Vec3 d_center = Vec3::Zero();
  Vec3 d_frame = Vec3::Zero();
  Vec2 d_scale = Vec2::Zero();
  double d_g = 0.0;
};

HitChain occluder_hit_chain(const Surfel& occ, const Vec3& o, const Vec3& to, double h,
                            double alpha) {
  HitChain out;
  const Vec3 r = to - o;
  const Vec3 n = occ.normal();
  const double dr = n.dot(r);
  if (std::abs(dr) < 1e-300 || occ.g <= 0.0) return out;
  const Vec3 x = o + h * r;
  const Vec3 rel = x - occ.center;
  const double su = occ.scale[0], sv = occ.scale[1];
  const double u = rel.dot(occ.tangent_u) / su;
  const double v = rel.dot(occ.tangent_v) / sv;

  const double z = 0.03279 * std::pow(occ.g * std::exp(-0.5 * (u * u + v * v)), 3.4);
  const double one_m = 1.0 - alpha;  // = exp(-z)
  const double da_du = one_m * z * (-3.4 * u);
  const double da_dv = one_m * z * (-3.4 * v);
  out.d_g = one_m * 3.4 * z / occ.g;

  const double tu_r = r.dot(occ.tangent_u) / dr;
  const double tv_r = r.dot(occ.tangent_v) / dr;
  const Vec3 pu = (occ.tangent_u - tu_r * n) / su;  // shared projector for u
  const Vec3 pv = (occ.tangent_v - tv_r * n) / sv;

  out.d_o = da_du * (1.0 - h) * pu + da_dv * (1.0 - h) * pv;
  out.d_to = da_du * h * pu + da_dv * h * pv;
  out.d_center = -(da_du * pu + da_dv * pv);

  const Vec3 dh_dn = (occ.center - o - h * r) / dr;
  const Vec3 du_dtheta = (r.dot(occ.tangent_u) / su) * n.cross(dh_dn) +
                         occ.tangent_u.cross(rel) / su;
  const Vec3 dv_dtheta = (r.dot(occ.tangent_v) / sv) * n.cross(dh_dn) +
                         occ.tangent_v.cross(rel) / sv;
  out.d_frame = da_du * du_dtheta + da_dv * dv_dtheta;

  out.d_scale[0] = da_du * (-u / su);
  out.d_scale[1] = da_dv * (-v / sv);
  return out;
}

}  // namespace

void grad_geometry(const Scene& scene, const PairCache& cache, const SolveState& state,
                   const std::vector<ColorSH>& emission_grad, GradBuffer& grads) {
  const int degree = scene.sh_degree;
  const double span = 4.0 * scene.bounding_radius() + 1.0;

  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = chunk_count(cache.entries.size(), kChunk);
  std::vector<GradBuffer> parts(chunks);

  parallel_chunks(cache.entries.size(), kChunk, [&](std::size_t c, std::size_t begin,
                                                    std::size_t end) {
    GradBuffer& part = parts[c];
    part = make_grad_buffer(scene);
    Eigen::Matrix<double, Eigen::Dynamic, 3> jac(sh_count(degree), 3);
    for (std::size_t idx = begin; idx < end; ++idx) {
      const PairEntry& e = cache.entries[idx];
      const Surfel& recv = scene.kernels[e.receiver];
      const Surfel& src = scene.kernels[e.source];
      const Vec3 omega = e.omega;
      const double v_decay = e.decay;

      // Per-channel contractions of the pair kernel between dE (left) and the
      // solved radiosity (right).
      RGB b_ch, s_ch;
      for (int ch = 0; ch < 3; ++ch) {
        b_ch[ch] = (emission_grad[e.receiver].col(ch) * recv.brdf.col(ch) *
                    e.ybar_recv.array())
                       .sum();
        s_ch[ch] = e.y_src.dot(state.radiosity[e.source].col(ch).matrix());
      }
      const double alpha_recv = recv.alpha_center();
      const RGB a_ch = alpha_recv * b_ch;
      const double pre_alpha = (b_ch * s_ch).sum();     // C = alpha_i * pre_alpha * V
      const double w_v = alpha_recv * pre_alpha;        // C = w_v * V

      // Receiver-side opacity absorption.
      part.g[e.receiver] += pre_alpha * v_decay * alpha_center_dg(recv);

      // Decay factors linear in the source terms.
      part.lambda[e.source] += w_v * v_decay / src.lambda();
      if (src.kind == LightKind::surfel) {
        part.scale[e.source][0] += w_v * v_decay / src.scale[0];
        part.scale[e.source][1] += w_v * v_decay / src.scale[1];
        const double integral = alpha_integral(src);
        if (integral > 0.0) {
          part.g[e.source] += w_v * (v_decay / integral) * alpha_integral_dg(src);
        }
      }

      const double cos_recv = -recv.normal().dot(omega);  // > 0 for cached pairs
      // Receiver cosine, frame chain (valid for every source kind).
      part.frame[e.receiver] += (w_v * v_decay / cos_recv) * (-recv.normal().cross(omega));

      if (src.kind != LightKind::directional) {
        const Vec3 q = recv.center - src.center;
        const double dist = q.norm();

        // Cosines and inverse-square falloff through q.
        Vec3 dv_dq = (-(recv.normal() - recv.normal().dot(omega) * omega) / dist) /
                         cos_recv -
                     (2.0 / dist) * omega;
        if (src.kind == LightKind::surfel) {
          const double cos_src = src.normal().dot(omega);
          dv_dq += ((src.normal() - src.normal().dot(omega) * omega) / dist) / cos_src;
          part.frame[e.source] += (w_v * v_decay / cos_src) * src.normal().cross(omega);
        }
        dv_dq *= v_decay;
        part.center[e.receiver] += w_v * dv_dq;
        part.center[e.source] -= w_v * dv_dq;

        // Directional effects: both basis evaluations move with omega.
        sh_jacobian_into(recv.to_local(-omega), degree, jac);
        SHVector w_bar = SHVector::Zero(sh_count(degree));
        for (int ch = 0; ch < 3; ++ch) {
          w_bar += (s_ch[ch] * alpha_recv) *
                   (emission_grad[e.receiver].col(ch) * recv.brdf.col(ch)).matrix();
        }
        const Vec3 g_recv = -v_decay * (recv.frame() * (jac.transpose() * w_bar));

        if (src.kind == LightKind::surfel) {
          sh_jacobian_into(src.to_local(omega), degree, jac);
        } else {
          sh_jacobian_into(omega, degree, jac);
        }
        SHVector b_bar = SHVector::Zero(sh_count(degree));
        for (int ch = 0; ch < 3; ++ch) {
          b_bar += a_ch[ch] * state.radiosity[e.source].col(ch).matrix();
        }
        Vec3 g_src = jac.transpose() * b_bar;
        if (src.kind == LightKind::surfel) g_src = src.frame() * g_src;
        g_src *= v_decay;

        const Vec3 g_dir = (g_recv + g_src) / dist;
        part.center[e.receiver] += g_dir;
        part.center[e.source] -= g_dir;
        part.frame[e.receiver] += -omega.cross(g_recv);
        if (src.kind == LightKind::surfel) part.frame[e.source] += -omega.cross(g_src);
      }

      // Transmittance chain through every occluder hit on the segment.
      if (!e.occluders.empty()) {
        Vec3 seg_from, seg_to;
        if (src.kind == LightKind::directional) {
          seg_to = recv.center;
          seg_from = recv.center - span * omega;
        } else {
          seg_from = src.center;
          seg_to = recv.center;
        }
        for (const auto& hit : e.occluders) {
          const Surfel& occ = scene.kernels[hit.kernel];
          const double dl_da = -w_v * v_decay / (1.0 - hit.alpha);
          const HitChain chain = occluder_hit_chain(occ, seg_from, seg_to, hit.h, hit.alpha);
          if (src.kind == LightKind::directional) {
            part.center[e.receiver] += dl_da * (chain.d_o + chain.d_to);
          } else {
            part.center[e.source] += dl_da * chain.d_o;
            part.center[e.receiver] += dl_da * chain.d_to;
          }
          part.center[hit.kernel] += dl_da * chain.d_center;
          part.frame[hit.kernel] += dl_da * chain.d_frame;
          part.scale[hit.kernel] += dl_da * chain.d_scale;
          part.g[hit.kernel] += dl_da * chain.d_g;
        }
      }
    }
  });

  for (const GradBuffer& part : parts) merge_grads(grads, part);
  grads.skipped_pairs += cache.degenerate_pairs;
  if (cache.degenerate_pairs > 0) {
    warn("grad_geometry: " + std::to_string(cache.degenerate_pairs) +
         " degenerate pair(s) skipped");
  }
}

GradBuffer compute_gradients(const Scene& scene, const PairCache& cache,
                             const SolveState& state,
                             const std::vector<ColorSH>& radiosity_grad,
                             const AdjointOptions& options) {
  GradBuffer grads = make_grad_buffer(scene);
  const AdjointResult adj = adjoint_emission(scene, cache, radiosity_grad, options);
  grads.emission = adj.emission_grad;
  grads.brdf = grad_brdf(scene, cache, state, adj.emission_grad);
  grad_geometry(scene, cache, state, adj.emission_grad, grads);
  return grads;
}

}  // namespace surad
