#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scenes.hpp"
#include "surad/adjoint.hpp"

using namespace surad;
using namespace surad::testscene;

namespace {

std::vector<ColorSH> random_gradient(const Scene& scene, std::uint64_t seed) {
  std::vector<ColorSH> db(scene.kernel_count(), zero_color_sh(scene.sh_degree));
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    for (Eigen::Index i = 0; i < db[k].size(); ++i) {
      *(db[k].data() + i) = oracle::random_unit(seed, 131 * k + i).y();
    }
  }
  return db;
}

// L(E) = sum_k <dB_k, B_k(E)> is linear in the emissions, so central
// differences of it are exact up to round-off.
double linear_loss(const Scene& scene, const std::vector<ColorSH>& db) {
  const SolveState st = solve_dense(scene);
  double acc = 0.0;
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    acc += (db[k] * st.radiosity[k]).sum();
  }
  return acc;
}

}  // namespace

TEST_SUITE_BEGIN("adjoint");

TEST_CASE("isolated kernel: emission gradient equals the radiosity gradient") {
  Scene scene;
  scene.sh_degree = 2;
  scene.kernels.push_back(make_surfel(Vec3(0, 0, 0), Vec3(0, 0, 1), 0.4, 2.0,
                                      diffuse_material(RGB::Constant(0.5)), 2));
  scene.surfel_count = 1;
  const PairCache cache = build_pair_cache(scene);
  CHECK(cache.entries.empty());
  const auto db = random_gradient(scene, 71);
  const AdjointResult adj = adjoint_emission(scene, cache, db);
  CHECK((adj.emission_grad[0] - db[0]).abs().maxCoeff() == 0.0);
}

TEST_CASE("dense adjoint equals the transposed system solve") {
  const Scene scene = facing_pair(2.2, 2, true);
  const PairCache cache = build_pair_cache(scene);
  const auto db = random_gradient(scene, 72);
  const AdjointResult adj = adjoint_emission(scene, cache, db);

  const int n = scene.coeff_count();
  const Eigen::Index dim = static_cast<Eigen::Index>(scene.kernel_count()) * n;
  for (int ch = 0; ch < 3; ++ch) {
    const Eigen::MatrixXd a = assemble_transport_matrix(scene, cache, ch);
    Eigen::VectorXd rhs(dim);
    for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
      rhs.segment(static_cast<Eigen::Index>(k) * n, n) = db[k].col(ch);
    }
    const Eigen::VectorXd x =
        (Eigen::MatrixXd::Identity(dim, dim) - a).transpose().fullPivLu().solve(rhs);
    for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
      const Eigen::VectorXd got = adj.emission_grad[k].col(ch);
      CHECK((got - x.segment(static_cast<Eigen::Index>(k) * n, n)).cwiseAbs().maxCoeff() <
            1e-8);
    }
  }
}

TEST_CASE("adjoint dot-product test against central differences") {
  const Scene scene = panel_scene(4, 2, 73);
  const PairCache cache = build_pair_cache(scene);
  const auto db = random_gradient(scene, 74);
  const AdjointResult adj = adjoint_emission(scene, cache, db);

  // Random emission perturbation direction (lights only keep the scene valid).
  std::vector<ColorSH> delta(scene.kernel_count(), zero_color_sh(scene.sh_degree));
  double dot = 0.0;
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    if (!scene.kernels[k].is_light) continue;
    for (Eigen::Index i = 0; i < delta[k].size(); ++i) {
      *(delta[k].data() + i) = oracle::random_unit(75, 17 * k + i).z();
    }
    dot += (adj.emission_grad[k] * delta[k]).sum();
  }
  const double h = 1e-4;
  auto loss_at = [&](double t) {
    Scene s = scene;
    for (std::size_t k = 0; k < s.kernel_count(); ++k) {
      if (s.kernels[k].is_light) s.kernels[k].emission += t * delta[k];
    }
    return linear_loss(s, db);
  };
  const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
  CHECK(dot == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("stochastic dual solves agree with the dense adjoint in expectation") {
  const Scene scene = panel_scene(4, 1, 76);
  const PairCache cache = build_pair_cache(scene);
  const auto db = random_gradient(scene, 77);
  const AdjointResult dense = adjoint_emission(scene, cache, db);

  AdjointOptions opt;
  opt.solver = SolverChoice::progressive;
  const AdjointResult pr = adjoint_emission(scene, cache, db, opt);
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    CHECK((pr.emission_grad[k] - dense.emission_grad[k]).abs().maxCoeff() < 1e-6);
  }

  opt.solver = SolverChoice::mc;
  opt.steps = 128;
  std::vector<ColorSH> mean(scene.kernel_count(), zero_color_sh(scene.sh_degree));
  const int seeds = 48;
  for (int s = 0; s < seeds; ++s) {
    opt.seed = 9000 + s;
    const AdjointResult mc = adjoint_emission(scene, cache, db, opt);
    for (std::size_t k = 0; k < scene.kernel_count(); ++k) mean[k] += mc.emission_grad[k];
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    mean[k] /= static_cast<double>(seeds);
    num += (mean[k] - dense.emission_grad[k]).matrix().squaredNorm();
    den += dense.emission_grad[k].matrix().squaredNorm();
  }
  CHECK(std::sqrt(num / den) < 0.08);
}

TEST_CASE("brdf gradient: unlit kernels have zero gradient") {
  Scene scene = facing_pair(2.0, 2, true);
  // Kernel 1 faces away from everything: receives nothing, B = E = 0.
  scene.kernels[1] = make_surfel(Vec3(0, 0, 2), Vec3(0, 0, 1), 0.4, 2.0,
                                 diffuse_material(RGB::Constant(0.5)), 2);
  const PairCache cache = build_pair_cache(scene);
  const SolveState st = solve_dense(scene);
  CHECK(st.radiosity[1].abs().maxCoeff() == 0.0);
  const auto db = random_gradient(scene, 78);
  const AdjointResult adj = adjoint_emission(scene, cache, db);
  const auto df = grad_brdf(scene, cache, st, adj.emission_grad);
  CHECK(df[1].abs().maxCoeff() == 0.0);
}

TEST_CASE("brdf gradient: division form equals the gather form") {
  const Scene scene = panel_scene(4, 2, 79);
  const PairCache cache = build_pair_cache(scene);
  SolveState st = solve_dense(scene);
  const auto db = random_gradient(scene, 80);
  const AdjointResult adj = adjoint_emission(scene, cache, db);

  // Materialize the radiosity from one final gather sweep so both readouts
  // describe the same numbers.
  const auto gather = forward_gather(scene, cache, st.radiosity);
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    st.radiosity[k] = scene.kernels[k].emission + scene.kernels[k].brdf * gather[k];
  }
  const auto df = grad_brdf(scene, cache, st, adj.emission_grad);
  for (std::size_t k = 0; k < scene.kernel_count(); ++k) {
    if (!scene.kernels[k].is_receiver()) continue;
    const ColorSH numer = st.radiosity[k] - scene.kernels[k].emission;
    for (Eigen::Index i = 0; i < df[k].size(); ++i) {
      const double fc = *(scene.kernels[k].brdf.data() + i);
      if (std::abs(fc) <= 1e-12) continue;
      const double division_form =
          *(adj.emission_grad[k].data() + i) * (*(numer.data() + i) / fc);
      const double gather_form = *(df[k].data() + i);
      CHECK(std::abs(division_form - gather_form) <=
            1e-12 * std::max({std::abs(division_form), std::abs(gather_form), 1e-9}));
    }
  }
}

TEST_CASE("lambda gradient equals the pair contribution divided by lambda") {
  const Scene scene = facing_pair(2.0, 1, true);
  const PairCache cache = build_pair_cache(scene);
  const SolveState st = solve_dense(scene);
  const auto db = random_gradient(scene, 81);
  GradBuffer grads = make_grad_buffer(scene);
  const AdjointResult adj = adjoint_emission(scene, cache, db);
  grad_geometry(scene, cache, st, adj.emission_grad, grads);

  // V is linear in lambda_j, so lambda * dL/dlambda recovers the summed
  // loss contribution of j's outgoing pairs; cross-check by scaling lambda.
  const double h = 1e-6;
  for (std::size_t j = 0; j < scene.kernel_count(); ++j) {
    auto loss_with_lambda = [&](double lam) {
      Scene s = scene;
      s.kernels[j].log_lambda = std::log(lam);
      return linear_loss(s, db);
    };
    const double lam = scene.kernels[j].lambda();
    const double fd = (loss_with_lambda(lam + h) - loss_with_lambda(lam - h)) / (2.0 * h);
    CHECK(grads.lambda[static_cast<Eigen::Index>(j)] ==
          doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("finite differences: no influence means zero error") {
  Scene scene = facing_pair(2.0, 1, true);
  // A surfel far away facing outward: no pairs, no camera coverage.
  scene.kernels.insert(scene.kernels.begin() + 2,
                       make_surfel(Vec3(50, 50, -40), Vec3(0, 0, -1), 0.2, 1.0,
                                   diffuse_material(RGB::Constant(0.3)), 1));
  scene.surfel_count = 3;
  FdCheckOptions opt;
  const FdReport report =
      finite_diff_check(scene, {ParamFamily::center, ParamFamily::g}, opt);
  for (const FdEntry& e : report.entries) {
    if (e.kernel == 2) {
      CHECK(e.analytic == 0.0);
      CHECK(e.rel_error == 0.0);
    }
  }
}

TEST_CASE("finite differences: emissions on a two-kernel scene") {
  Scene scene;
  scene.sh_degree = 1;
  scene.kernels.push_back(make_surfel(Vec3(0, 0, 0), Vec3(0, 0, 1), 0.5, 2.0,
                                      diffuse_material(RGB(0.6, 0.5, 0.4)), 1));
  scene.surfel_count = 1;
  scene.kernels.push_back(make_point_light(Vec3(0.3, -0.2, 1.8), RGB(2, 1.5, 1), 1));
  FdCheckOptions opt;
  opt.tolerance = 1e-6;
  const FdReport report = finite_diff_check(scene, {ParamFamily::emission}, opt);
  CHECK(report.passed);
  CHECK(report.max_rel_error <= 1e-6);
  // The check must not be vacuous: the light's DC emission drives the image.
  double max_analytic = 0.0;
  for (const FdEntry& e : report.entries) {
    max_analytic = std::max(max_analytic, std::abs(e.analytic));
  }
  CHECK(max_analytic > 0.0);
}

TEST_CASE("finite differences: directional-light pairs and their occluders") {
  // A directional light drives a different decay path: fixed direction, no
  // falloff, and a transmittance segment tied to the receiver alone.
  Scene scene;
  scene.sh_degree = 1;
  scene.kernels.push_back(make_surfel(Vec3(0, 0, 0), Vec3(0.15, -0.1, 1), 0.5, 2.5,
                                      diffuse_material(RGB(0.7, 0.6, 0.5)), 1));
  scene.kernels.push_back(make_surfel(Vec3(1.0, 0.2, 0.6), Vec3(-0.75, -0.2, 0.6), 0.4,
                                      2.0, diffuse_material(RGB(0.5, 0.6, 0.55)), 1));
  // An occluder cutting the light path to the floor.
  scene.kernels.push_back(make_surfel(Vec3(0.25, -0.15, 1.1), Vec3(0.3, 0.2, 1), 0.8, 1.6,
                                      diffuse_material(RGB(0.4, 0.4, 0.4)), 1));
  scene.surfel_count = 3;
  scene.kernels.push_back(make_directional_light(Vec3(-0.25, 0.15, -1), RGB(3, 2.7, 2.4), 1));

  // The occluder must actually cut the segment for the test to mean anything.
  const PairCache cache = build_pair_cache(scene);
  bool occluded = false;
  for (const auto& e : cache.entries) {
    if (scene.kernels[e.source].kind == LightKind::directional && !e.occluders.empty()) {
      occluded = true;
    }
  }
  REQUIRE(occluded);

  FdCheckOptions opt;
  opt.tolerance = 1e-3;
  const FdReport report = finite_diff_check(
      scene, {ParamFamily::center, ParamFamily::scale, ParamFamily::frame, ParamFamily::g,
              ParamFamily::lambda},
      opt);
  INFO("max rel error ", report.max_rel_error);
  CHECK(report.passed);
}

TEST_CASE("finite differences with an emissive reflective surfel") {
  Scene scene = facing_pair(2.2, 1, false);
  scene.kernels[0].emission = isotropic_emission(RGB(2.5, 2.0, 1.5), 1);
  scene.kernels[0].is_light = true;
  scene.kernels.push_back(make_surfel(Vec3(0.5, 0.4, 1.1), Vec3(-0.4, -0.35, -0.85), 0.4,
                                      2.0, diffuse_material(RGB(0.55, 0.5, 0.45)), 1));
  scene.surfel_count = 3;
  FdCheckOptions opt;
  opt.tolerance = 1e-3;
  const FdReport report = finite_diff_check(
      scene, {ParamFamily::emission, ParamFamily::brdf, ParamFamily::center,
              ParamFamily::frame, ParamFamily::g},
      opt);
  INFO("max rel error ", report.max_rel_error);
  CHECK(report.passed);
  double live = 0.0;
  for (const FdEntry& e : report.entries) {
    if (e.family == ParamFamily::emission) live = std::max(live, std::abs(e.analytic));
  }
  CHECK(live > 0.0);
}

TEST_CASE("finite differences: full geometry families on random scenes") {
  const std::vector<ParamFamily> families = {
      ParamFamily::center, ParamFamily::scale, ParamFamily::frame,
      ParamFamily::g,      ParamFamily::lambda, ParamFamily::light_position,
      ParamFamily::brdf};
  for (std::uint64_t seed : {82, 83, 84}) {
    const Scene scene = panel_scene(4, 1, seed, 1.0, 0.75);
    FdCheckOptions opt;
    opt.tolerance = 1e-3;
    const FdReport report = finite_diff_check(scene, families, opt);
    INFO("seed ", seed, " max rel error ", report.max_rel_error);
    CHECK(report.passed);
    // Every family must contribute at least one live gradient.
    for (ParamFamily f : families) {
      double live = 0.0;
      for (const FdEntry& e : report.entries) {
        if (e.family == f) live = std::max(live, std::abs(e.analytic));
      }
      INFO("family ", param_family_name(f));
      CHECK(live > 0.0);
    }
  }
}

TEST_SUITE_END();
