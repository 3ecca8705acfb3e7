#include "surad/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "surad/optim.hpp"
#include "surad/parallel.hpp"
#include "surad/scene_io.hpp"
#include "surad/state_io.hpp"

namespace surad {

namespace {

using json = nlohmann::ordered_json;

// "px,py,pz/lx,ly,lz/ux,uy,uz/fov" with fov in radians.
Camera parse_camera(const std::string& text, int width, int height) {
  std::vector<std::vector<double>> groups;
  std::stringstream ss(text);
  std::string group;
  while (std::getline(ss, group, '/')) {
    std::vector<double> values;
    std::stringstream gs(group);
    std::string item;
    while (std::getline(gs, item, ',')) values.push_back(std::stod(item));
    groups.push_back(std::move(values));
  }
  if (groups.size() != 4 || groups[0].size() != 3 || groups[1].size() != 3 ||
      groups[2].size() != 3 || groups[3].size() != 1) {
    throw std::invalid_argument(
        "camera must be \"px,py,pz/lx,ly,lz/ux,uy,uz/fov\" (fov in radians)");
  }
  return Camera::look_at(Vec3(groups[0][0], groups[0][1], groups[0][2]),
                         Vec3(groups[1][0], groups[1][1], groups[1][2]),
                         Vec3(groups[2][0], groups[2][1], groups[2][2]), groups[3][0],
                         width, height);
}

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw std::invalid_argument("size must be WxH");
  const int w = std::stoi(text.substr(0, x));
  const int h = std::stoi(text.substr(x + 1));
  if (w < 1 || h < 1) throw std::invalid_argument("size must be positive");
  return {w, h};
}

void log_seed(std::uint64_t seed) {
  std::printf("[surad] seed = %llu\n", static_cast<unsigned long long>(seed));
}

SolveState run_solver(const Scene& scene, const std::string& solver, int steps,
                      std::uint64_t seed) {
  if (solver == "dense") return solve_dense(scene);
  if (solver == "pr") return solve_progressive(scene);
  if (solver == "mc") return solve_mc(scene, steps, seed);
  if (solver == "hybrid") return solve_hybrid(scene, steps, seed);
  throw std::invalid_argument("unknown solver: " + solver);
}

int cmd_solve(const std::string& scene_path, const std::string& solver, int steps,
              std::uint64_t seed, const std::string& out) {
  const Scene scene = load_scene(scene_path);
  if (solver == "mc" || solver == "hybrid") log_seed(seed);
  SolveState state = run_solver(scene, solver, steps, seed);
  save_solve_state(state, out);
  std::printf("[surad] solved %zu kernels with %s; state -> %s\n", scene.kernel_count(),
              solver.c_str(), out.c_str());
  return 0;
}

int cmd_render(const std::string& scene_path, const std::string& state_path,
               const std::string& camera_text, const std::string& size_text,
               const std::string& pass_name, const std::string& out,
               const std::string& tonemap) {
  const Scene scene = load_scene(scene_path);
  const SolveState state = load_solve_state(state_path, scene);
  const auto [w, h] = parse_size(size_text);
  const Camera camera = parse_camera(camera_text, w, h);
  const ImageBuffer img = render_image(scene, state, camera, parse_render_pass(pass_name));
  write_pfm(img, out);
  if (!tonemap.empty()) write_ppm(img, tonemap);
  std::printf("[surad] rendered %dx%d %s pass -> %s\n", w, h, pass_name.c_str(),
              out.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& scene_path, const std::string& params, double eps,
                  double tol, const std::string& report_path) {
  const Scene scene = load_scene(scene_path);
  std::vector<ParamFamily> families;
  std::stringstream ss(params);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "geometry") {
      for (const char* n : {"center", "scale", "frame", "g", "lambda"}) {
        families.push_back(parse_param_family(n));
      }
    } else if (!item.empty()) {
      families.push_back(parse_param_family(item));
    }
  }
  if (families.empty()) throw std::invalid_argument("gradcheck: no parameter families");

  FdCheckOptions options;
  options.tolerance = tol;
  if (eps > 0.0) options.eps_scales = {eps};
  const FdReport report = finite_diff_check(scene, families, options);

  std::printf("%-10s %-6s %-4s %14s %14s %12s %10s\n", "family", "kernel", "comp",
              "analytic", "fd", "rel_error", "eps");
  for (const FdEntry& e : report.entries) {
    std::printf("%-10s %-6zu %-4d %14.6e %14.6e %12.3e %10.1e\n",
                param_family_name(e.family).c_str(), e.kernel, e.component, e.analytic,
                e.finite_diff, e.rel_error, e.eps);
  }
  std::printf("max rel error %.3e (tolerance %.1e): %s\n", report.max_rel_error,
              report.tolerance, report.passed ? "PASS" : "FAIL");

  if (!report_path.empty()) {
    json root;
    root["tolerance"] = report.tolerance;
    root["max_rel_error"] = report.max_rel_error;
    root["passed"] = report.passed;
    json entries = json::array();
    for (const FdEntry& e : report.entries) {
      entries.push_back({{"family", param_family_name(e.family)},
                         {"kernel", e.kernel},
                         {"component", e.component},
                         {"analytic", e.analytic},
                         {"fd", e.finite_diff},
                         {"rel_error", e.rel_error},
                         {"eps", e.eps}});
    }
    root["entries"] = std::move(entries);
    std::ofstream out(report_path);
    out << root.dump(2) << "\n";
  }
  return report.passed ? 0 : 1;
}

int cmd_optimize(const std::string& scene_path, const std::string& targets_path,
                 const std::string& learn, int iters, double lr,
                 const std::string& solver, int steps, std::uint64_t seed,
                 const std::string& out, const std::string& trace) {
  const Scene scene = load_scene(scene_path);

  std::ifstream in(targets_path);
  if (!in) throw std::runtime_error("cannot open targets manifest: " + targets_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const json manifest = json::parse(buf.str());
  if (!manifest.is_array() || manifest.empty()) {
    throw std::runtime_error("targets manifest must be a non-empty array");
  }
  const auto base = std::filesystem::path(targets_path).parent_path();
  std::vector<std::pair<Camera, ImageBuffer>> targets;
  for (const auto& item : manifest) {
    const std::string image_rel = item.at("image").get<std::string>();
    const std::filesystem::path image_path = base / image_rel;
    ImageBuffer img = read_pfm(image_path.string());
    Camera cam = parse_camera(item.at("camera").get<std::string>(), img.width, img.height);
    targets.emplace_back(cam, std::move(img));
  }

  OptimConfig config;
  config.iterations = iters;
  config.step = StepSizes::uniform(lr);
  config.seed = seed;
  config.solver = parse_solver_choice(solver);
  config.solver_steps = steps;
  if (config.solver == SolverChoice::mc || config.solver == SolverChoice::hybrid) {
    log_seed(seed);
  }

  const OptimResult result =
      run_optimization(scene, targets, ParamSelection::from_list(learn), config);
  save_scene(result.scene, out);
  if (!trace.empty()) write_loss_trace_csv(result, trace);
  std::printf("[surad] optimize: loss %.6e -> %.6e over %d iterations\n",
              result.loss_trace.front(), result.loss_trace.back(), iters);
  return 0;
}

int cmd_variance(const std::string& scene_path, const std::string& solver, int runs,
                 int steps, std::uint64_t seed, const std::string& out,
                 const std::string& camera_text, const std::string& size_text) {
  if (solver != "mc" && solver != "hybrid") {
    throw std::invalid_argument("variance: solver must be mc or hybrid");
  }
  if (runs < 2) throw std::invalid_argument("variance: need at least 2 runs");
  const Scene scene = load_scene(scene_path);
  log_seed(seed);

  std::vector<SolveState> states;
  states.reserve(runs);
  for (int r = 0; r < runs; ++r) {
    states.push_back(run_solver(scene, solver, steps, seed + static_cast<std::uint64_t>(r)));
  }

  // Per-kernel sample variance of the radiosity coefficients across runs.
  const std::size_t n = scene.kernel_count();
  std::vector<double> per_kernel(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    ColorSH mean = zero_color_sh(scene.sh_degree);
    for (const auto& st : states) mean += st.radiosity[k];
    mean /= static_cast<double>(runs);
    double acc = 0.0;
    for (const auto& st : states) {
      acc += ((st.radiosity[k] - mean) * (st.radiosity[k] - mean)).sum();
    }
    per_kernel[k] = acc / (runs - 1) / static_cast<double>(mean.size());
  }
  double mean_variance = 0.0;
  for (double v : per_kernel) mean_variance += v;
  mean_variance /= static_cast<double>(n);

  json root;
  root["solver"] = solver;
  root["runs"] = runs;
  root["steps"] = steps;
  root["seed"] = seed;
  root["per_kernel_variance"] = per_kernel;
  root["mean_variance"] = mean_variance;

  if (!camera_text.empty()) {
    const auto [w, h] = parse_size(size_text.empty() ? "64x64" : size_text);
    const Camera camera = parse_camera(camera_text, w, h);
    std::vector<ImageBuffer> images;
    images.reserve(runs);
    for (const auto& st : states) images.push_back(render_image(scene, st, camera));
    ImageBuffer var_map(w, h);
    for (std::size_t p = 0; p < var_map.pixels.size(); ++p) {
      RGB mean = RGB::Zero();
      for (const auto& img : images) mean += img.pixels[p];
      mean /= static_cast<double>(runs);
      RGB acc = RGB::Zero();
      for (const auto& img : images) acc += (img.pixels[p] - mean).square();
      var_map.pixels[p] = acc / static_cast<double>(runs - 1);
    }
    const std::string map_path =
        (std::filesystem::path(out).replace_extension("") += "_variance.pfm").string();
    write_pfm(var_map, map_path);
    root["variance_map"] = map_path;
  }

  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write report: " + out);
  os << root.dump(2) << "\n";
  std::printf("[surad] %s variance over %d runs: mean %.6e -> %s\n", solver.c_str(), runs,
              mean_variance, out.c_str());
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"radiosity-style differentiable light transport on Gaussian surfels"};
  app.require_subcommand(1);
  int threads = 0;

  std::string scene_path, out, state_path, camera_text, size_text, tonemap, targets_path;
  std::string solver = "dense", pass_name = "full", params, learn, trace;
  // Stochastic solves default to T=128 standalone (inference doubles the
  // training-mode T=64 used inside the optimizer).
  int steps = 128, opt_steps = 64, runs = 20, iters = 100;
  std::uint64_t seed = 12345;
  double eps = 0.0, tol = 1e-3, lr = 1e-2;

  CLI::App* solve = app.add_subcommand("solve", "solve light transport");
  solve->add_option("--scene", scene_path)->required();
  solve->add_option("--solver", solver)->check(CLI::IsMember({"dense", "pr", "mc", "hybrid"}));
  solve->add_option("--steps", steps);
  solve->add_option("--seed", seed);
  solve->add_option("--out", out)->required();

  CLI::App* render = app.add_subcommand("render", "render a solved state");
  render->add_option("--scene", scene_path)->required();
  render->add_option("--state", state_path)->required();
  render->add_option("--camera", camera_text)->required();
  render->add_option("--size", size_text)->required();
  render->add_option("--pass", pass_name);
  render->add_option("--out", out)->required();
  render->add_option("--tonemap", tonemap);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--scene", scene_path)->required();
  gradcheck->add_option("--params", params)->required();
  gradcheck->add_option("--eps", eps);
  gradcheck->add_option("--tol", tol);
  gradcheck->add_option("--report", out);

  CLI::App* optimize = app.add_subcommand("optimize", "inverse rendering");
  optimize->add_option("--scene", scene_path)->required();
  optimize->add_option("--targets", targets_path)->required();
  optimize->add_option("--learn", learn)->required();
  optimize->add_option("--iters", iters);
  optimize->add_option("--lr", lr);
  optimize->add_option("--solver", solver)->check(CLI::IsMember({"dense", "pr", "mc", "hybrid"}));
  optimize->add_option("--steps", opt_steps);
  optimize->add_option("--seed", seed);
  optimize->add_option("--out", out)->required();
  optimize->add_option("--trace", trace);

  CLI::App* variance = app.add_subcommand("variance", "solver variance report");
  variance->add_option("--scene", scene_path)->required();
  variance->add_option("--solver", solver)->required()->check(CLI::IsMember({"mc", "hybrid"}));
  variance->add_option("--runs", runs);
  variance->add_option("--steps", steps);
  variance->add_option("--seed", seed);
  variance->add_option("--out", out)->required();
  variance->add_option("--camera", camera_text);
  variance->add_option("--size", size_text);

  for (CLI::App* sub : {solve, render, gradcheck, optimize, variance}) {
    sub->add_option("--threads", threads, "worker cap (0 = hardware)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  set_worker_count(threads);
  try {
    if (solve->parsed()) return cmd_solve(scene_path, solver, steps, seed, out);
    if (render->parsed()) {
      return cmd_render(scene_path, state_path, camera_text, size_text, pass_name, out,
                        tonemap);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(scene_path, params, eps, tol, out);
    if (optimize->parsed()) {
      return cmd_optimize(scene_path, targets_path, learn, iters, lr, solver, opt_steps,
                          seed, out, trace);
    }
    if (variance->parsed()) {
      return cmd_variance(scene_path, solver, runs, steps, seed, out, camera_text,
                          size_text);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "[surad] error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace surad
