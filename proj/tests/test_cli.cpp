#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "scenes.hpp"
#include "surad/cli.hpp"
#include "surad/render.hpp"
#include "surad/scene_io.hpp"
#include "surad/solvers.hpp"

using namespace surad;
using namespace surad::testscene;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "surad_cli_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"surad"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scene small_scene() {
  Scene scene = panel_scene(4, 1, 91);
  return scene;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("solve and render round trip through files") {
  TempDir dir;
  save_scene(small_scene(), dir.file("scene.json"));

  CHECK(run({"solve", "--scene", dir.file("scene.json"), "--solver", "dense", "--out",
             dir.file("state.json")}) == 0);
  CHECK(fs::exists(dir.file("state.json")));

  const std::vector<std::string> render_args = {
      "render", "--scene", dir.file("scene.json"), "--state", dir.file("state.json"),
      "--camera", "2.5,1.5,2.5/0,0,0.3/0,0,1/0.8", "--size", "40x32",
      "--out", dir.file("a.pfm"), "--tonemap", dir.file("a.ppm")};
  CHECK(run(render_args) == 0);
  auto second = render_args;
  second[10] = dir.file("b.pfm");
  second[12] = dir.file("b.ppm");
  CHECK(run(second) == 0);
  CHECK(read_bytes(dir.file("a.pfm")) == read_bytes(dir.file("b.pfm")));
  CHECK(read_bytes(dir.file("a.ppm")) == read_bytes(dir.file("b.ppm")));
  CHECK(!read_bytes(dir.file("a.pfm")).empty());
}

TEST_CASE("solver reproducibility across thread caps") {
  TempDir dir;
  save_scene(small_scene(), dir.file("scene.json"));
  CHECK(run({"solve", "--scene", dir.file("scene.json"), "--solver", "mc", "--steps",
             "32", "--seed", "9", "--threads", "1", "--out", dir.file("t1.json")}) == 0);
  CHECK(run({"solve", "--scene", dir.file("scene.json"), "--solver", "mc", "--steps",
             "32", "--seed", "9", "--threads", "8", "--out", dir.file("t8.json")}) == 0);
  CHECK(read_bytes(dir.file("t1.json")) == read_bytes(dir.file("t8.json")));
}

TEST_CASE("gradcheck verb reports and exits by tolerance") {
  TempDir dir;
  save_scene(panel_scene(3, 1, 92, 1.0, 0.8), dir.file("scene.json"));
  CHECK(run({"gradcheck", "--scene", dir.file("scene.json"), "--params",
             "light_pos,emission", "--tol", "1e-3", "--report", dir.file("report.json")}) ==
        0);
  const std::string report = read_bytes(dir.file("report.json"));
  CHECK(report.find("\"passed\": true") != std::string::npos);
  CHECK(report.find("light_pos") != std::string::npos);
}

TEST_CASE("optimize verb recovers from a manifest") {
  TempDir dir;
  Scene truth = small_scene();
  save_scene(truth, dir.file("truth.json"));

  const SolveState st = solve_dense(truth);
  const Camera cam = Camera::look_at(truth.centroid() + Vec3(2.2, 1.3, 2.0),
                                     truth.centroid(), Vec3(0, 0, 1), 0.9, 32, 28);
  write_pfm(render_image(truth, st, cam), dir.file("target.pfm"));
  {
    const Vec3 c = truth.centroid();
    std::ostringstream cs;
    cs.precision(17);
    cs << c.x() + 2.2 << "," << c.y() + 1.3 << "," << c.z() + 2.0 << "/" << c.x() << ","
       << c.y() << "," << c.z() << "/0,0,1/0.9";
    std::ofstream manifest(dir.file("targets.json"));
    manifest << "[{\"camera\": \"" << cs.str() << "\", \"image\": \"target.pfm\"}]";
  }

  Scene start = truth;
  start.kernels.back().center += Vec3(0.12, -0.1, 0.08);
  save_scene(start, dir.file("start.json"));

  CHECK(run({"optimize", "--scene", dir.file("start.json"), "--targets",
             dir.file("targets.json"), "--learn", "light_pos", "--iters", "40", "--lr",
             "0.03", "--out", dir.file("opt.json"), "--trace", dir.file("trace.csv")}) == 0);

  const std::string trace = read_bytes(dir.file("trace.csv"));
  CHECK(trace.find("iteration,loss") != std::string::npos);
  const Scene optimized = load_scene(dir.file("opt.json"));
  const double before = (start.kernels.back().center - truth.kernels.back().center).norm();
  const double after =
      (optimized.kernels.back().center - truth.kernels.back().center).norm();
  CHECK(after < before);
}

TEST_CASE("variance verb writes a report") {
  TempDir dir;
  save_scene(small_scene(), dir.file("scene.json"));
  CHECK(run({"variance", "--scene", dir.file("scene.json"), "--solver", "mc", "--runs",
             "4", "--steps", "16", "--seed", "5", "--out", dir.file("var.json")}) == 0);
  const std::string report = read_bytes(dir.file("var.json"));
  CHECK(report.find("per_kernel_variance") != std::string::npos);
  CHECK(report.find("mean_variance") != std::string::npos);

  // With a camera the per-pixel variance map lands next to the report.
  CHECK(run({"variance", "--scene", dir.file("scene.json"), "--solver", "hybrid",
             "--runs", "3", "--steps", "16", "--seed", "5", "--camera",
             "2.5,1.5,2.5/0,0,0.3/0,0,1/0.8", "--size", "16x12", "--out",
             dir.file("var2.json")}) == 0);
  CHECK(fs::exists(dir.file("var2_variance.pfm")));
  CHECK(read_bytes(dir.file("var2.json")).find("variance_map") != std::string::npos);
}

TEST_CASE("solve verb accepts every solver name") {
  TempDir dir;
  save_scene(small_scene(), dir.file("scene.json"));
  for (const std::string solver : {"dense", "pr", "mc", "hybrid"}) {
    CHECK(run({"solve", "--scene", dir.file("scene.json"), "--solver", solver, "--steps",
               "8", "--out", dir.file("state_" + solver + ".json")}) == 0);
  }
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run({"explode"}) == 2);
  CHECK(run({"solve", "--scene"}) == 2);
  CHECK(run({"render", "--bogus", "x"}) == 2);
  CHECK(run({}) == 2);
}

TEST_CASE("runtime failures exit with status 1") {
  TempDir dir;
  CHECK(run({"solve", "--scene", dir.file("missing.json"), "--solver", "dense", "--out",
             dir.file("state.json")}) == 1);
}

TEST_SUITE_END();
