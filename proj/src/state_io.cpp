#include "surad/state_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace surad {

namespace {
using json = nlohmann::ordered_json;
}

void save_solve_state(const SolveState& state, const std::string& path) {
  json root;
  root["solver"] = state.solver;
  root["steps"] = state.steps;
  root["seed"] = state.seed;
  root["sh_degree"] = state.sh_degree;
  json radiosity = json::array();
  for (const ColorSH& b : state.radiosity) {
    json arr = json::array();
    for (int ch = 0; ch < 3; ++ch) {
      for (Eigen::Index k = 0; k < b.rows(); ++k) arr.push_back(b(k, ch));
    }
    radiosity.push_back(std::move(arr));
  }
  root["radiosity"] = std::move(radiosity);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write state file: " + path);
  out << root.dump(2) << "\n";
}

SolveState load_solve_state(const std::string& path, const Scene& scene) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open state file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  json root;
  try {
    root = json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid state file " + path + ": " + e.what());
  }
  SolveState st = make_solve_state(scene);
  st.solver = root.value("solver", "");
  st.steps = root.value("steps", 0);
  st.seed = root.value("seed", std::uint64_t{0});
  if (root.value("sh_degree", -1) != scene.sh_degree) {
    throw std::runtime_error("state file degree does not match the scene");
  }
  const auto& radiosity = root.at("radiosity");
  if (!radiosity.is_array() || radiosity.size() != scene.kernel_count()) {
    throw std::runtime_error("state file kernel count does not match the scene");
  }
  const int n = scene.coeff_count();
  for (std::size_t i = 0; i < scene.kernel_count(); ++i) {
    const auto& arr = radiosity[i];
    if (!arr.is_array() || static_cast<int>(arr.size()) != 3 * n) {
      throw std::runtime_error("state file: kernel " + std::to_string(i) +
                               " has the wrong coefficient count");
    }
    for (int ch = 0; ch < 3; ++ch) {
      for (int k = 0; k < n; ++k) {
        st.radiosity[i](k, ch) = arr[ch * n + k].get<double>();
      }
    }
  }
  return st;
}

}  // namespace surad
