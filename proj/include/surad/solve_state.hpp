#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surad/types.hpp"

namespace surad {

struct Scene;

// Per-kernel transport state shared by all solvers. Progressive refinement
// uses radiosity/unshot; the Monte-Carlo solver additionally tracks running
// sums, squared sums and visit counts so the estimate is sum/visits.
struct SolveState {
  int sh_degree = 0;
  std::vector<ColorSH> radiosity;   // B^c
  std::vector<ColorSH> unshot;      // delta B^c
  std::vector<ColorSH> sum;         // S^B
  std::vector<ColorSH> sum_sq;      // S^B2
  Eigen::VectorXd visits;           // D
  Eigen::VectorXd variance_score;

  std::string solver;
  int steps = 0;
  std::uint64_t seed = 0;

  std::size_t kernel_count() const { return radiosity.size(); }
};

// Zero-initialized state (radiosity and unshot all-zero).
SolveState make_solve_state(const Scene& scene);

}  // namespace surad
