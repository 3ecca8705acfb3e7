#pragma once

#include <string>

#include "surad/scene.hpp"
#include "surad/solve_state.hpp"

namespace surad {

// State files are JSON: solver metadata plus the flattened per-kernel B^c
// (channel-major, like emission_sh in scene files).
void save_solve_state(const SolveState& state, const std::string& path);
SolveState load_solve_state(const std::string& path, const Scene& scene);

}  // namespace surad
