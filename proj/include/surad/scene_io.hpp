#pragma once

#include <string>

#include "surad/scene.hpp"

namespace surad {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scene files are JSON documents:
//   {"sh_degree": L,
//    "surfels": [{"center", "tangent_u", "tangent_v", "scale", "g",
//                 "lambda" (default 1), "material": {"kd","ks","shininess","blend"},
//                 "emission_sh" (optional, 3*(L+1)^2 floats, channel-major),
//                 "brdf_sh" (optional override of the material-derived coefficients)},...],
//    "lights": [{"kind": "point"|"directional",
//                "position"|"direction": [x,y,z], "intensity": [r,g,b]},...]}
// Numbers are plain decimals; NaN/Inf are rejected. Parse errors carry the
// path of the offending field.
Scene parse_scene(const std::string& text);
std::string serialize_scene(const Scene& scene);

Scene load_scene(const std::string& path);
void save_scene(const Scene& scene, const std::string& path);

}  // namespace surad
