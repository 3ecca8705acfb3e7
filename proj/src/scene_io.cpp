#include "surad/scene_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace surad {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ParseError(path + ": " + what);
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "non-finite number");
  return v;
}

Vec3 get_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = get_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

RGB get_rgb(const json& j, const std::string& path) {
  const Vec3 v = get_vec3(j, path);
  return RGB(v[0], v[1], v[2]);
}

ColorSH get_color_sh(const json& j, int degree, const std::string& path) {
  const int n = sh_count(degree);
  if (!j.is_array() || static_cast<int>(j.size()) != 3 * n) {
    fail(path, "expected " + std::to_string(3 * n) + " floats (3 channels x " +
                   std::to_string(n) + " coefficients)");
  }
  ColorSH c(n, 3);
  for (int ch = 0; ch < 3; ++ch) {
    for (int k = 0; k < n; ++k) {
      c(k, ch) = get_number(j[ch * n + k], path + "[" + std::to_string(ch * n + k) + "]");
    }
  }
  return c;
}

json color_sh_to_json(const ColorSH& c) {
  json arr = json::array();
  for (int ch = 0; ch < 3; ++ch) {
    for (Eigen::Index k = 0; k < c.rows(); ++k) arr.push_back(c(k, ch));
  }
  return arr;
}

json vec3_to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
json rgb_to_json(const RGB& v) { return json::array({v[0], v[1], v[2]}); }

Material parse_material(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  Material m;
  m.diffuse_albedo = get_rgb(j.at("kd"), path + ".kd");
  m.specular_albedo = get_rgb(j.at("ks"), path + ".ks");
  m.shininess = get_number(j.at("shininess"), path + ".shininess");
  m.blend = get_number(j.at("blend"), path + ".blend");
  for (int ch = 0; ch < 3; ++ch) {
    if (m.diffuse_albedo[ch] < 0.0 || m.diffuse_albedo[ch] > 1.0) {
      fail(path + ".kd", "albedo components must lie in [0,1]");
    }
    if (m.specular_albedo[ch] < 0.0 || m.specular_albedo[ch] > 1.0) {
      fail(path + ".ks", "albedo components must lie in [0,1]");
    }
  }
  if (!(m.shininess > 0.0)) fail(path + ".shininess", "must be > 0");
  if (m.blend < 0.0 || m.blend > 1.0) fail(path + ".blend", "must lie in [0,1]");
  return m;
}

}  // namespace

Scene parse_scene(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("top level: expected an object");

  Scene scene;
  if (!root.contains("sh_degree")) throw ParseError("sh_degree: missing");
  if (!root.at("sh_degree").is_number_integer()) throw ParseError("sh_degree: expected an integer");
  scene.sh_degree = root.at("sh_degree").get<int>();
  if (scene.sh_degree < 0 || scene.sh_degree > 9) {
    throw ParseError("sh_degree: must lie in [0,9]");
  }

  const json surfels = root.value("surfels", json::array());
  if (!surfels.is_array()) throw ParseError("surfels: expected an array");
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    const std::string path = "surfels[" + std::to_string(i) + "]";
    const json& js = surfels[i];
    if (!js.is_object()) fail(path, "expected an object");
    Surfel s;
    s.center = get_vec3(js.at("center"), path + ".center");
    s.tangent_u = get_vec3(js.at("tangent_u"), path + ".tangent_u");
    s.tangent_v = get_vec3(js.at("tangent_v"), path + ".tangent_v");

    if (std::abs(s.tangent_u.norm() - 1.0) > 1e-4 ||
        std::abs(s.tangent_v.norm() - 1.0) > 1e-4) {
      fail(path + ".tangent_u", "tangent vectors must be unit length");
    }
    if (std::abs(s.tangent_u.normalized().dot(s.tangent_v.normalized())) > 1e-4) {
      fail(path + ".tangent_v", "tangent frame is not orthogonal");
    }
    // Canonicalize to an exactly orthonormal frame.
    s.tangent_u.normalize();
    s.tangent_v = (s.tangent_v - s.tangent_v.dot(s.tangent_u) * s.tangent_u).normalized();

    const json& scale = js.at("scale");
    if (!scale.is_array() || scale.size() != 2) fail(path + ".scale", "expected [su, sv]");
    s.scale[0] = get_number(scale[0], path + ".scale[0]");
    s.scale[1] = get_number(scale[1], path + ".scale[1]");
    if (!(s.scale[0] > 0.0)) fail(path + ".scale[0]", "must be > 0");
    if (!(s.scale[1] > 0.0)) fail(path + ".scale[1]", "must be > 0");

    s.g = get_number(js.at("g"), path + ".g");
    if (s.g < 0.0) fail(path + ".g", "must be >= 0");

    const double lambda = js.contains("lambda") ? get_number(js.at("lambda"), path + ".lambda") : 1.0;
    if (!(lambda > 0.0)) fail(path + ".lambda", "must be > 0");
    s.log_lambda = std::log(lambda);

    s.material = parse_material(js.at("material"), path + ".material");
    const bool has_brdf = js.contains("brdf_sh") && !js.at("brdf_sh").is_null();
    s.brdf = has_brdf ? get_color_sh(js.at("brdf_sh"), scene.sh_degree, path + ".brdf_sh")
                      : phong_brdf_coeffs(s.material, scene.sh_degree);

    if (js.contains("emission_sh") && !js.at("emission_sh").is_null()) {
      s.emission = get_color_sh(js.at("emission_sh"), scene.sh_degree, path + ".emission_sh");
      s.is_light = s.emission.abs().maxCoeff() > 0.0;
    } else {
      s.emission = zero_color_sh(scene.sh_degree);
    }
    s.kind = LightKind::surfel;
    scene.kernels.push_back(std::move(s));
  }
  scene.surfel_count = scene.kernels.size();

  const json lights = root.value("lights", json::array());
  if (!lights.is_array()) throw ParseError("lights: expected an array");
  for (std::size_t i = 0; i < lights.size(); ++i) {
    const std::string path = "lights[" + std::to_string(i) + "]";
    const json& jl = lights[i];
    if (!jl.is_object()) fail(path, "expected an object");
    const std::string kind = jl.value("kind", "");
    Surfel s;
    s.scale = Vec2::Zero();
    s.g = 0.0;
    s.material = Material{RGB::Zero(), RGB::Zero(), 1.0, 1.0};
    s.brdf = zero_color_sh(scene.sh_degree);
    s.is_light = true;
    if (kind == "point") {
      s.kind = LightKind::point;
      s.center = get_vec3(jl.at("position"), path + ".position");
    } else if (kind == "directional") {
      s.kind = LightKind::directional;
      const Vec3 d = get_vec3(jl.at("direction"), path + ".direction");
      if (d.norm() == 0.0) fail(path + ".direction", "must be non-zero");
      s.center = d.normalized();
    } else {
      fail(path + ".kind", "expected \"point\" or \"directional\"");
    }
    s.emission = isotropic_emission(get_rgb(jl.at("intensity"), path + ".intensity"),
                                    scene.sh_degree);
    scene.kernels.push_back(std::move(s));
  }

  scene.validate();
  return scene;
}

std::string serialize_scene(const Scene& scene) {
  json root;
  root["sh_degree"] = scene.sh_degree;
  json surfels = json::array();
  for (std::size_t i = 0; i < scene.surfel_count; ++i) {
    const Surfel& s = scene.kernels[i];
    json js;
    js["center"] = vec3_to_json(s.center);
    js["tangent_u"] = vec3_to_json(s.tangent_u);
    js["tangent_v"] = vec3_to_json(s.tangent_v);
    js["scale"] = json::array({s.scale[0], s.scale[1]});
    js["g"] = s.g;
    js["lambda"] = s.lambda();
    json jm;
    jm["kd"] = rgb_to_json(s.material.diffuse_albedo);
    jm["ks"] = rgb_to_json(s.material.specular_albedo);
    jm["shininess"] = s.material.shininess;
    jm["blend"] = s.material.blend;
    js["material"] = jm;
    if (s.is_light) js["emission_sh"] = color_sh_to_json(s.emission);
    const ColorSH derived = phong_brdf_coeffs(s.material, scene.sh_degree);
    if ((s.brdf - derived).abs().maxCoeff() != 0.0) {
      js["brdf_sh"] = color_sh_to_json(s.brdf);
    }
    surfels.push_back(std::move(js));
  }
  root["surfels"] = std::move(surfels);

  json lights = json::array();
  for (std::size_t i = scene.surfel_count; i < scene.kernels.size(); ++i) {
    const Surfel& s = scene.kernels[i];
    json jl;
    if (s.kind == LightKind::point) {
      jl["kind"] = "point";
      jl["position"] = vec3_to_json(s.center);
    } else {
      jl["kind"] = "directional";
      jl["direction"] = vec3_to_json(s.center);
    }
    const double c = 2.0 * std::sqrt(std::numbers::pi);
    jl["intensity"] = json::array({s.emission(0, 0) / c, s.emission(0, 1) / c,
                                   s.emission(0, 2) / c});
    lights.push_back(std::move(jl));
  }
  root["lights"] = std::move(lights);
  return root.dump(2) + "\n";
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open scene file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scene file: " + path);
  out << serialize_scene(scene);
}

}  // namespace surad
