#pragma once

#include <string>
#include <vector>

#include "surad/scene.hpp"
#include "surad/solve_state.hpp"

namespace surad {

struct Camera {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();  // columns right, up, forward
  double vfov = 0.8;                    // vertical field of view, radians
  int width = 64;
  int height = 64;

  static Camera look_at(const Vec3& position, const Vec3& target, const Vec3& up,
                        double vfov, int width, int height);

  // Primary ray through the center of pixel (x, y); row 0 is the top row.
  Vec3 ray_dir(int x, int y) const;
};

// Linear RGB radiance, row-major with row 0 at the top.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<RGB> pixels;

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), pixels(w * h, RGB::Zero()) {}
  RGB& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const RGB& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Front-to-back compositing of all intersected surfels; each SH evaluation is
// clamped below at zero (reconstruction may ring negative). Depth ties break
// by surfel index.
RGB trace_pixel(const Scene& scene, const SolveState& state, const Vec3& origin,
                const Vec3& dir);

enum class RenderPass { full, direct, indirect, albedo, shininess };
RenderPass parse_render_pass(const std::string& name);  // throws on unknown names

// View-independent rendering: the full pass reads the given state and
// performs no transport solve. The direct pass re-solves with a single
// progressive-refinement light pass; indirect is full minus direct.
ImageBuffer render_image(const Scene& scene, const SolveState& state,
                         const Camera& camera, RenderPass pass = RenderPass::full);

// PFM: "PF\n<w> <h>\n-1.0\n", rows bottom-to-top, little-endian float32 RGB.
void write_pfm(const ImageBuffer& buffer, const std::string& path);
ImageBuffer read_pfm(const std::string& path);

// Binary P6 with 2.2 gamma; value = round(255 * clamp(v,0,1)^(1/2.2)).
void write_ppm(const ImageBuffer& buffer, const std::string& path);

enum class LossKind { l1, l2 };

struct LossBackward {
  double loss = 0.0;
  std::vector<ColorSH> radiosity_grad;  // dL/dB per kernel
  ImageBuffer rendered;
};

// Renders the state through the camera, evaluates the mean-reduced image
// loss against the target, and backpropagates through the compositing
// weights (constants w.r.t. B) into per-kernel dL/dB.
LossBackward image_loss_backward(const Scene& scene, const SolveState& state,
                                 const Camera& camera, const ImageBuffer& target,
                                 LossKind loss);

}  // namespace surad
