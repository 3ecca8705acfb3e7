#include "surad/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "surad/parallel.hpp"
#include "surad/solvers.hpp"

namespace surad {

namespace {

struct Hit {
  double t;
  std::uint32_t kernel;
  double alpha;
};

// All surfel hits along the ray, sorted by depth with index tie-break.
void collect_hits(const Scene& scene, const Vec3& origin, const Vec3& dir,
                  std::vector<Hit>& hits) {
  hits.clear();
  for (std::size_t i = 0; i < scene.kernel_count(); ++i) {
    const Surfel& s = scene.kernels[i];
    if (!s.occludes()) continue;
    const auto rec = ray_intersect(s, i, origin, dir, scene.settings);
    if (rec) hits.push_back({rec->t, static_cast<std::uint32_t>(i), rec->alpha});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.t != b.t ? a.t < b.t : a.kernel < b.kernel;
  });
}

RGB composite(const std::vector<Hit>& hits, const Vec3& dir,
              const std::function<RGB(std::size_t, const Vec3&)>& value_of) {
  RGB pixel = RGB::Zero();
  double transmit = 1.0;
  for (const Hit& h : hits) {
    pixel += (transmit * h.alpha) * value_of(h.kernel, dir);
    transmit *= 1.0 - h.alpha;
  }
  return pixel;
}

RGB radiosity_value(const Scene& scene, const SolveState& state, std::size_t kernel,
                    const Vec3& dir, SHVector& y_scratch) {
  const Surfel& s = scene.kernels[kernel];
  eval_sh_into(s.to_local(-dir), scene.sh_degree, y_scratch.data());
  RGB out;
  for (int ch = 0; ch < 3; ++ch) {
    out[ch] = std::max(0.0, state.radiosity[kernel].col(ch).matrix().dot(y_scratch));
  }
  return out;
}

ImageBuffer render_with(const Scene& scene, const Camera& camera,
                        const std::function<RGB(std::size_t, const Vec3&)>& value_of) {
  ImageBuffer img(camera.width, camera.height);
  parallel_for(static_cast<std::size_t>(camera.width) * camera.height, [&](std::size_t p) {
    const int x = static_cast<int>(p % camera.width);
    const int y = static_cast<int>(p / camera.width);
    const Vec3 dir = camera.ray_dir(x, y);
    std::vector<Hit> hits;
    collect_hits(scene, camera.position, dir, hits);
    img.at(x, y) = composite(hits, dir, value_of);
  });
  return img;
}

void put_float_le(std::ofstream& out, float v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.write(bytes, 4);
}

}  // namespace

Camera Camera::look_at(const Vec3& position, const Vec3& target, const Vec3& up,
                       double vfov, int width, int height) {
  if (!(vfov > 0.0) || vfov >= 3.14159265358979) {
    throw std::invalid_argument("camera: vfov must lie in (0, pi)");
  }
  if (width < 1 || height < 1) throw std::invalid_argument("camera: resolution must be >= 1");
  Camera c;
  c.position = position;
  const Vec3 forward = (target - position).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) {
    throw std::invalid_argument("camera: up is parallel to the view direction");
  }
  right.normalize();
  c.orientation.col(0) = right;
  c.orientation.col(1) = right.cross(forward);
  c.orientation.col(2) = forward;
  c.vfov = vfov;
  c.width = width;
  c.height = height;
  return c;
}

Vec3 Camera::ray_dir(int x, int y) const {
  const double tan_half = std::tan(0.5 * vfov);
  const double aspect = static_cast<double>(width) / height;
  const double ndc_x = (2.0 * (x + 0.5) / width - 1.0) * tan_half * aspect;
  const double ndc_y = (1.0 - 2.0 * (y + 0.5) / height) * tan_half;
  return (orientation.col(2) + ndc_x * orientation.col(0) + ndc_y * orientation.col(1))
      .normalized();
}

RGB trace_pixel(const Scene& scene, const SolveState& state, const Vec3& origin,
                const Vec3& dir) {
  std::vector<Hit> hits;
  collect_hits(scene, origin, dir, hits);
  SHVector y(scene.coeff_count());
  return composite(hits, dir, [&](std::size_t kernel, const Vec3& d) {
    return radiosity_value(scene, state, kernel, d, y);
  });
}

RenderPass parse_render_pass(const std::string& name) {
  if (name == "full") return RenderPass::full;
  if (name == "direct") return RenderPass::direct;
  if (name == "indirect") return RenderPass::indirect;
  if (name == "albedo") return RenderPass::albedo;
  if (name == "shininess") return RenderPass::shininess;
  throw std::invalid_argument("unknown render pass: " + name);
}

ImageBuffer render_image(const Scene& scene, const SolveState& state,
                         const Camera& camera, RenderPass pass) {
  switch (pass) {
    case RenderPass::full: {
      return render_with(scene, camera, [&](std::size_t kernel, const Vec3& dir) {
        thread_local SHVector y;
        y.resize(scene.coeff_count());
        return radiosity_value(scene, state, kernel, dir, y);
      });
    }
    case RenderPass::direct: {
      const SolveState direct = solve_direct(scene);
      return render_image(scene, direct, camera, RenderPass::full);
    }
    case RenderPass::indirect: {
      const ImageBuffer full = render_image(scene, state, camera, RenderPass::full);
      const ImageBuffer direct = render_image(scene, state, camera, RenderPass::direct);
      ImageBuffer out(camera.width, camera.height);
      for (std::size_t p = 0; p < out.pixels.size(); ++p) {
        out.pixels[p] = full.pixels[p] - direct.pixels[p];
      }
      return out;
    }
    case RenderPass::albedo: {
      return render_with(scene, camera, [&](std::size_t kernel, const Vec3&) {
        return scene.kernels[kernel].material.diffuse_albedo;
      });
    }
    case RenderPass::shininess: {
      const double bound = max_shininess(scene.sh_degree);
      return render_with(scene, camera, [&](std::size_t kernel, const Vec3&) {
        const double v =
            std::clamp(scene.kernels[kernel].material.shininess / bound, 0.0, 1.0);
        return RGB::Constant(v);
      });
    }
  }
  throw std::invalid_argument("unknown render pass");
}

void write_pfm(const ImageBuffer& buffer, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "PF\n" << buffer.width << " " << buffer.height << "\n-1.0\n";
  for (int y = buffer.height - 1; y >= 0; --y) {
    for (int x = 0; x < buffer.width; ++x) {
      const RGB& p = buffer.at(x, y);
      put_float_le(out, static_cast<float>(p[0]));
      put_float_le(out, static_cast<float>(p[1]));
      put_float_le(out, static_cast<float>(p[2]));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ImageBuffer read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (magic != "PF" || w < 1 || h < 1) throw std::runtime_error("not a color PFM: " + path);
  if (scale >= 0.0) throw std::runtime_error("big-endian PFM unsupported: " + path);
  in.get();  // the single whitespace after the scale
  ImageBuffer img(w, h);
  std::vector<float> row(static_cast<std::size_t>(w) * 3);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated PFM: " + path);
    for (int x = 0; x < w; ++x) {
      img.at(x, y) = RGB(row[3 * x], row[3 * x + 1], row[3 * x + 2]);
    }
  }
  return img;
}

void write_ppm(const ImageBuffer& buffer, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << buffer.width << " " << buffer.height << "\n255\n";
  for (int y = 0; y < buffer.height; ++y) {
    for (int x = 0; x < buffer.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(buffer.at(x, y)[ch], 0.0, 1.0);
        const double encoded = std::pow(v, 1.0 / 2.2);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * encoded))));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

LossBackward image_loss_backward(const Scene& scene, const SolveState& state,
                                 const Camera& camera, const ImageBuffer& target,
                                 LossKind loss) {
  if (target.width != camera.width || target.height != camera.height) {
    throw std::invalid_argument("image_loss_backward: resolution mismatch");
  }
  const std::size_t npix = static_cast<std::size_t>(camera.width) * camera.height;
  const double inv_npix = 1.0 / static_cast<double>(npix);
  const std::size_t n = scene.kernel_count();

  LossBackward out;
  out.rendered = ImageBuffer(camera.width, camera.height);
  out.radiosity_grad.assign(n, zero_color_sh(scene.sh_degree));

  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = chunk_count(npix, kChunk);
  std::vector<std::vector<ColorSH>> grad_parts(chunks);
  std::vector<double> loss_parts(chunks, 0.0);

  parallel_chunks(npix, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    auto& grad = grad_parts[c];
    grad.assign(n, zero_color_sh(scene.sh_degree));
    std::vector<Hit> hits;
    SHVector y(scene.coeff_count());
    double loss_acc = 0.0;
    for (std::size_t p = begin; p < end; ++p) {
      const int x = static_cast<int>(p % camera.width);
      const int py = static_cast<int>(p / camera.width);
      const Vec3 dir = camera.ray_dir(x, py);
      collect_hits(scene, camera.position, dir, hits);

      RGB pixel = RGB::Zero();
      double transmit = 1.0;
      // First pass: the clamped composite.
      std::vector<std::pair<double, bool>> weight_gate;
      weight_gate.reserve(hits.size() * 3);
      for (const Hit& h : hits) {
        const Surfel& s = scene.kernels[h.kernel];
        eval_sh_into(s.to_local(-dir), scene.sh_degree, y.data());
        const double w = transmit * h.alpha;
        for (int ch = 0; ch < 3; ++ch) {
          const double val = state.radiosity[h.kernel].col(ch).matrix().dot(y);
          pixel[ch] += w * std::max(0.0, val);
          weight_gate.emplace_back(w, val > 0.0);
        }
        transmit *= 1.0 - h.alpha;
      }
      out.rendered.at(x, py) = pixel;

      const RGB diff = pixel - target.at(x, py);
      RGB dpix;
      if (loss == LossKind::l1) {
        loss_acc += diff.abs().sum() * inv_npix;
        for (int ch = 0; ch < 3; ++ch) {
          dpix[ch] = diff[ch] > 0.0 ? inv_npix : (diff[ch] < 0.0 ? -inv_npix : 0.0);
        }
      } else {
        loss_acc += (diff * diff).sum() * inv_npix;
        dpix = 2.0 * diff * inv_npix;
      }

      // Second pass: scatter dL/dpixel through the compositing weights; the
      // clamp gates coefficients whose reconstruction went negative.
      std::size_t slot = 0;
      for (const Hit& h : hits) {
        const Surfel& s = scene.kernels[h.kernel];
        eval_sh_into(s.to_local(-dir), scene.sh_degree, y.data());
        for (int ch = 0; ch < 3; ++ch, ++slot) {
          const auto [w, open] = weight_gate[slot];
          if (!open) continue;
          grad[h.kernel].col(ch) += (w * dpix[ch]) * y.array();
        }
      }
    }
    loss_parts[c] = loss_acc;
  });

  for (std::size_t c = 0; c < chunks; ++c) {
    out.loss += loss_parts[c];
    for (std::size_t k = 0; k < n; ++k) out.radiosity_grad[k] += grad_parts[c][k];
  }
  return out;
}

}  // namespace surad
