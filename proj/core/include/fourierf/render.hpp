#pragma once

#include <Eigen/Dense>
#include <array>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "fourierf/field.hpp"
#include "fourierf/image.hpp"

namespace fourierf::render {

using field::Vec3;

/// Pinhole camera in the NeRF-synthetic OpenGL convention: the camera looks
/// down -z with +y up; c2w maps camera space to world space.
struct Camera {
  int width = 0;
  int height = 0;
  double focal = 0.0;  // pixels
  Eigen::Matrix4d c2w = Eigen::Matrix4d::Identity();

  Vec3 origin() const { return c2w.block<3, 1>(0, 3); }
  Eigen::Matrix3d rotation() const { return c2w.block<3, 3>(0, 0); }
  /// Throws std::invalid_argument if the rotation block is not orthonormal
  /// within `tol` or focal <= 0.
  void validate(double tol = 1e-6) const;
  double rotation_error() const;  // max abs deviation of R^T R from identity
};

/// Builds a camera at `position` looking at `target` (OpenGL convention).
Camera look_at_camera(const Vec3& position, const Vec3& target, const Vec3& up, int width,
                      int height, double focal);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();  // unit length
};

/// Ray through the center of pixel (u,v). Throws on out-of-range pixels.
Ray pixel_ray(const Camera& cam, int u, int v);

std::vector<Ray> generate_rays(const Camera& cam, std::span<const std::pair<int, int>> pixels);

/// Quadrature nodes along one ray: positions t (strictly increasing) and
/// segment lengths delta (delta_s = t_{s+1} - t_s; the final segment is
/// (far-near)/n).
struct SampleRow {
  std::vector<double> t;
  std::vector<double> delta;
};

/// Stratified sampling of [near, far] into n bins; bin midpoints when
/// jitter is off, one uniform draw per bin otherwise.
SampleRow sample_along_ray(double near, double far, int n_samples, bool jitter,
                           std::mt19937_64& rng);

/// Two-layer perceptron mapping appearance features (optionally
/// concatenated with the unit view direction) to RGB:
/// rgb = sigmoid(W2 * relu(W1 * x)). No positional encodings.
struct Decoder {
  int feature_dim = 27;
  int hidden = 64;
  bool use_viewdir = false;  // off: color is independent of view direction
  std::vector<double> w1;    // hidden x in_dim, row-major
  std::vector<double> w2;    // 3 x hidden, row-major

  int in_dim() const { return feature_dim + (use_viewdir ? 3 : 0); }
};

Decoder make_decoder(int feature_dim, int hidden, bool use_viewdir, std::mt19937_64& rng,
                     double init_std);

Rgb decode_color(const Decoder& dec, std::span<const double> features, const Vec3& d);

struct RenderedPixel {
  Rgb rgb{0, 0, 0};
  double depth = 0.0;    // expected termination distance
  double opacity = 0.0;  // accumulated weight, in [0,1]
};

/// Front-to-back emission-absorption compositing:
/// alpha_s = 1 - exp(-sigma_s*delta_s), T_s = prod_{q<s}(1-alpha_q),
/// w_s = T_s*alpha_s; rgb = sum w_s rgb_s + (1 - sum w_s)*background.
/// `stop_transmittance` > 0 enables early termination when T drops below it.
RenderedPixel composite(std::span<const double> sigma, std::span<const Rgb> rgb,
                        std::span<const double> delta, std::span<const double> t,
                        const Rgb& background, double stop_transmittance = 0.0);

struct RenderConfig {
  double near = 2.0;
  double far = 6.0;
  int n_samples = 128;
  Rgb background{1.0, 1.0, 1.0};
  double stop_transmittance = 1e-4;  // early ray termination; 0 disables
  int threads = 0;                   // 0 or 1 = single-threaded
};

}  // namespace fourierf::render
