#include "fourierf/render.hpp"

#include <cmath>
#include <stdexcept>

namespace fourierf::render {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double Camera::rotation_error() const {
  Eigen::Matrix3d r = rotation();
  Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff();
}

void Camera::validate(double tol) const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("Camera: empty image plane");
  if (!(focal > 0.0)) throw std::invalid_argument("Camera: focal must be > 0");
  if (rotation_error() > tol)
    throw std::invalid_argument("Camera: rotation block is not orthonormal");
}

Camera look_at_camera(const Vec3& position, const Vec3& target, const Vec3& up, int width,
                      int height, double focal) {
  Vec3 z = (position - target).normalized();  // camera looks down -z
  Vec3 x = up.cross(z).normalized();
  Vec3 y = z.cross(x);
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.focal = focal;
  cam.c2w = Eigen::Matrix4d::Identity();
  cam.c2w.block<3, 1>(0, 0) = x;
  cam.c2w.block<3, 1>(0, 1) = y;
  cam.c2w.block<3, 1>(0, 2) = z;
  cam.c2w.block<3, 1>(0, 3) = position;
  return cam;
}

Ray pixel_ray(const Camera& cam, int u, int v) {
  if (u < 0 || u >= cam.width || v < 0 || v >= cam.height)
    throw std::out_of_range("pixel_ray: pixel outside the image");
  const double cx = cam.width / 2.0;
  const double cy = cam.height / 2.0;
  Vec3 dir_cam((u + 0.5 - cx) / cam.focal, -(v + 0.5 - cy) / cam.focal, -1.0);
  Ray ray;
  ray.origin = cam.origin();
  ray.dir = (cam.rotation() * dir_cam).normalized();
  return ray;
}

std::vector<Ray> generate_rays(const Camera& cam, std::span<const std::pair<int, int>> pixels) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const auto& [u, v] : pixels) rays.push_back(pixel_ray(cam, u, v));
  return rays;
}

SampleRow sample_along_ray(double near, double far, int n_samples, bool jitter,
                           std::mt19937_64& rng) {
  if (!(0.0 < near && near < far))
    throw std::invalid_argument("sample_along_ray: need 0 < near < far");
  if (n_samples < 2) throw std::invalid_argument("sample_along_ray: need n_samples >= 2");

  const double bin = (far - near) / n_samples;
  SampleRow row;
  row.t.resize(n_samples);
  row.delta.resize(n_samples);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < n_samples; ++s) {
    double offset = jitter ? unit(rng) : 0.5;
    row.t[s] = near + (s + offset) * bin;
  }
  for (int s = 0; s + 1 < n_samples; ++s) row.delta[s] = row.t[s + 1] - row.t[s];
  row.delta[n_samples - 1] = bin;
  return row;
}

Decoder make_decoder(int feature_dim, int hidden, bool use_viewdir, std::mt19937_64& rng,
                     double init_std) {
  if (feature_dim < 1 || hidden < 1) throw std::invalid_argument("make_decoder: bad shape");
  Decoder d;
  d.feature_dim = feature_dim;
  d.hidden = hidden;
  d.use_viewdir = use_viewdir;
  std::normal_distribution<double> dist(0.0, init_std);
  d.w1.resize(static_cast<size_t>(hidden) * d.in_dim());
  d.w2.resize(static_cast<size_t>(3) * hidden);
  for (double& x : d.w1) x = dist(rng);
  for (double& x : d.w2) x = dist(rng);
  return d;
}

Rgb decode_color(const Decoder& dec, std::span<const double> features, const Vec3& d) {
  if (features.size() != static_cast<size_t>(dec.feature_dim))
    throw std::invalid_argument("decode_color: feature size mismatch");
  const int in = dec.in_dim();
  std::vector<double> x(in);
  std::copy(features.begin(), features.end(), x.begin());
  if (dec.use_viewdir)
    for (int a = 0; a < 3; ++a) x[dec.feature_dim + a] = d[a];

  std::vector<double> h(dec.hidden);
  for (int jj = 0; jj < dec.hidden; ++jj) {
    const double* row = dec.w1.data() + static_cast<size_t>(jj) * in;
    double acc = 0.0;
    for (int ii = 0; ii < in; ++ii) acc += row[ii] * x[ii];
    h[jj] = acc > 0.0 ? acc : 0.0;
  }
  Rgb rgb;
  for (int c = 0; c < 3; ++c) {
    const double* row = dec.w2.data() + static_cast<size_t>(c) * dec.hidden;
    double acc = 0.0;
    for (int jj = 0; jj < dec.hidden; ++jj) acc += row[jj] * h[jj];
    rgb[c] = sigmoid(acc);
  }
  return rgb;
}

RenderedPixel composite(std::span<const double> sigma, std::span<const Rgb> rgb,
                        std::span<const double> delta, std::span<const double> t,
                        const Rgb& background, double stop_transmittance) {
  const size_t n = sigma.size();
  if (rgb.size() != n || delta.size() != n || t.size() != n)
    throw std::invalid_argument("composite: per-sample arrays must share one length");

  RenderedPixel out;
  double transmittance = 1.0;
  for (size_t s = 0; s < n; ++s) {
    const double alpha = -std::expm1(-sigma[s] * delta[s]);
    const double w = transmittance * alpha;
    for (int c = 0; c < 3; ++c) out.rgb[c] += w * rgb[s][c];
    out.depth += w * t[s];
    out.opacity += w;
    transmittance *= 1.0 - alpha;
    if (stop_transmittance > 0.0 && transmittance < stop_transmittance) break;
  }
  for (int c = 0; c < 3; ++c) out.rgb[c] += transmittance * background[c];
  return out;
}

}  // namespace fourierf::render
