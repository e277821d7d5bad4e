#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "fourierf/data.hpp"
#include "fourierf/model.hpp"
#include "fourierf/render.hpp"

using namespace fourierf;
using field::Vec3;
using render::Camera;

namespace {

Camera identity_camera(int wh, double focal) {
  Camera cam;
  cam.width = wh;
  cam.height = wh;
  cam.focal = focal;
  return cam;
}

// Scalar re-implementation of the two-layer decoder for cross-checking.
Rgb reference_decoder(const render::Decoder& d, const std::vector<double>& feat,
                      const Vec3& dir) {
  std::vector<double> x(feat);
  if (d.use_viewdir) {
    x.push_back(dir[0]);
    x.push_back(dir[1]);
    x.push_back(dir[2]);
  }
  Rgb out;
  std::vector<double> h(d.hidden);
  for (int j = 0; j < d.hidden; ++j) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += d.w1[j * x.size() + i] * x[i];
    h[j] = std::max(acc, 0.0);
  }
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (int j = 0; j < d.hidden; ++j) acc += d.w2[c * d.hidden + j] * h[j];
    out[c] = 1.0 / (1.0 + std::exp(-acc));
  }
  return out;
}

// Rank-1 CP grid evaluating to a constant raw density everywhere.
field::FactorGrid constant_raw_grid(const field::GridDims& dims, double raw) {
  field::FactorGrid g;
  g.decomp = field::Decomp::CP;
  g.dims = dims;
  g.cp.resize(1);
  g.cp[0].v[0].assign(dims.i, raw);
  g.cp[0].v[1].assign(dims.j, 1.0);
  g.cp[0].v[2].assign(dims.k, 1.0);
  return g;
}

Model transparent_model(const field::GridDims& dims) {
  Model m;
  m.field.dims = dims;
  m.field.density = constant_raw_grid(dims, -1e6);  // softplus underflows to exactly 0
  m.field.appearance = constant_raw_grid(dims, 0.0);
  m.field.channels = 4;
  m.field.app_basis.assign(4 * 1, 0.0);
  std::mt19937_64 rng(5);
  m.decoder = render::make_decoder(4, 8, false, rng, 0.1);
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("render");

TEST_CASE("pixel rays follow the pinhole geometry") {
  Camera cam = identity_camera(101, 120.0);
  SUBCASE("center pixel looks down -z") {
    render::Ray r = render::pixel_ray(cam, 50, 50);
    CHECK((r.dir - Vec3(0, 0, -1)).norm() < 1e-12);
    CHECK(r.origin.norm() == 0.0);
  }
  SUBCASE("one pixel right of center tilts by 1/focal") {
    render::Ray r = render::pixel_ray(cam, 51, 50);
    Vec3 want = Vec3(1.0 / 120.0, 0, -1).normalized();
    CHECK((r.dir - want).norm() < 1e-12);
  }
  SUBCASE("translation moves origins, not directions") {
    Camera moved = cam;
    moved.c2w(0, 3) = 0.0;
    moved.c2w(1, 3) = 0.0;
    moved.c2w(2, 3) = 4.0;
    render::Ray a = render::pixel_ray(cam, 13, 77);
    render::Ray b = render::pixel_ray(moved, 13, 77);
    CHECK((a.dir - b.dir).norm() == 0.0);
    CHECK((b.origin - Vec3(0, 0, 4)).norm() == 0.0);
  }
  SUBCASE("out-of-range pixels are rejected") {
    CHECK_THROWS_AS(render::pixel_ray(cam, -1, 0), std::out_of_range);
    CHECK_THROWS_AS(render::pixel_ray(cam, 0, 101), std::out_of_range);
  }
  SUBCASE("ray directions are unit length") {
    std::vector<std::pair<int, int>> px{{0, 0}, {100, 100}, {3, 88}};
    for (const render::Ray& r : render::generate_rays(cam, px))
      CHECK(std::abs(r.dir.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("camera validation") {
  Camera cam = identity_camera(8, 10.0);
  CHECK_NOTHROW(cam.validate());
  cam.c2w(0, 0) = 1.5;
  CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
  Camera bad_focal = identity_camera(8, 0.0);
  CHECK_THROWS_AS(bad_focal.validate(), std::invalid_argument);
}

TEST_CASE("stratified sampling") {
  std::mt19937_64 rng(6);
  SUBCASE("midpoints without jitter") {
    render::SampleRow row = render::sample_along_ray(2.0, 6.0, 4, false, rng);
    std::vector<double> want{2.5, 3.5, 4.5, 5.5};
    for (int s = 0; s < 4; ++s) {
      CHECK(row.t[s] == doctest::Approx(want[s]).epsilon(1e-12));
      CHECK(row.delta[s] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("jittered samples stay inside their bins") {
    render::SampleRow row = render::sample_along_ray(2.0, 6.0, 8, true, rng);
    const double bin = 0.5;
    for (int s = 0; s < 8; ++s) {
      CHECK(row.t[s] >= 2.0 + s * bin);
      CHECK(row.t[s] < 2.0 + (s + 1) * bin);
      if (s > 0) CHECK(row.t[s] > row.t[s - 1]);
    }
  }
  SUBCASE("bad arguments are rejected") {
    CHECK_THROWS_AS(render::sample_along_ray(0.0, 6.0, 4, false, rng), std::invalid_argument);
    CHECK_THROWS_AS(render::sample_along_ray(2.0, 1.0, 4, false, rng), std::invalid_argument);
    CHECK_THROWS_AS(render::sample_along_ray(2.0, 6.0, 1, false, rng), std::invalid_argument);
  }
}

TEST_CASE("decode_color") {
  std::mt19937_64 rng(7);
  SUBCASE("zero weights give mid gray") {
    render::Decoder d = render::make_decoder(5, 16, false, rng, 0.1);
    std::fill(d.w1.begin(), d.w1.end(), 0.0);
    std::fill(d.w2.begin(), d.w2.end(), 0.0);
    Rgb rgb = render::decode_color(d, std::vector<double>{1, 2, 3, 4, 5}, Vec3(0, 0, -1));
    for (double c : rgb) CHECK(c == 0.5);
  }
  SUBCASE("without view direction the color ignores d") {
    render::Decoder d = render::make_decoder(6, 32, false, rng, 0.2);
    std::vector<double> feat{0.3, -0.2, 0.9, 0.1, -0.5, 0.4};
    Rgb a = render::decode_color(d, feat, Vec3(0, 0, -1));
    Rgb b = render::decode_color(d, feat, Vec3(1, 0, 0));
    for (int c = 0; c < 3; ++c) CHECK(a[c] == b[c]);
  }
  SUBCASE("matches the scalar reference forward pass") {
    for (bool viewdir : {false, true}) {
      render::Decoder d = render::make_decoder(7, 24, viewdir, rng, 0.3);
      std::vector<double> feat(7);
      std::normal_distribution<double> dist(0.0, 1.0);
      for (double& x : feat) x = dist(rng);
      Vec3 dir = Vec3(0.3, -0.5, 0.9).normalized();
      Rgb got = render::decode_color(d, feat, dir);
      Rgb want = reference_decoder(d, feat, dir);
      for (int c = 0; c < 3; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("composite") {
  SUBCASE("empty space returns the background") {
    std::vector<double> sigma(8, 0.0), delta(8, 0.5), t(8);
    for (int s = 0; s < 8; ++s) t[s] = 1.0 + 0.5 * s;
    std::vector<Rgb> rgb(8, Rgb{0.2, 0.3, 0.4});
    render::RenderedPixel px = render::composite(sigma, rgb, delta, t, {1, 0.5, 0.25});
    CHECK(px.rgb[0] == 1.0);
    CHECK(px.rgb[1] == 0.5);
    CHECK(px.rgb[2] == 0.25);
    CHECK(px.opacity == 0.0);
  }
  SUBCASE("single sample with sigma*delta = ln 2 blends half and half") {
    std::vector<double> sigma{std::log(2.0)}, delta{1.0}, t{3.0};
    std::vector<Rgb> rgb{Rgb{1, 0, 0}};
    render::RenderedPixel px = render::composite(sigma, rgb, delta, t, {0, 0, 1});
    CHECK(px.rgb[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(px.rgb[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(px.opacity == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("an opaque first sample hides everything behind it") {
    std::vector<double> sigma{1e9, 5.0}, delta{1.0, 1.0}, t{2.0, 3.0};
    std::vector<Rgb> rgb{Rgb{0.1, 0.2, 0.3}, Rgb{0.9, 0.9, 0.9}};
    render::RenderedPixel px = render::composite(sigma, rgb, delta, t, {1, 1, 1});
    CHECK(px.rgb[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(px.depth == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(px.opacity == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("compositing conserves weight") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> usig(0.0, 50.0), udel(1e-3, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 63);
    std::vector<double> sigma(n), delta(n), t(n);
    std::vector<Rgb> rgb(n, Rgb{0.5, 0.5, 0.5});
    double pos = 1.0;
    for (int s = 0; s < n; ++s) {
      sigma[s] = usig(rng);
      delta[s] = udel(rng);
      t[s] = pos;
      pos += delta[s];
    }
    // weights + final transmittance telescope to one
    double transmittance = 1.0;
    double wsum = 0.0;
    for (int s = 0; s < n; ++s) {
      const double alpha = -std::expm1(-sigma[s] * delta[s]);
      wsum += transmittance * alpha;
      transmittance *= 1.0 - alpha;
    }
    CHECK(std::abs(wsum + transmittance - 1.0) < 1e-12);

    render::RenderedPixel px = render::composite(sigma, rgb, delta, t, {0, 0, 0});
    CHECK(px.opacity == doctest::Approx(wsum).epsilon(1e-12));
    CHECK(px.opacity >= 0.0);
    CHECK(px.opacity <= 1.0);
    if (px.opacity > 0.0) {
      CHECK(px.depth / px.opacity >= t.front() - 1e-9);
      CHECK(px.depth / px.opacity <= t.back() + 1e-9);
    }
  }
}

TEST_CASE("render_image of a zero-density field is the background") {
  field::GridDims dims{8, 8, 8, Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  Model m = transparent_model(dims);
  Camera cam = render::look_at_camera(Vec3(0, -3, 0.5), Vec3(0, 0, 0), Vec3(0, 0, 1), 16, 16,
                                      20.0);
  render::RenderConfig rc;
  rc.near = 1.0;
  rc.far = 5.0;
  rc.n_samples = 32;
  rc.background = {0.2, 0.9, 0.4};
  RenderResult rr = render_image(m, cam, rc);
  for (size_t i = 0; i < rr.rgb.data.size(); ++i)
    CHECK(rr.rgb.data[i] == rc.background[i % 3]);
  for (double o : rr.opacity) CHECK(o == 0.0);
}

TEST_CASE("render_image is deterministic") {
  ModelConfig mc;
  mc.dims = {16, 16, 16, Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  mc.vm_ranks = mc.vm_ranks_app = {2, 2, 2};
  mc.feature_dim = 8;
  mc.hidden = 16;
  mc.seed = 9;
  Model m = make_model(mc);
  Camera cam = render::look_at_camera(Vec3(0, -2.5, 1), Vec3(0, 0, 0), Vec3(0, 0, 1), 24, 24,
                                      30.0);
  render::RenderConfig rc;
  rc.near = 0.8;
  rc.far = 4.5;
  rc.n_samples = 48;
  RenderResult a = render_image(m, cam, rc);
  RenderResult b = render_image(m, cam, rc);
  CHECK(std::memcmp(a.rgb.data.data(), b.rgb.data.data(),
                    a.rgb.data.size() * sizeof(double)) == 0);

  SUBCASE("row sharding does not change the output") {
    render::RenderConfig rc4 = rc;
    rc4.threads = 4;
    RenderResult c = render_image(m, cam, rc4);
    CHECK(std::memcmp(a.rgb.data.data(), c.rgb.data.data(),
                      a.rgb.data.size() * sizeof(double)) == 0);
  }
}

// Bakes the analytic sphere into an exact VM representation (axis-1 slices)
// with a zero decoder, so the field renderer and the analytic oracle see the
// same scene up to grid discretization.
namespace {

Model bake_sphere(const data::SyntheticSceneSpec& spec, int n) {
  field::GridDims dims{n, n, n, spec.aabb_min, spec.aabb_max};
  Model m;
  m.field.dims = dims;
  m.field.density.decomp = field::Decomp::VM;
  m.field.density.dims = dims;
  for (int axis = 0; axis < 3; ++axis) m.field.density.vm[axis].clear();
  m.field.density.vm[0].resize(n);
  for (int r = 0; r < n; ++r) {
    m.field.density.vm[0][r].line.assign(n, 0.0);
    m.field.density.vm[0][r].line[r] = 1.0;
    m.field.density.vm[0][r].plane.assign(static_cast<size_t>(n) * n, 0.0);
  }
  m.field.density.vm[1].resize(1);
  m.field.density.vm[1][0].line.assign(n, 0.0);
  m.field.density.vm[1][0].plane.assign(static_cast<size_t>(n) * n, 0.0);
  m.field.density.vm[2] = m.field.density.vm[1];

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) {
          const int idx = a == 0 ? i : (a == 1 ? j : k);
          p[a] = dims.aabb_min[a] + (dims.aabb_max[a] - dims.aabb_min[a]) * idx / (n - 1.0);
        }
        const double sigma = data::oracle_density(spec, p).first;
        // inverse softplus; clamp empty space to a deeply negative raw value
        const double raw = sigma > 1e-12 ? std::log(std::expm1(sigma)) : -1e6;
        m.field.density.vm[0][i].plane[static_cast<size_t>(j) * n + k] = raw;
      }

  m.field.appearance = m.field.density;  // shape only; decoder ignores it
  m.field.channels = 4;
  m.field.app_basis.assign(static_cast<size_t>(4) * m.field.appearance.component_count(), 0.0);
  std::mt19937_64 rng(1);
  m.decoder = render::make_decoder(4, 8, false, rng, 0.1);
  std::fill(m.decoder.w1.begin(), m.decoder.w1.end(), 0.0);  // gray 0.5 everywhere
  std::fill(m.decoder.w2.begin(), m.decoder.w2.end(), 0.0);
  return m;
}

}  // namespace

TEST_CASE("baked sphere renders close to the analytic oracle") {
  data::SyntheticSceneSpec spec;
  spec.aabb_min = Vec3(-1, -1, -1);
  spec.aabb_max = Vec3(1, 1, 1);
  data::Primitive sphere;
  sphere.kind = data::Primitive::Kind::Sphere;
  sphere.center = Vec3(0, 0, 0);
  sphere.radius = 0.5;
  sphere.sigma = 40.0;
  sphere.albedo = {0.5, 0.5, 0.5};
  spec.primitives.push_back(sphere);
  spec.background = {1, 1, 1};

  Model m = bake_sphere(spec, 48);
  Camera cam = render::look_at_camera(Vec3(0, 0, 2.5), Vec3(0, 0, 0), Vec3(0, 1, 0), 48, 48,
                                      60.0);
  render::RenderConfig rc;
  rc.near = 1.0;
  rc.far = 4.0;
  rc.n_samples = 256;
  rc.background = spec.background;
  RenderResult rr = render_image(m, cam, rc);
  Image truth = data::oracle_render(spec, cam, 256, 1.0, 4.0);

  double mae = 0.0;
  for (size_t i = 0; i < truth.data.size(); ++i) mae += std::abs(rr.rgb.data[i] - truth.data[i]);
  mae /= truth.data.size();
  CHECK(mae <= 0.05);

  SUBCASE("quadrature error shrinks like 1/n") {
    render::RenderConfig ref_rc = rc;
    ref_rc.n_samples = 2048;
    ref_rc.stop_transmittance = 0.0;
    Image ref = render_image(m, cam, ref_rc).rgb;
    auto mae_vs_ref = [&](int n) {
      render::RenderConfig c = rc;
      c.n_samples = n;
      c.stop_transmittance = 0.0;
      Image img = render_image(m, cam, c).rgb;
      double e = 0.0;
      for (size_t i = 0; i < ref.data.size(); ++i) e += std::abs(img.data[i] - ref.data[i]);
      return e / ref.data.size();
    };
    const double e1 = mae_vs_ref(64);
    const double e2 = mae_vs_ref(128);
    CHECK(e1 / e2 > 1.4);  // halving within +-30%
    CHECK(e1 / e2 < 2.6);
  }
}

TEST_SUITE_END();
