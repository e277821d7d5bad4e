#include <cmath>
#include <random>

#include "doctest.h"
#include "fourierf/metrics.hpp"

using namespace fourierf;
using field::Vec3;

namespace {

Image random_image(int w, int h, std::mt19937_64& rng) {
  Image img(w, h);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : img.data) x = u(rng);
  return img;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("psnr") {
  SUBCASE("identical images hit the infinity sentinel") {
    std::mt19937_64 rng(61);
    Image a = random_image(16, 16, rng);
    CHECK(std::isinf(metrics::psnr(a, a)));
  }
  SUBCASE("MSE of 0.01 is 20 dB") {
    Image a = Image::constant(8, 8, {0.5, 0.5, 0.5});
    Image b = Image::constant(8, 8, {0.6, 0.6, 0.6});
    CHECK(metrics::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
  }
  SUBCASE("constant images 0.5 apart score about 6.02 dB") {
    Image a = Image::constant(8, 8, {0.25, 0.25, 0.25});
    Image b = Image::constant(8, 8, {0.75, 0.75, 0.75});
    CHECK(metrics::psnr(a, b) == doctest::Approx(-10.0 * std::log10(0.25)).epsilon(1e-12));
    CHECK(metrics::psnr(a, b) == doctest::Approx(6.0206).epsilon(1e-4));
  }
  SUBCASE("symmetry") {
    std::mt19937_64 rng(62);
    Image a = random_image(12, 9, rng);
    Image b = random_image(12, 9, rng);
    CHECK(metrics::psnr(a, b) == metrics::psnr(b, a));
  }
  SUBCASE("dimension mismatch is rejected") {
    Image a(4, 4), b(5, 4);
    CHECK_THROWS_AS(metrics::psnr(a, b), std::invalid_argument);
  }
}

TEST_CASE("ssim") {
  SUBCASE("an image is perfectly similar to itself") {
    std::mt19937_64 rng(63);
    for (int trial = 0; trial < 5; ++trial) {
      Image a = random_image(16 + trial, 13 + trial, rng);
      CHECK(metrics::ssim(a, a) == 1.0);
    }
  }
  SUBCASE("a checkerboard against its negative has negative structure") {
    const int wh = 16;
    Image a(wh, wh), b(wh, wh);
    for (int y = 0; y < wh; ++y)
      for (int x = 0; x < wh; ++x) {
        const double v = (x + y) % 2 == 0 ? 1.0 : 0.0;
        for (int c = 0; c < 3; ++c) {
          a.at(x, y, c) = v;
          b.at(x, y, c) = 1.0 - v;
        }
      }
    CHECK(metrics::ssim(a, b) < 0.0);
  }
  SUBCASE("constant images reduce to the luminance term") {
    const double va = 0.3, vb = 0.7;
    Image a = Image::constant(16, 16, {va, va, va});
    Image b = Image::constant(16, 16, {vb, vb, vb});
    const double c1 = 1e-4;
    const double want = (2 * va * vb + c1) / (va * va + vb * vb + c1);
    CHECK(metrics::ssim(a, b) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("symmetric within 1e-12") {
    std::mt19937_64 rng(64);
    Image a = random_image(20, 15, rng);
    Image b = random_image(20, 15, rng);
    CHECK(metrics::ssim(a, b) == doctest::Approx(metrics::ssim(b, a)).epsilon(1e-12));
  }
  SUBCASE("images below the window size are rejected") {
    Image a(8, 8), b(8, 8);
    CHECK_THROWS_AS(metrics::ssim(a, b), std::invalid_argument);
  }
}

namespace {

data::SyntheticSceneSpec one_sphere() {
  data::SyntheticSceneSpec spec;
  data::Primitive s;
  s.kind = data::Primitive::Kind::Sphere;
  s.center = Vec3(0, 0, 0);
  s.radius = 0.4;
  s.sigma = 30.0;
  s.albedo = {1, 0, 0};
  spec.primitives = {s};
  return spec;
}

// Rank-1 CP model whose activated density is constant everywhere in the box.
Model constant_density_model(double raw) {
  Model m;
  m.field.dims = {8, 8, 8, Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  m.field.density.decomp = field::Decomp::CP;
  m.field.density.dims = m.field.dims;
  m.field.density.cp.resize(1);
  m.field.density.cp[0].v[0].assign(8, raw);
  m.field.density.cp[0].v[1].assign(8, 1.0);
  m.field.density.cp[0].v[2].assign(8, 1.0);
  m.field.appearance = m.field.density;
  m.field.channels = 3;
  m.field.app_basis.assign(3, 0.0);
  std::mt19937_64 rng(1);
  m.decoder = render::make_decoder(3, 4, false, rng, 0.1);
  return m;
}

}  // namespace

TEST_CASE("floater_score") {
  data::SyntheticSceneSpec spec = one_sphere();
  SUBCASE("an empty field has no floaters") {
    Model m = constant_density_model(-1e6);  // sigma identically 0
    CHECK(metrics::floater_score(m, spec, 1.0, 16) == 0.0);
  }
  SUBCASE("a dense field over an empty spec is all floaters") {
    data::SyntheticSceneSpec empty;
    Model m = constant_density_model(5.0);  // softplus(5) > 1 everywhere
    CHECK(metrics::floater_score(m, empty, 1.0, 16) == 1.0);
  }
  SUBCASE("matches a naive count on a random field") {
    ModelConfig mc;
    mc.dims = {8, 8, 8, Vec3(-1, -1, -1), Vec3(1, 1, 1)};
    mc.vm_ranks = mc.vm_ranks_app = {2, 2, 2};
    mc.feature_dim = 3;
    mc.hidden = 4;
    mc.seed = 65;
    mc.init_std = 0.5;
    Model m = make_model(mc);
    const int n = 12;
    const double sigma_min = 0.7;
    long hits = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          Vec3 p(-1 + 2 * (a + 0.5) / n, -1 + 2 * (b + 0.5) / n, -1 + 2 * (c + 0.5) / n);
          if (activated_density_at(m, p) <= sigma_min) continue;
          if (!spec.primitives[0].contains(p)) ++hits;
        }
    CHECK(metrics::floater_score(m, spec, sigma_min, n) ==
          doctest::Approx(static_cast<double>(hits) / (n * n * n)).epsilon(1e-12));
  }
  SUBCASE("nonincreasing in the density threshold") {
    ModelConfig mc;
    mc.dims = {8, 8, 8, Vec3(-1, -1, -1), Vec3(1, 1, 1)};
    mc.vm_ranks = mc.vm_ranks_app = {2, 2, 2};
    mc.feature_dim = 3;
    mc.hidden = 4;
    mc.seed = 66;
    mc.init_std = 0.8;
    Model m = make_model(mc);
    double prev = 2.0;
    for (double s : {0.1, 0.5, 1.0, 2.0, 4.0}) {
      const double score = metrics::floater_score(m, one_sphere(), s, 10);
      CHECK(score <= prev + 1e-15);
      prev = score;
    }
  }
}

TEST_CASE("evaluate_views aggregates per-view metrics") {
  std::mt19937_64 rng(67);
  std::vector<Image> a, b;
  std::vector<std::string> names;
  for (int i = 0; i < 3; ++i) {
    a.push_back(random_image(16, 16, rng));
    b.push_back(a.back());
    names.push_back("r_" + std::to_string(i));
  }
  metrics::MetricReport rep = metrics::evaluate_views(a, b, names);
  REQUIRE(rep.psnr.size() == 3);
  for (double p : rep.psnr) CHECK(std::isinf(p));
  for (double s : rep.ssim) CHECK(s == 1.0);
  CHECK(rep.mean_ssim == 1.0);
}

TEST_SUITE_END();
