#include "fourierf/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fourierf::metrics {

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("psnr: image dimensions differ");
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin * kWin>& gaussian_window() {
  static const std::array<double, kWin * kWin> win = [] {
    std::array<double, kWin * kWin> w{};
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y)
      for (int x = 0; x < kWin; ++x) {
        const double dx = x - kWin / 2, dy = y - kWin / 2;
        w[y * kWin + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        sum += w[y * kWin + x];
      }
    for (double& v : w) v /= sum;
    return w;
  }();
  return win;
}

std::vector<double> luma(const Image& img) {
  std::vector<double> y(img.pixel_count());
  for (size_t p = 0; p < y.size(); ++p)
    y[p] = 0.299 * img.data[p * 3] + 0.587 * img.data[p * 3 + 1] + 0.114 * img.data[p * 3 + 2];
  return y;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("ssim: image dimensions differ");
  if (a.width < kWin || a.height < kWin)
    throw std::invalid_argument("ssim: images smaller than the 11x11 window");

  const std::vector<double> ya = luma(a);
  const std::vector<double> yb = luma(b);
  const auto& win = gaussian_window();

  double total = 0.0;
  long count = 0;
  for (int y0 = 0; y0 + kWin <= a.height; ++y0)
    for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int wy = 0; wy < kWin; ++wy)
        for (int wx = 0; wx < kWin; ++wx) {
          const double w = win[wy * kWin + wx];
          const double va = ya[static_cast<size_t>(y0 + wy) * a.width + (x0 + wx)];
          const double vb = yb[static_cast<size_t>(y0 + wy) * a.width + (x0 + wx)];
          mx += w * va;
          my += w * vb;
          sxx += w * va * va;
          syy += w * vb * vb;
          sxy += w * va * vb;
        }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      ++count;
    }
  return total / count;
}

MetricReport evaluate_views(const std::vector<Image>& renders,
                            const std::vector<Image>& references,
                            const std::vector<std::string>& names) {
  if (renders.size() != references.size() || renders.size() != names.size())
    throw std::invalid_argument("evaluate_views: list sizes differ");
  MetricReport rep;
  double psum = 0.0, ssum = 0.0;
  for (size_t i = 0; i < renders.size(); ++i) {
    rep.names.push_back(names[i]);
    rep.psnr.push_back(psnr(renders[i], references[i]));
    rep.ssim.push_back(ssim(renders[i], references[i]));
    psum += rep.psnr.back();
    ssum += rep.ssim.back();
  }
  if (!renders.empty()) {
    rep.mean_psnr = psum / renders.size();
    rep.mean_ssim = ssum / renders.size();
  }
  return rep;
}

void MetricReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write metric report: " + path);
  os << "view,psnr,ssim\n" << std::setprecision(17);
  for (size_t i = 0; i < names.size(); ++i)
    os << names[i] << ',' << psnr[i] << ',' << ssim[i] << '\n';
  os << "mean," << mean_psnr << ',' << mean_ssim << '\n';
}

std::string MetricReport::summary() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "views: " << names.size() << "\n"
     << "mean PSNR: " << mean_psnr << " dB\n"
     << "mean SSIM: " << mean_ssim << "\n";
  return os.str();
}

double floater_score(const Model& m, const data::SyntheticSceneSpec& spec, double sigma_min,
                     int n) {
  if (n < 1) throw std::invalid_argument("floater_score: grid size must be >= 1");
  const field::GridDims& d = m.field.dims;
  long hits = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        field::Vec3 p;
        const double fr[3] = {(a + 0.5) / n, (b + 0.5) / n, (c + 0.5) / n};
        for (int ax = 0; ax < 3; ++ax)
          p[ax] = d.aabb_min[ax] + fr[ax] * (d.aabb_max[ax] - d.aabb_min[ax]);
        if (activated_density_at(m, p) <= sigma_min) continue;
        bool inside = false;
        for (const data::Primitive& pr : spec.primitives)
          if (pr.contains(p)) {
            inside = true;
            break;
          }
        if (!inside) ++hits;
      }
  return static_cast<double>(hits) / (static_cast<double>(n) * n * n);
}

}  // namespace fourierf::metrics
