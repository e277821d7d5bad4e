#pragma once

#include <string>
#include <vector>

#include "fourierf/data.hpp"
#include "fourierf/image.hpp"
#include "fourierf/model.hpp"

namespace fourierf::metrics {

/// Peak signal-to-noise ratio in dB over [0,1] images: -10*log10(MSE).
/// Identical images yield +infinity. Throws on dimension mismatch.
double psnr(const Image& a, const Image& b);

/// Single-scale SSIM on Rec.601 luma: 11x11 Gaussian window (sigma 1.5),
/// K1=0.01, K2=0.03, dynamic range 1, mean over valid window positions.
double ssim(const Image& a, const Image& b);

struct MetricReport {
  std::vector<std::string> names;
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void write_csv(const std::string& path) const;
  std::string summary() const;
};

MetricReport evaluate_views(const std::vector<Image>& renders,
                            const std::vector<Image>& references,
                            const std::vector<std::string>& names);

/// Fraction of an n^3 probe lattice over the scene box whose activated
/// density exceeds sigma_min while lying outside every ground-truth
/// primitive.
double floater_score(const Model& m, const data::SyntheticSceneSpec& spec, double sigma_min,
                     int n);

}  // namespace fourierf::metrics
