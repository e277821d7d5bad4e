#include "fourierf/spectra.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace fourierf::spectra {

namespace {

// FFTW planning is not thread-safe and the cached plans share their
// embedded buffers, so every transform holds this lock.
std::mutex& fft_mutex() {
  static std::mutex m;
  return m;
}

struct Real1DPlans {
  double* re = nullptr;
  fftw_complex* cx = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

Real1DPlans& real_1d_plans(int n) {
  static std::map<int, Real1DPlans> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Real1DPlans p;
  p.re = fftw_alloc_real(n);
  p.cx = fftw_alloc_complex(n / 2 + 1);
  p.fwd = fftw_plan_dft_r2c_1d(n, p.re, p.cx, FFTW_ESTIMATE);
  p.bwd = fftw_plan_dft_c2r_1d(n, p.cx, p.re, FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

struct Real2DPlans {
  double* re = nullptr;
  fftw_complex* cx = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

Real2DPlans& real_2d_plans(int rows, int cols) {
  static std::map<std::pair<int, int>, Real2DPlans> cache;
  auto key = std::make_pair(rows, cols);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Real2DPlans p;
  p.re = fftw_alloc_real(static_cast<size_t>(rows) * cols);
  p.cx = fftw_alloc_complex(static_cast<size_t>(rows) * (cols / 2 + 1));
  p.fwd = fftw_plan_dft_r2c_2d(rows, cols, p.re, p.cx, FFTW_ESTIMATE);
  p.bwd = fftw_plan_dft_c2r_2d(rows, cols, p.cx, p.re, FFTW_ESTIMATE);
  return cache.emplace(key, p).first->second;
}

struct Cpx2DPlans {
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

Cpx2DPlans& cpx_2d_plans(int rows, int cols) {
  static std::map<std::pair<int, int>, Cpx2DPlans> cache;
  auto key = std::make_pair(rows, cols);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Cpx2DPlans p;
  size_t n = static_cast<size_t>(rows) * cols;
  p.in = fftw_alloc_complex(n);
  p.out = fftw_alloc_complex(n);
  p.fwd = fftw_plan_dft_2d(rows, cols, p.in, p.out, FFTW_FORWARD, FFTW_ESTIMATE);
  p.bwd = fftw_plan_dft_2d(rows, cols, p.in, p.out, FFTW_BACKWARD, FFTW_ESTIMATE);
  return cache.emplace(key, p).first->second;
}

}  // namespace

ClipFraction ClipSchedule::value_at(int t) const {
  if (t < 0) throw std::invalid_argument("ClipSchedule: iteration index must be >= 0");
  if (t == 0) return f0;
  if (!std::isfinite(delta)) return ClipFraction(1.0);
  return ClipFraction(f0.value() + t * delta);  // saturates at [0,1]
}

double delta_for(double f0, int n_iters) {
  if (n_iters < 1) throw std::invalid_argument("delta_for: n_iters must be >= 1");
  return (1.0 - f0) / n_iters;
}

Spectrum1D dft_1d(std::span<const double> v) {
  const int d = static_cast<int>(v.size());
  if (d < 2) throw std::invalid_argument("dft_1d: input length must be >= 2");
  const int df = d / 2 + 1;
  Spectrum1D out(df);
  std::lock_guard<std::mutex> lock(fft_mutex());
  Real1DPlans& p = real_1d_plans(d);
  std::copy(v.begin(), v.end(), p.re);
  fftw_execute(p.fwd);
  for (int b = 0; b < df; ++b) out[b] = {p.cx[b][0], p.cx[b][1]};
  return out;
}

std::vector<double> idft_1d(const Spectrum1D& s, int d) {
  if (d < 2 || s.size() != static_cast<size_t>(d / 2 + 1))
    throw std::invalid_argument("idft_1d: spectrum size does not match length d");
  std::vector<double> out(d);
  std::lock_guard<std::mutex> lock(fft_mutex());
  Real1DPlans& p = real_1d_plans(d);
  for (size_t b = 0; b < s.size(); ++b) {
    p.cx[b][0] = s[b].real();
    p.cx[b][1] = s[b].imag();
  }
  fftw_execute(p.bwd);
  for (int i = 0; i < d; ++i) out[i] = p.re[i] / d;
  return out;
}

Spectrum2D dft_2d(std::span<const double> w, int rows, int cols) {
  if (rows < 2 || cols < 2 || w.size() != static_cast<size_t>(rows) * cols)
    throw std::invalid_argument("dft_2d: bad matrix shape");
  Spectrum2D s;
  s.rows = rows;
  s.cols = cols;
  s.coeffs.resize(w.size());
  std::lock_guard<std::mutex> lock(fft_mutex());
  Cpx2DPlans& p = cpx_2d_plans(rows, cols);
  for (size_t i = 0; i < w.size(); ++i) {
    p.in[i][0] = w[i];
    p.in[i][1] = 0.0;
  }
  fftw_execute(p.fwd);
  for (size_t i = 0; i < w.size(); ++i) s.coeffs[i] = {p.out[i][0], p.out[i][1]};
  return s;
}

std::vector<double> idft_2d(const Spectrum2D& s) {
  if (s.rows < 2 || s.cols < 2 ||
      s.coeffs.size() != static_cast<size_t>(s.rows) * s.cols)
    throw std::invalid_argument("idft_2d: bad spectrum shape");
  const double norm = static_cast<double>(s.rows) * s.cols;
  std::vector<double> out(s.coeffs.size());
  std::lock_guard<std::mutex> lock(fft_mutex());
  Cpx2DPlans& p = cpx_2d_plans(s.rows, s.cols);
  for (size_t i = 0; i < s.coeffs.size(); ++i) {
    p.in[i][0] = s.coeffs[i].real();
    p.in[i][1] = s.coeffs[i].imag();
  }
  fftw_execute(p.bwd);
  for (size_t i = 0; i < out.size(); ++i) out[i] = p.out[i][0] / norm;
  return out;
}

std::vector<double> mask_1d(ClipFraction f, int d_f) {
  if (d_f < 1) throw std::invalid_argument("mask_1d: d_f must be >= 1");
  std::vector<double> m(d_f, 0.0);
  const double t = d_f * f.value();
  const int cut = static_cast<int>(std::floor(t));
  for (int i = 0; i < std::min(cut, d_f); ++i) m[i] = 1.0;
  if (cut < d_f) m[cut] = t - cut;  // fractional boundary bin
  return m;
}

int signed_freq(int k, int d) {
  return (k + d / 2) % d - d / 2;
}

bool mask_2d_pass(ClipFraction f, int k1, int k2, int d1, int d2) {
  const double s1 = signed_freq(k1, d1);
  const double s2 = signed_freq(k2, d2);
  const double md = std::max(d1, d2);
  // squared-radius comparison: r^2 = (f/2)^2 * 2*max(d1,d2)^2
  const double r2 = f.value() * f.value() * 0.5 * md * md;
  return s1 * s1 + s2 * s2 <= r2;
}

std::vector<double> mask_2d(ClipFraction f, int d1, int d2) {
  if (d1 < 2 || d2 < 2) throw std::invalid_argument("mask_2d: dimensions must be >= 2");
  std::vector<double> m(static_cast<size_t>(d1) * d2, 0.0);
  for (int k1 = 0; k1 < d1; ++k1)
    for (int k2 = 0; k2 < d2; ++k2)
      if (mask_2d_pass(f, k1, k2, d1, d2)) m[static_cast<size_t>(k1) * d2 + k2] = 1.0;
  return m;
}

void clip_1d_inplace(std::span<double> v, ClipFraction f) {
  const int d = static_cast<int>(v.size());
  if (d < 2) throw std::invalid_argument("clip_1d: input length must be >= 2");
  if (f.value() >= 1.0) return;  // all-pass mask

  const int df = d / 2 + 1;
  const std::vector<double> m = mask_1d(f, df);
  std::lock_guard<std::mutex> lock(fft_mutex());
  Real1DPlans& p = real_1d_plans(d);
  std::copy(v.begin(), v.end(), p.re);
  fftw_execute(p.fwd);
  for (int b = 0; b < df; ++b) {
    p.cx[b][0] *= m[b];
    p.cx[b][1] *= m[b];
  }
  fftw_execute(p.bwd);
  for (int i = 0; i < d; ++i) v[i] = p.re[i] / d;
}

std::vector<double> clip_1d(std::span<const double> v, ClipFraction f) {
  std::vector<double> out(v.begin(), v.end());
  clip_1d_inplace(out, f);
  return out;
}

void clip_2d_inplace(std::span<double> w, int rows, int cols, ClipFraction f) {
  if (rows < 2 || cols < 2 || w.size() != static_cast<size_t>(rows) * cols)
    throw std::invalid_argument("clip_2d: bad matrix shape");
  if (f.value() >= 1.0) return;

  const int half = cols / 2 + 1;
  const double norm = static_cast<double>(rows) * cols;
  std::lock_guard<std::mutex> lock(fft_mutex());
  Real2DPlans& p = real_2d_plans(rows, cols);
  std::copy(w.begin(), w.end(), p.re);
  fftw_execute(p.fwd);
  for (int k1 = 0; k1 < rows; ++k1)
    for (int k2 = 0; k2 < half; ++k2)
      if (!mask_2d_pass(f, k1, k2, rows, cols)) {
        p.cx[static_cast<size_t>(k1) * half + k2][0] = 0.0;
        p.cx[static_cast<size_t>(k1) * half + k2][1] = 0.0;
      }
  fftw_execute(p.bwd);
  for (size_t i = 0; i < w.size(); ++i) w[i] = p.re[i] / norm;
}

std::vector<double> clip_2d(std::span<const double> w, int rows, int cols, ClipFraction f) {
  std::vector<double> out(w.begin(), w.end());
  clip_2d_inplace(out, rows, cols, f);
  return out;
}

void clip_field(field::FactorGrid& g, ClipFraction f) {
  if (f.value() >= 1.0) return;  // identity projection
  if (g.decomp == field::Decomp::CP) {
    for (field::CpComponent& c : g.cp)
      for (int a = 0; a < 3; ++a) clip_1d_inplace(c.v[a], f);
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      auto [u, w] = field::plane_axes(axis);
      const int rows = g.dims.axis_len(u);
      const int cols = g.dims.axis_len(w);
      for (field::VmComponent& c : g.vm[axis]) {
        clip_1d_inplace(c.line, f);
        clip_2d_inplace(c.plane, rows, cols, f);
      }
    }
  }
}

void clip_field(field::DecomposedField& f, ClipFraction frac) {
  clip_field(f.density, frac);
  clip_field(f.appearance, frac);
}

double retained_energy_ratio(std::span<const double> before, std::span<const double> after) {
  double eb = 0.0, ea = 0.0;
  for (double x : before) eb += x * x;
  for (double x : after) ea += x * x;
  if (eb == 0.0) return 1.0;
  return ea / eb;
}

}  // namespace fourierf::spectra
