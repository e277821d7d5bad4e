#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fourierf/field.hpp"

namespace fourierf::spectra {

/// Fraction of the Fourier coefficient budget, saturated to [0,1].
class ClipFraction {
 public:
  ClipFraction() = default;
  explicit ClipFraction(double f) : f_(f < 0.0 ? 0.0 : (f > 1.0 ? 1.0 : f)) {}
  double value() const { return f_; }

 private:
  double f_ = 0.0;
};

/// Linear curriculum: f_t = min(1, f0 + t*delta).
struct ClipSchedule {
  ClipFraction f0;
  double delta = 0.0;  // per-iteration increment, > 0 (may be +inf)
  int n_iters = 0;

  ClipFraction value_at(int t) const;
};

/// The increment that reaches f=1 exactly at iteration N: (1 - f0) / N.
double delta_for(double f0, int n_iters);

/// Nonredundant bins of a real-input transform, ordered by increasing
/// frequency; size floor(d/2)+1 for input length d.
using Spectrum1D = std::vector<std::complex<double>>;

/// Full d1 x d2 complex DFT grid in standard unshifted ordering, row-major.
struct Spectrum2D {
  int rows = 0, cols = 0;
  std::vector<std::complex<double>> coeffs;

  std::complex<double>& at(int k1, int k2) { return coeffs[static_cast<size_t>(k1) * cols + k2]; }
  const std::complex<double>& at(int k1, int k2) const {
    return coeffs[static_cast<size_t>(k1) * cols + k2];
  }
};

/// Unnormalized forward transform of a real vector (d >= 2).
Spectrum1D dft_1d(std::span<const double> v);
/// Inverse of dft_1d with 1/d normalization; `d` is the original length.
std::vector<double> idft_1d(const Spectrum1D& s, int d);

/// Full unnormalized 2D DFT of a real matrix (row-major, d1 x d2 >= 2x2).
Spectrum2D dft_2d(std::span<const double> w, int rows, int cols);
/// Inverse with 1/(d1*d2) normalization; returns the real part (imaginary
/// residue of Hermitian-symmetric spectra is below 1e-10 and discarded).
std::vector<double> idft_2d(const Spectrum2D& s);

/// 1D clip mask over d_f nonredundant bins: with t = d_f*f, bins below
/// floor(t) pass, bin floor(t) is scaled by frac(t), higher bins are zero.
/// f=1 yields all ones.
std::vector<double> mask_1d(ClipFraction f, int d_f);

/// Signed periodic frequency index of bin k in a length-d transform.
int signed_freq(int k, int d);

/// Whether 2D bin (k1,k2) passes the circular low-pass mask.
bool mask_2d_pass(ClipFraction f, int k1, int k2, int d1, int d2);

/// Binary circular 2D mask over the full unshifted spectrum (row-major
/// d1 x d2, entries in {0,1}); bin (k1,k2) passes iff its signed frequency
/// radius is at most r = (f/2)*sqrt(2*max(d1,d2)^2). Hermitian-symmetric.
std::vector<double> mask_2d(ClipFraction f, int d1, int d2);

/// Low-pass projection of a real vector: IDFT(DFT(v) .* mask_1d(f)).
/// Linear, idempotent, energy non-increasing; exact identity at f=1.
std::vector<double> clip_1d(std::span<const double> v, ClipFraction f);

/// Low-pass projection of a real matrix (row-major) under the circular 2D
/// mask. Same properties as clip_1d.
std::vector<double> clip_2d(std::span<const double> w, int rows, int cols, ClipFraction f);

/// In-place variants; the storage is never reallocated, so spans over the
/// data (parameter views, optimizer state) stay valid.
void clip_1d_inplace(std::span<double> v, ClipFraction f);
void clip_2d_inplace(std::span<double> w, int rows, int cols, ClipFraction f);

/// Applies clip_1d to every factor vector and clip_2d to every factor
/// matrix of the grid, in place. f >= 1 leaves the grid untouched.
void clip_field(field::FactorGrid& g, ClipFraction f);

/// Clips both the density and appearance grids (the channel basis has no
/// spatial extent and is left alone).
void clip_field(field::DecomposedField& f, ClipFraction frac);

/// Ratio ||clip(v,f)||^2 / ||v||^2 (1 for the zero vector).
double retained_energy_ratio(std::span<const double> before, std::span<const double> after);

}  // namespace fourierf::spectra
