#include "fourierf/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace fourierf::train {

double tv_term(std::span<const double> a, int rows, int cols) {
  double term = 0.0;
  const long n_row_pairs = static_cast<long>(rows - 1) * cols;
  if (n_row_pairs > 0) {
    double sum = 0.0;
    for (int r = 0; r + 1 < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double d = a[static_cast<size_t>(r + 1) * cols + c] - a[static_cast<size_t>(r) * cols + c];
        sum += d * d;
      }
    term += sum / n_row_pairs;
  }
  const long n_col_pairs = static_cast<long>(rows) * (cols - 1);
  if (n_col_pairs > 0) {
    double sum = 0.0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c + 1 < cols; ++c) {
        double d = a[static_cast<size_t>(r) * cols + c + 1] - a[static_cast<size_t>(r) * cols + c];
        sum += d * d;
      }
    term += sum / n_col_pairs;
  }
  return term;
}

void tv_term_grad(std::span<const double> a, int rows, int cols, double w,
                  std::span<double> grad) {
  if (grad.size() != a.size()) throw std::invalid_argument("tv_term_grad: shape mismatch");
  const long n_row_pairs = static_cast<long>(rows - 1) * cols;
  if (n_row_pairs > 0) {
    const double scale = 2.0 * w / n_row_pairs;
    for (int r = 0; r + 1 < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        size_t lo = static_cast<size_t>(r) * cols + c;
        size_t hi = lo + cols;
        double d = scale * (a[hi] - a[lo]);
        grad[hi] += d;
        grad[lo] -= d;
      }
  }
  const long n_col_pairs = static_cast<long>(rows) * (cols - 1);
  if (n_col_pairs > 0) {
    const double scale = 2.0 * w / n_col_pairs;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c + 1 < cols; ++c) {
        size_t lo = static_cast<size_t>(r) * cols + c;
        double d = scale * (a[lo + 1] - a[lo]);
        grad[lo + 1] += d;
        grad[lo] -= d;
      }
  }
}

namespace {

double grid_tv(const field::FactorGrid& g) {
  double sum = 0.0;
  if (g.decomp == field::Decomp::CP) {
    for (const field::CpComponent& c : g.cp)
      for (int a = 0; a < 3; ++a) sum += tv_term(c.v[a], static_cast<int>(c.v[a].size()), 1);
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      auto [u, w] = field::plane_axes(axis);
      for (const field::VmComponent& c : g.vm[axis]) {
        sum += tv_term(c.line, static_cast<int>(c.line.size()), 1);
        sum += tv_term(c.plane, g.dims.axis_len(u), g.dims.axis_len(w));
      }
    }
  }
  return sum;
}

}  // namespace

double tv_loss(const field::DecomposedField& f) {
  return grid_tv(f.density) + grid_tv(f.appearance);
}

double l1_loss(const field::FactorGrid& density) {
  double sum = 0.0;
  size_t count = 0;
  auto add = [&](const std::vector<double>& v) {
    for (double x : v) sum += std::abs(x);
    count += v.size();
  };
  if (density.decomp == field::Decomp::CP) {
    for (const field::CpComponent& c : density.cp)
      for (int a = 0; a < 3; ++a) add(c.v[a]);
  } else {
    for (int axis = 0; axis < 3; ++axis)
      for (const field::VmComponent& c : density.vm[axis]) {
        add(c.line);
        add(c.plane);
      }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double occlusion_reg(const std::vector<std::vector<double>>& sigma_rows, int k_bins) {
  if (k_bins < 1) throw std::invalid_argument("occlusion_reg: k_bins must be >= 1");
  if (sigma_rows.empty()) return 0.0;
  double sum = 0.0;
  for (const std::vector<double>& row : sigma_rows) {
    if (static_cast<int>(row.size()) < k_bins)
      throw std::invalid_argument("occlusion_reg: k_bins exceeds samples per ray");
    for (int s = 0; s < k_bins; ++s) sum += row[s];
  }
  return sum / (static_cast<double>(sigma_rows.size()) * k_bins);
}

double distance_grad_scale(double t, double near_scale) {
  if (!(near_scale > 0.0)) return 1.0;
  const double q = t / near_scale;
  return q >= 1.0 ? 1.0 : q * q;
}

}  // namespace fourierf::train
