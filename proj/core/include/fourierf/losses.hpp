#pragma once

#include <span>
#include <vector>

#include "fourierf/field.hpp"

namespace fourierf::train {

/// Per-axis mean of squared adjacent differences of one factor array,
/// summed over axes (one axis for vectors, two for row-major matrices).
double tv_term(std::span<const double> a, int rows, int cols);
/// Accumulates w * d(tv_term)/d(a) into grad.
void tv_term_grad(std::span<const double> a, int rows, int cols, double w,
                  std::span<double> grad);

/// Sum over all spatial factors of tv_term, density and appearance alike.
double tv_loss(const field::DecomposedField& f);

/// Mean absolute value over all density factor entries.
double l1_loss(const field::FactorGrid& density);

/// Mean activated density over the first K samples of every ray.
/// sigma_rows holds per-ray activated densities; throws if K exceeds any
/// row length.
double occlusion_reg(const std::vector<std::vector<double>>& sigma_rows, int k_bins);

/// Distance-based gradient attenuation: min(1, (t/near_scale)^2).
double distance_grad_scale(double t, double near_scale);

}  // namespace fourierf::train
