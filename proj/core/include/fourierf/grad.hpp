#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "fourierf/model.hpp"
#include "fourierf/render.hpp"

namespace fourierf::grad {

enum class ParamKind {
  DensityVector,
  DensityMatrix,
  AppearanceVector,
  AppearanceMatrix,
  ChannelBasis,
  DecoderW1,
  DecoderW2,
};

bool is_spatial(ParamKind k);
bool is_density(ParamKind k);

/// One trainable array. Vectors report rows = length, cols = 1; matrices
/// report their true shape (row-major).
struct ParamView {
  std::string name;
  ParamKind kind;
  std::span<double> data;
  int rows = 0;
  int cols = 0;
  bool decoder_group = false;  // true for the channel basis and MLP weights
};

/// Flat enumeration of every trainable array in a stable order: density
/// factors, appearance factors, channel basis, W1, W2.
std::vector<ParamView> enumerate_params(Model& m);
std::size_t total_param_count(const Model& m);

/// One gradient array per parameter, shape-congruent.
struct GradSet {
  std::vector<std::vector<double>> g;

  void resize_like(const std::vector<ParamView>& params);
  void zero();
};

/// A training batch: rays with their quadrature rows and target colors.
struct RayBatch {
  std::vector<render::Ray> rays;
  std::vector<render::SampleRow> samples;
  std::vector<Rgb> targets;

  size_t size() const { return rays.size(); }
};

struct LossConfig {
  double w_mse = 1.0;
  double w_tv = 0.0;
  double w_l1 = 0.0;
  double w_occ = 0.0;
  int occ_bins = 10;
  bool grad_scaling = false;
  double near_scale = 1.0;  // clamp distance for gradient scaling
  Rgb background{1.0, 1.0, 1.0};
};

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double tv = 0.0;   // unweighted term values
  double l1 = 0.0;
  double occ = 0.0;
};

/// Loss and exact gradients of `total` w.r.t. every trainable array.
/// total = mse + w_tv*tv + w_l1*l1 + w_occ*occ. Throws std::runtime_error
/// naming the first offending array if the loss goes non-finite.
LossBreakdown loss_and_grad(Model& m, const RayBatch& batch, const LossConfig& cfg,
                            GradSet& grads);

/// Forward pass only (same arithmetic as loss_and_grad).
LossBreakdown loss_only(Model& m, const RayBatch& batch, const LossConfig& cfg);

/// Central-difference probe of `k` random parameter coordinates; returns
/// the max relative error vs the analytic gradient (differences below the
/// 1e-7 absolute floor count as zero). Intended for problems with at most
/// ~1e4 parameters.
double fd_check(Model& m, const RayBatch& batch, const LossConfig& cfg, int k,
                std::mt19937_64& rng, double h = 1e-4);

}  // namespace fourierf::grad
