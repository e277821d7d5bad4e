#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fourierf/data.hpp"
#include "fourierf/grad.hpp"
#include "fourierf/model.hpp"
#include "fourierf/spectra.hpp"

namespace fourierf::train {

struct AdamHypers {
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// One decoupled-weight-decay Adam update on a single array, using the
/// given 1-based step for bias correction:
///   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
///   p <- p - lr*( mhat/(sqrt(vhat)+eps) + weight_decay*p )
/// Throws std::invalid_argument on shape mismatch.
void adamw_step(std::span<double> p, std::span<const double> g, std::span<double> m,
                std::span<double> v, long step, const AdamHypers& h);

/// Moment buffers for every parameter array plus the shared step counter.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;

  void resize_like(const std::vector<grad::ParamView>& params);
};

/// Applies adamw_step to every parameter, choosing lr_field or lr_decoder
/// by parameter group.
void adamw_apply(std::vector<grad::ParamView>& params, const grad::GradSet& grads,
                 OptimizerState& state, const AdamHypers& field_h, const AdamHypers& decoder_h);

struct TrainConfig {
  ModelConfig model;

  int iterations = 10000;
  int batch_rays = 4096;
  double lr_field = 0.02;
  double lr_decoder = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.2;

  double w_tv = 1.0;
  double w_l1 = 0.0;
  double w_occ = 0.0;
  int occ_bins = 10;
  bool grad_scaling = false;

  double f0 = 0.3;
  double delta = 2e-3;     // may be +inf (saturates at iteration 1)
  bool curriculum = true;  // false: the clip projection is skipped entirely

  double near = 0.8;
  double far = 3.2;
  int n_samples = 64;
  Rgb background{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  std::string preset = "synthetic";

  int eval_every = 500;        // 0 disables periodic held-out evaluation
  int checkpoint_every = 1000; // 0 disables periodic checkpoints
  std::string out_dir;         // empty: nothing is written to disk
  int threads = 0;
};

struct IterRecord {
  int iter = 0;
  double f_t = 0.0;
  grad::LossBreakdown loss;
  double ms = 0.0;
};

struct EvalRecord {
  int iter = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct TrainLog {
  std::vector<IterRecord> iters;
  std::vector<EvalRecord> evals;

  void write_csv(const std::string& path) const;
  void write_eval_csv(const std::string& path) const;
  std::string summary() const;
};

struct TrainResult {
  Model model;
  TrainLog log;
  double final_f = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// The curriculum loop. Per iteration t = 1..N: f_t <- min(1, f0 + t*delta);
/// clip the factor grids at f_t (before any gradient is computed); sample a
/// ray batch uniformly over all training pixels with replacement; compute
/// loss and gradients; optimizer step; log. A non-finite loss aborts with
/// the last good parameters preserved (and checkpointed when out_dir is
/// set). Final parameters are re-clipped at the last f_t reached.
TrainResult train(const data::SceneDataset& dataset, const TrainConfig& cfg);

}  // namespace fourierf::train
