#include "fourierf/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "fourierf/checkpoint.hpp"
#include "fourierf/losses.hpp"
#include "fourierf/metrics.hpp"

namespace fourierf::train {

namespace fs = std::filesystem;

void adamw_step(std::span<double> p, std::span<const double> g, std::span<double> m,
                std::span<double> v, long step, const AdamHypers& h) {
  const size_t n = p.size();
  if (g.size() != n || m.size() != n || v.size() != n)
    throw std::invalid_argument("adamw_step: shape mismatch");
  if (step < 1) throw std::invalid_argument("adamw_step: step must be >= 1");

  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  for (size_t i = 0; i < n; ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= h.lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * p[i]);
  }
}

void OptimizerState::resize_like(const std::vector<grad::ParamView>& params) {
  m.resize(params.size());
  v.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    m[i].assign(params[i].data.size(), 0.0);
    v[i].assign(params[i].data.size(), 0.0);
  }
  step = 0;
}

void adamw_apply(std::vector<grad::ParamView>& params, const grad::GradSet& grads,
                 OptimizerState& state, const AdamHypers& field_h, const AdamHypers& decoder_h) {
  if (params.size() != grads.g.size() || params.size() != state.m.size())
    throw std::invalid_argument("adamw_apply: parameter/state count mismatch");
  ++state.step;
  for (size_t i = 0; i < params.size(); ++i)
    adamw_step(params[i].data, grads.g[i], state.m[i], state.v[i], state.step,
               params[i].decoder_group ? decoder_h : field_h);
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write train log: " + path);
  os << "iter,f_t,loss_total,loss_mse,loss_tv,loss_l1,loss_occ,ms\n";
  os << std::setprecision(17);
  for (const IterRecord& r : iters)
    os << r.iter << ',' << r.f_t << ',' << r.loss.total << ',' << r.loss.mse << ',' << r.loss.tv
       << ',' << r.loss.l1 << ',' << r.loss.occ << ',' << r.ms << '\n';
}

void TrainLog::write_eval_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write eval log: " + path);
  os << "iter,psnr,ssim\n";
  os << std::setprecision(17);
  for (const EvalRecord& r : evals) os << r.iter << ',' << r.psnr << ',' << r.ssim << '\n';
}

std::string TrainLog::summary() const {
  std::ostringstream os;
  os << std::setprecision(6);
  if (!iters.empty()) {
    const IterRecord& last = iters.back();
    double total_ms = 0.0;
    for (const IterRecord& r : iters) total_ms += r.ms;
    os << "iterations: " << last.iter << "\n"
       << "final f_t: " << last.f_t << "\n"
       << "final loss: " << last.loss.total << " (mse " << last.loss.mse << ", tv "
       << last.loss.tv << ", l1 " << last.loss.l1 << ", occ " << last.loss.occ << ")\n"
       << "mean iteration ms: " << total_ms / iters.size() << "\n";
  }
  if (!evals.empty())
    os << "last eval: iter " << evals.back().iter << " psnr " << evals.back().psnr << " ssim "
       << evals.back().ssim << "\n";
  return os.str();
}

namespace {

grad::RayBatch sample_batch(const data::SceneDataset& ds, const TrainConfig& cfg,
                            std::mt19937_64& rng) {
  const int w = ds.train[0].image.width;
  const int h = ds.train[0].image.height;
  const size_t per_view = static_cast<size_t>(w) * h;
  const size_t total = per_view * ds.train.size();
  std::uniform_int_distribution<size_t> pick(0, total - 1);

  grad::RayBatch batch;
  batch.rays.reserve(cfg.batch_rays);
  batch.samples.reserve(cfg.batch_rays);
  batch.targets.reserve(cfg.batch_rays);
  for (int i = 0; i < cfg.batch_rays; ++i) {
    const size_t flat = pick(rng);
    const size_t view = flat / per_view;
    const int px = static_cast<int>(flat % per_view % w);
    const int py = static_cast<int>(flat % per_view / w);
    const data::SceneView& sv = ds.train[view];
    batch.rays.push_back(render::pixel_ray(sv.camera, px, py));
    batch.samples.push_back(
        render::sample_along_ray(cfg.near, cfg.far, cfg.n_samples, /*jitter=*/true, rng));
    batch.targets.push_back({sv.image.at(px, py, 0), sv.image.at(px, py, 1),
                             sv.image.at(px, py, 2)});
  }
  return batch;
}

EvalRecord eval_heldout(const Model& m, const data::SceneDataset& ds, const TrainConfig& cfg,
                        int iter) {
  render::RenderConfig rc;
  rc.near = cfg.near;
  rc.far = cfg.far;
  rc.n_samples = cfg.n_samples;
  rc.background = ds.background;
  rc.threads = cfg.threads;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const data::SceneView& sv : ds.test) {
    RenderResult rr = render_image(m, sv.camera, rc);
    psnr_sum += metrics::psnr(rr.rgb, sv.image);
    ssim_sum += metrics::ssim(rr.rgb, sv.image);
  }
  const double n = static_cast<double>(ds.test.size());
  return {iter, psnr_sum / n, ssim_sum / n};
}

}  // namespace

TrainResult train(const data::SceneDataset& dataset, const TrainConfig& cfg) {
  if (dataset.train.empty()) throw std::invalid_argument("train: dataset has no training views");
  for (const data::SceneView& sv : dataset.train)
    if (sv.image.width != dataset.train[0].image.width ||
        sv.image.height != dataset.train[0].image.height)
      throw std::invalid_argument("train: training images must share dimensions");

  const bool to_disk = !cfg.out_dir.empty();
  if (to_disk) {
    fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
    fs::create_directories(fs::path(cfg.out_dir) / "logs");
  }

  TrainResult res;
  res.model = make_model(cfg.model);
  Model last_good = res.model;

  auto params = grad::enumerate_params(res.model);
  grad::GradSet grads;
  grads.resize_like(params);
  OptimizerState opt;
  opt.resize_like(params);

  AdamHypers field_h{cfg.lr_field, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
  AdamHypers decoder_h{cfg.lr_decoder, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};

  grad::LossConfig loss_cfg;
  loss_cfg.w_tv = cfg.w_tv;
  loss_cfg.w_l1 = cfg.w_l1;
  loss_cfg.w_occ = cfg.w_occ;
  loss_cfg.occ_bins = cfg.occ_bins;
  loss_cfg.grad_scaling = cfg.grad_scaling;
  loss_cfg.near_scale = cfg.near;
  loss_cfg.background = dataset.background;

  spectra::ClipSchedule sched{spectra::ClipFraction(cfg.f0), cfg.delta, cfg.iterations};
  std::mt19937_64 rng(cfg.seed);
  double f_t = cfg.f0;

  for (int t = 1; t <= cfg.iterations; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    f_t = cfg.curriculum ? sched.value_at(t).value() : 1.0;

    // Projection happens before any gradient of this iteration is computed.
    if (cfg.curriculum) spectra::clip_field(res.model.field, spectra::ClipFraction(f_t));

    grad::RayBatch batch = sample_batch(dataset, cfg, rng);
    grad::LossBreakdown loss;
    try {
      loss = grad::loss_and_grad(res.model, batch, loss_cfg, grads);
    } catch (const std::runtime_error& e) {
      res.aborted = true;
      res.abort_reason = e.what();
      res.model = last_good;
      if (to_disk)
        save_checkpoint(res.model, (fs::path(cfg.out_dir) / "checkpoints" / "last_good.ckpt").string());
      break;
    }

    adamw_apply(params, grads, opt, field_h, decoder_h);
    last_good = res.model;

    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    res.log.iters.push_back({t, f_t, loss, ms});

    if (cfg.eval_every > 0 && !dataset.test.empty() && t % cfg.eval_every == 0)
      res.log.evals.push_back(eval_heldout(res.model, dataset, cfg, t));
    if (to_disk && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0) {
      std::ostringstream name;
      name << "iter_" << std::setw(6) << std::setfill('0') << t << ".ckpt";
      save_checkpoint(res.model, (fs::path(cfg.out_dir) / "checkpoints" / name.str()).string());
    }
  }

  // The stored parameters stay inside the reachable frequency budget.
  if (!res.aborted && cfg.curriculum)
    spectra::clip_field(res.model.field, spectra::ClipFraction(f_t));
  res.final_f = cfg.curriculum ? f_t : 1.0;

  if (to_disk) {
    if (!res.aborted)
      save_checkpoint(res.model, (fs::path(cfg.out_dir) / "checkpoints" / "final.ckpt").string());
    res.log.write_csv((fs::path(cfg.out_dir) / "logs" / "train.csv").string());
    res.log.write_eval_csv((fs::path(cfg.out_dir) / "logs" / "eval.csv").string());
    std::ofstream sum((fs::path(cfg.out_dir) / "logs" / "summary.txt").string());
    sum << res.log.summary();
    if (res.aborted) sum << "aborted: " << res.abort_reason << "\n";
  }
  return res;
}

}  // namespace fourierf::train
