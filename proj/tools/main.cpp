#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fourierf/cli.hpp"

namespace cli = fourierf::cli;

namespace {

int env_threads() {
  const char* v = std::getenv("FOURIERF_THREADS");
  if (!v) return 0;  // deterministic single-thread by default
  return std::max(0, std::atoi(v));
}

// Shared train-style flags; records only flags the user actually set.
struct ConfigFlags {
  std::string config_file;
  std::string preset = "synthetic";
  cli::Overrides flags;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "plain-text key=value config file");
    app->add_option("--preset", preset, "parameter preset: synthetic|real")
        ->check(CLI::IsMember({"synthetic", "real"}));
    auto opt = [&](const char* flag, const char* key, const char* help) {
      app->add_option_function<std::string>(
             flag, [this, key](const std::string& v) { flags.set(key, v); }, help)
          ->expected(1);
    };
    opt("--seed", "seed", "RNG seed");
    opt("--iters", "iters", "training iterations");
    opt("--batch", "batch", "rays per batch");
    opt("--f0", "f0", "initial clip fraction");
    opt("--delta", "delta", "per-iteration clip increment (or 'inf')");
    opt("--decomp", "decomp", "tensor decomposition: cp|vm");
    opt("--grid", "grid", "voxel resolution per axis");
    opt("--rank", "rank", "decomposition rank (density and appearance)");
    opt("--features", "features", "appearance feature channels");
    opt("--near", "near", "near plane");
    opt("--far", "far", "far plane");
    opt("--samples", "samples", "samples per ray");
    opt("--background", "background", "white|black|'r g b'");
    opt("--weight-decay", "weight_decay", "AdamW weight decay");
    opt("--w-tv", "w_tv", "TV loss weight");
    opt("--w-l1", "w_l1", "L1 loss weight");
    opt("--w-occ", "w_occ", "occlusion regularization weight");
    opt("--lr-field", "lr_field", "field learning rate");
    opt("--lr-decoder", "lr_decoder", "decoder learning rate");
    opt("--eval-every", "eval_every", "held-out eval cadence (0 off)");
    opt("--checkpoint-every", "checkpoint_every", "checkpoint cadence (0 off)");
    app->add_flag_callback(
        "--no-curriculum", [this] { flags.set("f0", "1"); },
        "disable the frequency curriculum (clip budget starts at 100%)");
  }

  fourierf::train::TrainConfig resolve() const {
    cli::Overrides file;
    if (!config_file.empty()) file = cli::load_config_file(config_file);
    cli::Overrides all = flags;
    if (all.kv.find("threads") == all.kv.end())
      all.set("threads", std::to_string(env_threads()));
    return cli::resolve_config(preset, file, all);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FourieRF: frequency-curriculum radiance fields from few views"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kVersion));

  // make-scene
  auto* mk = app.add_subcommand("make-scene", "mint a synthetic dataset from a scene spec");
  cli::MakeSceneOpts mko;
  mk->add_option("--spec", mko.spec_path, "scene spec file")->required();
  mk->add_option("--views", mko.n_views, "training views");
  mk->add_option("--test-views", mko.n_test, "held-out test views");
  mk->add_option("--seed", mko.seed, "RNG seed");
  mk->add_option("--width", mko.width, "image width");
  mk->add_option("--height", mko.height, "image height");
  mk->add_option("--samples", mko.n_samples, "oracle samples per ray");
  mk->add_option("--out", mko.out_dir, "output dataset directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  cli::TrainOpts tro;
  ConfigFlags trf;
  int train_views = 0, train_test_views = 0;
  tr->add_option("--data", tro.dataset_dir, "dataset directory")->required();
  tr->add_option("--out", tro.out_dir, "run output directory")->required();
  tr->add_option("--views", train_views, "subsample this many training views (0 = all)");
  tr->add_option("--test-views", train_test_views, "subsample test views (0 = all)");
  trf.attach(tr);

  // render
  auto* rd = app.add_subcommand("render", "render a checkpoint");
  cli::RenderOpts rdo;
  std::string rd_bg = "white";
  rd->add_option("--checkpoint", rdo.checkpoint, "model checkpoint")->required();
  rd->add_option("--data", rdo.dataset_dir, "dataset directory (renders its split)");
  rd->add_option("--split", rdo.split, "dataset split: test|train");
  rd->add_option("--camera-path", rdo.camera_path, "camera path JSON (overrides --data)");
  rd->add_option("--out", rdo.out_dir, "output directory")->required();
  rd->add_option("--near", rdo.rc.near, "near plane");
  rd->add_option("--far", rdo.rc.far, "far plane");
  rd->add_option("--samples", rdo.rc.n_samples, "samples per ray");
  rd->add_option("--background", rd_bg, "white|black|'r g b'");

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of renders against ground truth");
  cli::EvalOpts evo;
  ev->add_option("--renders", evo.renders_dir, "rendered images directory")->required();
  ev->add_option("--truth", evo.truth_dir, "ground-truth images directory")->required();
  ev->add_option("--out", evo.out_dir, "report directory (default: renders dir)");

  // ablate-delta
  auto* ab = app.add_subcommand("ablate-delta", "sweep the clip increment and report PSNR");
  cli::AblateOpts abo;
  ConfigFlags abf;
  std::vector<std::string> ab_deltas;
  ab->add_option("--data", abo.dataset_dir, "dataset directory")->required();
  ab->add_option("--deltas", ab_deltas, "delta values (use 'inf' for the saturated run)")
      ->required()
      ->delimiter(',');
  ab->add_option("--out", abo.out_dir, "output directory")->required();
  abf.attach(ab);

  // inspect-spectrum
  auto* in = app.add_subcommand("inspect-spectrum",
                                "dump clip masks and per-factor retained energy");
  cli::InspectOpts ino;
  in->add_option("--checkpoint", ino.checkpoint, "model checkpoint")->required();
  in->add_option("--f", ino.fractions, "clip fractions (default 0,0.1,...,1)")->delimiter(',');
  in->add_option("--out", ino.out_dir, "output directory")->required();

  // check-grads
  auto* cg = app.add_subcommand("check-grads",
                                "finite-difference check of analytic gradients");
  cli::CheckGradsOpts cgo;
  cg->add_option("--probes", cgo.probes, "probed parameter coordinates per loss term");
  cg->add_option("--seed", cgo.seed, "RNG seed");
  cg->add_option("--tolerance", cgo.tolerance, "max relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mk) return cli::cmd_make_scene(mko);
    if (*tr) {
      tro.config = trf.resolve();
      if (train_views > 0 || train_test_views > 0) {
        // subsampling happens inside cmd via config-independent path: load, subsample, retrain
        fourierf::data::SceneDataset full =
            fourierf::data::load_transforms(tro.dataset_dir, tro.config.background);
        int nv = train_views > 0 ? train_views : static_cast<int>(full.train.size());
        int nt = train_test_views > 0 ? train_test_views : static_cast<int>(full.test.size());
        fourierf::data::SceneDataset sub = fourierf::data::make_fewshot(full, nv, nt, 0);
        tro.config.out_dir = tro.out_dir;
        cli::write_manifest(tro.config, "train", tro.dataset_dir, tro.out_dir);
        fourierf::train::TrainResult res = fourierf::train::train(sub, tro.config);
        std::cout << res.log.summary();
        if (res.aborted) {
          std::cerr << "training aborted: " << res.abort_reason << "\n";
          return 1;
        }
        return 0;
      }
      return cli::cmd_train(tro);
    }
    if (*rd) {
      rdo.rc.threads = env_threads();
      if (rd_bg == "white") rdo.rc.background = {1, 1, 1};
      else if (rd_bg == "black") rdo.rc.background = {0, 0, 0};
      return cli::cmd_render(rdo);
    }
    if (*ev) return cli::cmd_eval(evo);
    if (*ab) {
      abo.base = abf.resolve();
      for (const std::string& s : ab_deltas)
        abo.deltas.push_back(s == "inf" ? std::numeric_limits<double>::infinity()
                                        : std::stod(s));
      return cli::cmd_ablate_delta(abo);
    }
    if (*in) return cli::cmd_inspect_spectrum(ino);
    if (*cg) return cli::cmd_check_grads(cgo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
