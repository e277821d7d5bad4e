#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fourierf/train.hpp"

namespace fourierf::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Flag/config overrides applied on top of a preset. Only fields the user
/// actually set are engaged.
struct Overrides {
  std::map<std::string, std::string> kv;  // raw key -> value strings

  void set(const std::string& key, const std::string& value) { kv[key] = value; }
};

/// Parses a plain-text key/value config file (`key = value`, '#' comments).
Overrides load_config_file(const std::string& path);

/// Builds the preset ("synthetic" or "real") and applies overrides.
/// Unknown keys throw std::invalid_argument naming the key.
train::TrainConfig resolve_config(const std::string& preset, const Overrides& file_overrides,
                                  const Overrides& flag_overrides);

/// Writes manifest.json (resolved config, seed, version, layout) into
/// out_dir; returns the manifest path.
std::string write_manifest(const train::TrainConfig& cfg, const std::string& command,
                           const std::string& dataset_dir, const std::string& out_dir);

struct MakeSceneOpts {
  std::string spec_path;
  int n_views = 4;
  int n_test = 16;
  std::uint64_t seed = 0;
  std::string out_dir;
  int width = 64;
  int height = 64;
  int n_samples = 512;
};
int cmd_make_scene(const MakeSceneOpts& o);

struct TrainOpts {
  std::string dataset_dir;
  std::string out_dir;
  train::TrainConfig config;       // fully resolved
  std::string resolved_preset;
};
int cmd_train(const TrainOpts& o);

struct RenderOpts {
  std::string checkpoint;
  std::string dataset_dir;   // renders this dataset's split when set
  std::string split = "test";
  std::string camera_path;   // transforms-style JSON; overrides dataset_dir
  std::string out_dir;
  render::RenderConfig rc;
};
int cmd_render(const RenderOpts& o);

struct EvalOpts {
  std::string renders_dir;
  std::string truth_dir;
  std::string out_dir;
};
int cmd_eval(const EvalOpts& o);

struct AblateOpts {
  std::string dataset_dir;
  std::vector<double> deltas;  // +inf allowed
  train::TrainConfig base;     // per-run config template
  std::string out_dir;
};
int cmd_ablate_delta(const AblateOpts& o);

struct InspectOpts {
  std::string checkpoint;
  std::vector<double> fractions;  // defaults to 0,0.1,...,1
  std::string out_dir;
};
int cmd_inspect_spectrum(const InspectOpts& o);

struct CheckGradsOpts {
  int probes = 64;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
};
int cmd_check_grads(const CheckGradsOpts& o);

}  // namespace fourierf::cli
