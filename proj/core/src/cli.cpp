#include "fourierf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "fourierf/checkpoint.hpp"
#include "fourierf/data.hpp"
#include "fourierf/grad.hpp"
#include "fourierf/metrics.hpp"
#include "fourierf/spectra.hpp"
#include "json.hpp"

namespace fourierf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double parse_double(const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "infinity")
    return std::numeric_limits<double>::infinity();
  size_t used = 0;
  double out = std::stod(v, &used);
  return out;
}

Rgb parse_background(const std::string& v) {
  if (v == "white") return {1, 1, 1};
  if (v == "black") return {0, 0, 0};
  std::istringstream is(v);
  Rgb rgb;
  if (!(is >> rgb[0] >> rgb[1] >> rgb[2]))
    throw std::invalid_argument("background expects 'white', 'black', or 'r g b'");
  return rgb;
}

void apply_override(train::TrainConfig& c, const std::string& key, const std::string& v) {
  auto as_int = [&] { return std::stoi(v); };
  auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(v)); };
  auto as_bool = [&] { return v == "1" || v == "true" || v == "on"; };

  if (key == "iters" || key == "iterations") c.iterations = as_int();
  else if (key == "batch" || key == "batch_rays") c.batch_rays = as_int();
  else if (key == "lr_field") c.lr_field = parse_double(v);
  else if (key == "lr_decoder") c.lr_decoder = parse_double(v);
  else if (key == "beta1") c.beta1 = parse_double(v);
  else if (key == "beta2") c.beta2 = parse_double(v);
  else if (key == "eps") c.eps = parse_double(v);
  else if (key == "weight_decay") c.weight_decay = parse_double(v);
  else if (key == "w_tv") c.w_tv = parse_double(v);
  else if (key == "w_l1") c.w_l1 = parse_double(v);
  else if (key == "w_occ") c.w_occ = parse_double(v);
  else if (key == "occ_bins") c.occ_bins = as_int();
  else if (key == "grad_scaling") c.grad_scaling = as_bool();
  else if (key == "f0") c.f0 = parse_double(v);
  else if (key == "delta") c.delta = parse_double(v);
  else if (key == "curriculum") c.curriculum = as_bool();
  else if (key == "near") c.near = parse_double(v);
  else if (key == "far") c.far = parse_double(v);
  else if (key == "n_samples" || key == "samples") c.n_samples = as_int();
  else if (key == "background") c.background = parse_background(v);
  else if (key == "seed") { c.seed = as_u64(); c.model.seed = c.seed; }
  else if (key == "eval_every") c.eval_every = as_int();
  else if (key == "checkpoint_every") c.checkpoint_every = as_int();
  else if (key == "threads") c.threads = as_int();
  else if (key == "decomp") {
    if (v == "cp") c.model.decomp = field::Decomp::CP;
    else if (v == "vm") c.model.decomp = field::Decomp::VM;
    else throw std::invalid_argument("decomp must be cp or vm");
  } else if (key == "grid") {
    int n = as_int();
    c.model.dims.i = c.model.dims.j = c.model.dims.k = n;
  } else if (key == "rank") {
    int r = as_int();
    c.model.cp_rank = c.model.cp_rank_app = r;
    c.model.vm_ranks = c.model.vm_ranks_app = {r, r, r};
  } else if (key == "rank_density") {
    int r = as_int();
    c.model.cp_rank = r;
    c.model.vm_ranks = {r, r, r};
  } else if (key == "rank_appearance") {
    int r = as_int();
    c.model.cp_rank_app = r;
    c.model.vm_ranks_app = {r, r, r};
  } else if (key == "features") {
    c.model.feature_dim = as_int();
  } else if (key == "hidden") {
    c.model.hidden = as_int();
  } else if (key == "use_viewdir") {
    c.model.use_viewdir = as_bool();
  } else if (key == "aabb") {
    std::istringstream is(v);
    field::Vec3 lo, hi;
    if (!(is >> lo[0] >> lo[1] >> lo[2] >> hi[0] >> hi[1] >> hi[2]))
      throw std::invalid_argument("aabb expects six numbers");
    c.model.dims.aabb_min = lo;
    c.model.dims.aabb_max = hi;
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

}  // namespace

Overrides load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  Overrides o;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream probe(line);
      std::string w;
      if (probe >> w)
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected 'key = value'");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key or value");
    o.set(key, value);
  }
  return o;
}

train::TrainConfig resolve_config(const std::string& preset, const Overrides& file_overrides,
                                  const Overrides& flag_overrides) {
  train::TrainConfig c;
  c.preset = preset;
  c.model.dims = {128, 128, 128, field::Vec3(-1, -1, -1), field::Vec3(1, 1, 1)};
  c.model.vm_ranks = c.model.vm_ranks_app = {8, 8, 8};
  c.model.cp_rank = c.model.cp_rank_app = 24;
  c.near = 2.0;
  c.far = 6.0;
  c.n_samples = 128;

  if (preset == "synthetic") {
    c.f0 = 0.3;
    c.delta = 2e-3;
    c.weight_decay = 0.2;
    c.w_tv = 1.0;
    c.w_l1 = 0.0;
    c.w_occ = 0.0;
    c.background = {1, 1, 1};
  } else if (preset == "real") {
    c.f0 = 0.01;
    c.delta = 1e-4;
    c.weight_decay = 0.0;
    c.w_tv = 1.0;
    c.w_l1 = 1e-4;
    c.w_occ = 0.01;
    c.occ_bins = 10;
    c.background = {0, 0, 0};
  } else {
    throw std::invalid_argument("unknown preset: " + preset);
  }

  for (const auto& [k, v] : file_overrides.kv) apply_override(c, k, v);
  for (const auto& [k, v] : flag_overrides.kv) apply_override(c, k, v);
  return c;
}

namespace {

json config_json(const train::TrainConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["iterations"] = c.iterations;
  j["batch_rays"] = c.batch_rays;
  j["lr_field"] = c.lr_field;
  j["lr_decoder"] = c.lr_decoder;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["weight_decay"] = c.weight_decay;
  j["w_tv"] = c.w_tv;
  j["w_l1"] = c.w_l1;
  j["w_occ"] = c.w_occ;
  j["occ_bins"] = c.occ_bins;
  j["grad_scaling"] = c.grad_scaling;
  j["f0"] = c.f0;
  j["delta"] = std::isfinite(c.delta) ? json(c.delta) : json("inf");
  j["curriculum"] = c.curriculum;
  j["near"] = c.near;
  j["far"] = c.far;
  j["n_samples"] = c.n_samples;
  j["background"] = {c.background[0], c.background[1], c.background[2]};
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["threads"] = c.threads;
  j["decomp"] = c.model.decomp == field::Decomp::CP ? "cp" : "vm";
  j["grid"] = {c.model.dims.i, c.model.dims.j, c.model.dims.k};
  j["aabb_min"] = {c.model.dims.aabb_min[0], c.model.dims.aabb_min[1], c.model.dims.aabb_min[2]};
  j["aabb_max"] = {c.model.dims.aabb_max[0], c.model.dims.aabb_max[1], c.model.dims.aabb_max[2]};
  j["cp_rank"] = c.model.cp_rank;
  j["cp_rank_appearance"] = c.model.cp_rank_app;
  j["vm_ranks"] = c.model.vm_ranks;
  j["vm_ranks_appearance"] = c.model.vm_ranks_app;
  j["features"] = c.model.feature_dim;
  j["hidden"] = c.model.hidden;
  j["use_viewdir"] = c.model.use_viewdir;
  j["init_std"] = c.model.init_std;
  return j;
}

}  // namespace

std::string write_manifest(const train::TrainConfig& cfg, const std::string& command,
                           const std::string& dataset_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["dataset"] = dataset_dir;
  j["seed"] = cfg.seed;
  j["config"] = config_json(cfg);
  j["layout"] = {{"manifest", "manifest.json"},
                 {"checkpoints", "checkpoints/"},
                 {"renders", "renders/"},
                 {"logs", "logs/"}};
  const std::string path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << j.dump(2) << "\n";
  return path;
}

int cmd_make_scene(const MakeSceneOpts& o) {
  data::SyntheticSceneSpec spec = data::parse_scene_spec(o.spec_path);
  data::MintConfig mint;
  mint.width = o.width;
  mint.height = o.height;
  mint.n_samples = o.n_samples;
  data::SceneDataset ds = data::make_fewshot(spec, o.n_views, o.n_test, o.seed, mint);
  data::write_transforms(ds, o.out_dir);

  // record the mint geometry next to the dataset so train/render defaults match
  json j;
  j["spec"] = o.spec_path;
  j["n_views"] = o.n_views;
  j["n_test"] = o.n_test;
  j["seed"] = o.seed;
  j["near"] = mint.near;
  j["far"] = mint.far;
  j["background"] = {spec.background[0], spec.background[1], spec.background[2]};
  std::ofstream os((fs::path(o.out_dir) / "mint.json").string());
  os << j.dump(2) << "\n";

  std::cout << "wrote " << ds.train.size() << " train + " << ds.test.size()
            << " test frames to " << o.out_dir << "\n";
  return 0;
}

int cmd_train(const TrainOpts& o) {
  train::TrainConfig cfg = o.config;
  data::SceneDataset ds = data::load_transforms(o.dataset_dir, cfg.background);
  cfg.out_dir = o.out_dir;
  write_manifest(cfg, "train", o.dataset_dir, o.out_dir);

  train::TrainResult res = train::train(ds, cfg);
  std::cout << res.log.summary();
  if (res.aborted) {
    std::cerr << "training aborted: " << res.abort_reason << "\n";
    return 1;
  }
  return 0;
}

namespace {

std::vector<data::SceneView> cameras_from_path(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open camera path: " + path);
  json j;
  is >> j;
  const double angle_x = j.at("camera_angle_x").get<double>();
  const int width = j.at("width").get<int>();
  const int height = j.at("height").get<int>();
  std::vector<data::SceneView> views;
  int idx = 0;
  for (const json& frame : j.at("frames")) {
    data::SceneView v;
    v.name = frame.contains("name") ? frame["name"].get<std::string>()
                                    : "cam_" + std::to_string(idx);
    v.camera.width = width;
    v.camera.height = height;
    v.camera.focal = 0.5 * width / std::tan(0.5 * angle_x);
    const json& tm = frame.at("transform_matrix");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) v.camera.c2w(r, c) = tm[r][c].get<double>();
    v.camera.validate(1e-3);
    views.push_back(std::move(v));
    ++idx;
  }
  return views;
}

}  // namespace

int cmd_render(const RenderOpts& o) {
  Model m = load_checkpoint(o.checkpoint);
  std::vector<data::SceneView> views;
  if (!o.camera_path.empty()) {
    views = cameras_from_path(o.camera_path);
  } else {
    data::SceneDataset ds = data::load_transforms(o.dataset_dir, o.rc.background);
    views = o.split == "train" ? std::move(ds.train) : std::move(ds.test);
  }
  fs::create_directories(o.out_dir);

  for (const data::SceneView& v : views) {
    RenderResult rr = render_image(m, v.camera, o.rc);
    write_png_rgb((fs::path(o.out_dir) / (v.name + ".png")).string(), rr.rgb);
    write_png_gray16((fs::path(o.out_dir) / (v.name + "_depth.png")).string(), rr.depth,
                     v.camera.width, v.camera.height, o.rc.far);
  }
  std::ofstream scale((fs::path(o.out_dir) / "depth_scale.txt").string());
  scale << "depth_scale " << o.rc.far << "\n"
        << "# gray16 value 65535 corresponds to depth_scale world units\n";
  std::cout << "rendered " << views.size() << " views to " << o.out_dir << "\n";
  return 0;
}

namespace {

std::vector<std::string> list_pngs(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    std::string stem = e.path().stem().string();
    if (stem.size() > 6 && stem.substr(stem.size() - 6) == "_depth") continue;
    names.push_back(stem);
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

int cmd_eval(const EvalOpts& o) {
  std::vector<std::string> rendered = list_pngs(o.renders_dir);
  std::vector<std::string> truth = list_pngs(o.truth_dir);
  if (rendered != truth) {
    std::ostringstream msg;
    msg << "render/ground-truth mismatch;";
    for (const std::string& n : truth)
      if (std::find(rendered.begin(), rendered.end(), n) == rendered.end())
        msg << " missing render: " << n;
    for (const std::string& n : rendered)
      if (std::find(truth.begin(), truth.end(), n) == truth.end())
        msg << " missing ground truth: " << n;
    throw std::runtime_error(msg.str());
  }
  if (rendered.empty()) throw std::runtime_error("no PNG pairs found to evaluate");

  std::vector<Image> a, b;
  for (const std::string& n : rendered) {
    a.push_back(read_png_rgb((fs::path(o.renders_dir) / (n + ".png")).string(), {0, 0, 0}));
    b.push_back(read_png_rgb((fs::path(o.truth_dir) / (n + ".png")).string(), {0, 0, 0}));
  }
  metrics::MetricReport rep = metrics::evaluate_views(a, b, rendered);
  const std::string out = o.out_dir.empty() ? o.renders_dir : o.out_dir;
  fs::create_directories(out);
  rep.write_csv((fs::path(out) / "metrics.csv").string());
  std::ofstream sum((fs::path(out) / "metrics_summary.txt").string());
  sum << rep.summary();
  std::cout << rep.summary();
  return 0;
}

namespace {

double heldout_psnr(const Model& m, const data::SceneDataset& ds, const train::TrainConfig& cfg) {
  render::RenderConfig rc;
  rc.near = cfg.near;
  rc.far = cfg.far;
  rc.n_samples = cfg.n_samples;
  rc.background = ds.background;
  rc.threads = cfg.threads;
  double sum = 0.0;
  for (const data::SceneView& v : ds.test) {
    RenderResult rr = render_image(m, v.camera, rc);
    sum += metrics::psnr(rr.rgb, v.image);
  }
  return sum / static_cast<double>(ds.test.size());
}

std::string delta_label(double d) {
  if (!std::isfinite(d)) return "inf";
  std::ostringstream os;
  os << d;
  return os.str();
}

}  // namespace

int cmd_ablate_delta(const AblateOpts& o) {
  if (o.deltas.empty()) throw std::invalid_argument("ablate-delta: empty delta list");
  data::SceneDataset ds = data::load_transforms(o.dataset_dir, o.base.background);
  if (ds.test.empty()) throw std::runtime_error("ablate-delta: dataset has no test split");
  fs::create_directories(o.out_dir);

  std::ofstream csv((fs::path(o.out_dir) / "ablate_delta.csv").string());
  csv << "delta,psnr\n" << std::setprecision(17);
  for (double d : o.deltas) {
    train::TrainConfig cfg = o.base;
    cfg.delta = d;
    cfg.curriculum = true;
    cfg.out_dir = (fs::path(o.out_dir) / ("delta_" + delta_label(d))).string();
    write_manifest(cfg, "ablate-delta", o.dataset_dir, cfg.out_dir);
    train::TrainResult res = train::train(ds, cfg);
    if (res.aborted) throw std::runtime_error("ablate-delta: run aborted: " + res.abort_reason);
    const double p = heldout_psnr(res.model, ds, cfg);
    csv << delta_label(d) << ',' << p << '\n';
    std::cout << "delta " << delta_label(d) << ": " << p << " dB\n";
  }
  return 0;
}

int cmd_inspect_spectrum(const InspectOpts& o) {
  Model m = load_checkpoint(o.checkpoint);
  std::vector<double> fracs = o.fractions;
  if (fracs.empty())
    for (int i = 0; i <= 10; ++i) fracs.push_back(i / 10.0);
  fs::create_directories(o.out_dir);

  // masks for every distinct factor length / plane shape
  std::ofstream m1((fs::path(o.out_dir) / "masks_1d.csv").string());
  m1 << "f,d_f,bin,value\n";
  std::ofstream m2((fs::path(o.out_dir) / "masks_2d.csv").string());
  m2 << "f,d1,d2,k1,k2,value\n";
  const field::GridDims& dims = m.field.dims;
  std::vector<int> lens{dims.i, dims.j, dims.k};
  std::sort(lens.begin(), lens.end());
  lens.erase(std::unique(lens.begin(), lens.end()), lens.end());
  for (double f : fracs) {
    spectra::ClipFraction cf(f);
    for (int len : lens) {
      const int df = len / 2 + 1;
      std::vector<double> mask = spectra::mask_1d(cf, df);
      for (int b = 0; b < df; ++b) m1 << f << ',' << df << ',' << b << ',' << mask[b] << '\n';
    }
    if (m.field.density.decomp == field::Decomp::VM) {
      for (int axis = 0; axis < 3; ++axis) {
        auto [u, w] = field::plane_axes(axis);
        const int d1 = dims.axis_len(u), d2 = dims.axis_len(w);
        std::vector<double> mask = spectra::mask_2d(cf, d1, d2);
        for (int k1 = 0; k1 < d1; ++k1)
          for (int k2 = 0; k2 < d2; ++k2)
            m2 << f << ',' << d1 << ',' << d2 << ',' << k1 << ',' << k2 << ','
               << mask[static_cast<size_t>(k1) * d2 + k2] << '\n';
      }
    }
  }

  // per-factor retained energy across the sweep
  std::ofstream en((fs::path(o.out_dir) / "retained_energy.csv").string());
  en << "factor_id,axis,f,retained_energy_ratio\n" << std::setprecision(17);
  auto emit_grid = [&](const field::FactorGrid& g, const std::string& prefix) {
    for (double f : fracs) {
      spectra::ClipFraction cf(f);
      if (g.decomp == field::Decomp::CP) {
        for (size_t r = 0; r < g.cp.size(); ++r)
          for (int a = 0; a < 3; ++a) {
            auto clipped = spectra::clip_1d(g.cp[r].v[a], cf);
            en << prefix << "/cp/r" << r << "/v" << a + 1 << ',' << a + 1 << ',' << f << ','
               << spectra::retained_energy_ratio(g.cp[r].v[a], clipped) << '\n';
          }
      } else {
        for (int axis = 0; axis < 3; ++axis) {
          auto [u, w] = field::plane_axes(axis);
          for (size_t r = 0; r < g.vm[axis].size(); ++r) {
            const field::VmComponent& c = g.vm[axis][r];
            auto cl = spectra::clip_1d(c.line, cf);
            en << prefix << "/vm/axis" << axis + 1 << "/r" << r << "/line," << axis + 1 << ','
               << f << ',' << spectra::retained_energy_ratio(c.line, cl) << '\n';
            auto cp = spectra::clip_2d(c.plane, dims.axis_len(u), dims.axis_len(w), cf);
            en << prefix << "/vm/axis" << axis + 1 << "/r" << r << "/plane," << u + 1 << w + 1
               << ',' << f << ',' << spectra::retained_energy_ratio(c.plane, cp) << '\n';
          }
        }
      }
    }
  };
  emit_grid(m.field.density, "density");
  emit_grid(m.field.appearance, "appearance");
  std::cout << "wrote spectrum inspection to " << o.out_dir << "\n";
  return 0;
}

int cmd_check_grads(const CheckGradsOpts& o) {
  ModelConfig mc;
  mc.decomp = field::Decomp::VM;
  mc.dims = {4, 4, 4, field::Vec3(-1, -1, -1), field::Vec3(1, 1, 1)};
  mc.vm_ranks = mc.vm_ranks_app = {2, 2, 2};
  mc.seed = o.seed;
  Model m = make_model(mc);

  std::mt19937_64 rng(o.seed + 1);
  render::Camera cam = render::look_at_camera(field::Vec3(0, -3, 1), field::Vec3(0, 0, 0),
                                              field::Vec3(0, 0, 1), 16, 16, 20.0);
  grad::RayBatch batch;
  std::uniform_int_distribution<int> px(0, 15);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    batch.rays.push_back(render::pixel_ray(cam, px(rng), px(rng)));
    batch.samples.push_back(render::sample_along_ray(1.5, 5.0, 16, true, rng));
    batch.targets.push_back({unit(rng), unit(rng), unit(rng)});
  }

  struct Term {
    const char* name;
    grad::LossConfig cfg;
  };
  std::vector<Term> terms;
  terms.push_back({"mse", {}});
  terms.push_back({"tv", {}});
  terms.back().cfg.w_mse = 0.0;
  terms.back().cfg.w_tv = 1.0;
  terms.push_back({"l1", {}});
  terms.back().cfg.w_mse = 0.0;
  terms.back().cfg.w_l1 = 1.0;
  terms.push_back({"occlusion", {}});
  terms.back().cfg.w_mse = 0.0;
  terms.back().cfg.w_occ = 1.0;
  terms.back().cfg.occ_bins = 8;

  bool ok = true;
  for (Term& t : terms) {
    std::mt19937_64 probe_rng(o.seed + 7);
    double err = grad::fd_check(m, batch, t.cfg, o.probes, probe_rng);
    const bool pass = err < o.tolerance;
    ok = ok && pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << t.name << ": max relative error " << err
              << " (tolerance " << o.tolerance << ")\n";
  }
  return ok ? 0 : 1;
}

}  // namespace fourierf::cli
