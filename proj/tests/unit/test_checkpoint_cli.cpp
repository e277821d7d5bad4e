#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fourierf/checkpoint.hpp"
#include "fourierf/cli.hpp"
#include "fourierf/grad.hpp"
#include "json.hpp"

using namespace fourierf;
using field::Vec3;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("fourierf_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Model sample_model(std::uint64_t seed) {
  ModelConfig mc;
  mc.decomp = field::Decomp::VM;
  mc.dims = {6, 7, 8, Vec3(-0.5, -1, -1.5), Vec3(0.5, 1, 1.5)};
  mc.vm_ranks = {2, 1, 3};
  mc.vm_ranks_app = {1, 2, 1};
  mc.feature_dim = 6;
  mc.hidden = 12;
  mc.seed = seed;
  return make_model(mc);
}

std::string spec_text() {
  return "background 1 1 1\n"
         "aabb -1 -1 -1 1 1 1\n"
         "sphere -0.3 0 0 0.25 50 0.9 0.2 0.1\n"
         "sphere 0.3 0 0.1 0.2 50 0.1 0.2 0.9\n";
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint_cli");

TEST_CASE("checkpoints round-trip bit-exactly") {
  fs::path dir = temp_dir("ckpt");
  Model m = sample_model(71);
  const std::string path = (dir / "model.ckpt").string();
  save_checkpoint(m, path);
  Model back = load_checkpoint(path);

  CHECK(back.field.dims.i == 6);
  CHECK(back.field.dims.j == 7);
  CHECK(back.field.dims.k == 8);
  CHECK(back.field.dims.aabb_min[2] == -1.5);
  CHECK(back.field.channels == 6);
  CHECK(back.decoder.hidden == 12);

  auto pa = grad::enumerate_params(m);
  auto pb = grad::enumerate_params(back);
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    REQUIRE(pa[i].data.size() == pb[i].data.size());
    CHECK(std::memcmp(pa[i].data.data(), pb[i].data.data(),
                      pa[i].data.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("checkpoint loading rejects corrupt files") {
  fs::path dir = temp_dir("ckpt_bad");
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint((dir / "nope.ckpt").string()), std::runtime_error);
  }
  SUBCASE("bad magic") {
    std::ofstream os(dir / "bad.ckpt", std::ios::binary);
    os << "NOTAMODEL and some trailing bytes";
    os.close();
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "bad.ckpt").string()),
                         doctest::Contains("FOURIERF1"), std::runtime_error);
  }
  SUBCASE("truncation") {
    Model m = sample_model(72);
    const std::string path = (dir / "trunc.ckpt").string();
    save_checkpoint(m, path);
    std::string bytes = file_bytes(path);
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    os.close();
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
}

TEST_CASE("presets carry the published hyperparameters") {
  SUBCASE("synthetic") {
    train::TrainConfig c = cli::resolve_config("synthetic", {}, {});
    CHECK(c.f0 == 0.3);
    CHECK(c.delta == 2e-3);
    CHECK(c.weight_decay == 0.2);
    CHECK(c.w_tv == 1.0);
    CHECK(c.w_l1 == 0.0);
    CHECK(c.w_occ == 0.0);
    CHECK(c.beta1 == 0.9);
    CHECK(c.beta2 == 0.98);
    CHECK(c.iterations == 10000);
    CHECK(c.background == Rgb{1, 1, 1});
  }
  SUBCASE("real") {
    train::TrainConfig c = cli::resolve_config("real", {}, {});
    CHECK(c.f0 == 0.01);
    CHECK(c.delta == 1e-4);
    CHECK(c.weight_decay == 0.0);
    CHECK(c.w_l1 == 1e-4);
    CHECK(c.w_occ == 0.01);
    CHECK(c.occ_bins == 10);
  }
  SUBCASE("unknown preset") {
    CHECK_THROWS_AS(cli::resolve_config("imaginary", {}, {}), std::invalid_argument);
  }
}

TEST_CASE("flag overrides beat config files, which beat presets") {
  fs::path dir = temp_dir("cfg");
  {
    std::ofstream os(dir / "run.cfg");
    os << "# comment line\n"
          "f0 = 0.2\n"
          "grid = 16\n"
          "background = 0.5 0.5 0.5\n";
  }
  cli::Overrides file = cli::load_config_file((dir / "run.cfg").string());
  cli::Overrides flags;
  flags.set("f0", "0.4");
  train::TrainConfig c = cli::resolve_config("synthetic", file, flags);
  CHECK(c.f0 == 0.4);
  CHECK(c.model.dims.i == 16);
  CHECK(c.background == Rgb{0.5, 0.5, 0.5});
}

TEST_CASE("unknown config keys are named") {
  cli::Overrides flags;
  flags.set("learning_rato", "0.1");
  CHECK_THROWS_WITH_AS(cli::resolve_config("synthetic", {}, flags),
                       doctest::Contains("learning_rato"), std::invalid_argument);
}

TEST_CASE("manifests record the resolved run") {
  fs::path dir = temp_dir("manifest");
  SUBCASE("synthetic preset values") {
    train::TrainConfig c = cli::resolve_config("synthetic", {}, {});
    cli::write_manifest(c, "train", "dataset_dir", dir.string());
    std::ifstream is(dir / "manifest.json");
    nlohmann::json j;
    is >> j;
    CHECK(j["config"]["f0"].get<double>() == 0.3);
    CHECK(j["config"]["delta"].get<double>() == 2e-3);
    CHECK(j["config"]["weight_decay"].get<double>() == 0.2);
    CHECK(j["version"].get<std::string>() == cli::kVersion);
  }
  SUBCASE("real preset values") {
    train::TrainConfig c = cli::resolve_config("real", {}, {});
    cli::write_manifest(c, "train", "d", dir.string());
    std::ifstream is(dir / "manifest.json");
    nlohmann::json j;
    is >> j;
    CHECK(j["config"]["f0"].get<double>() == 0.01);
    CHECK(j["config"]["delta"].get<double>() == 1e-4);
    CHECK(j["config"]["w_l1"].get<double>() == 1e-4);
  }
  SUBCASE("disabled curriculum records a full starting budget") {
    cli::Overrides flags;
    flags.set("f0", "1");  // what --no-curriculum sets
    train::TrainConfig c = cli::resolve_config("synthetic", {}, flags);
    cli::write_manifest(c, "train", "d", dir.string());
    std::ifstream is(dir / "manifest.json");
    nlohmann::json j;
    is >> j;
    CHECK(j["config"]["f0"].get<double>() == 1.0);
  }
}

TEST_CASE("a run is reproducible from its manifest alone") {
  fs::path dir = temp_dir("repro");
  cli::Overrides flags;
  flags.set("grid", "8");
  flags.set("rank", "2");
  flags.set("features", "8");
  flags.set("hidden", "16");
  flags.set("iters", "6");
  flags.set("batch", "16");
  flags.set("samples", "16");
  flags.set("near", "1.0");
  flags.set("far", "4.0");
  flags.set("aabb", "-1 -1 -1 1 1 1");
  flags.set("seed", "99");
  train::TrainConfig cfg = cli::resolve_config("synthetic", {}, flags);
  cli::write_manifest(cfg, "train", "d", dir.string());

  // rebuild the config from the manifest json
  std::ifstream is(dir / "manifest.json");
  nlohmann::json j;
  is >> j;
  cli::Overrides rebuilt;
  const nlohmann::json& c = j["config"];
  rebuilt.set("grid", std::to_string(c["grid"][0].get<int>()));
  rebuilt.set("rank", std::to_string(c["vm_ranks"][0].get<int>()));
  rebuilt.set("features", std::to_string(c["features"].get<int>()));
  rebuilt.set("hidden", std::to_string(c["hidden"].get<int>()));
  rebuilt.set("iters", std::to_string(c["iterations"].get<int>()));
  rebuilt.set("batch", std::to_string(c["batch_rays"].get<int>()));
  rebuilt.set("samples", std::to_string(c["n_samples"].get<int>()));
  rebuilt.set("near", std::to_string(c["near"].get<double>()));
  rebuilt.set("far", std::to_string(c["far"].get<double>()));
  rebuilt.set("aabb", "-1 -1 -1 1 1 1");
  rebuilt.set("seed", std::to_string(c["seed"].get<std::uint64_t>()));
  train::TrainConfig cfg2 =
      cli::resolve_config(c["preset"].get<std::string>(), {}, rebuilt);

  data::SyntheticSceneSpec spec = data::parse_scene_spec_text(spec_text(), "inline");
  data::MintConfig mint;
  mint.width = 16;
  mint.height = 16;
  mint.n_samples = 96;
  data::SceneDataset ds = data::make_fewshot(spec, 2, 1, 0, mint);

  train::TrainResult a = train::train(ds, cfg);
  train::TrainResult b = train::train(ds, cfg2);
  REQUIRE(a.log.iters.size() == b.log.iters.size());
  for (size_t i = 0; i < a.log.iters.size(); ++i)
    CHECK(a.log.iters[i].loss.total == b.log.iters[i].loss.total);
}

TEST_CASE("make-scene writes the advertised frame counts deterministically") {
  fs::path dir = temp_dir("mkscene");
  std::ofstream(dir / "scene.txt") << spec_text();

  cli::MakeSceneOpts o;
  o.spec_path = (dir / "scene.txt").string();
  o.n_views = 4;
  o.n_test = 3;
  o.width = 16;
  o.height = 16;
  o.n_samples = 64;
  o.out_dir = (dir / "out1").string();
  CHECK(cli::cmd_make_scene(o) == 0);

  int train_pngs = 0, test_pngs = 0;
  for (const auto& e : fs::directory_iterator(dir / "out1" / "train")) (void)e, ++train_pngs;
  for (const auto& e : fs::directory_iterator(dir / "out1" / "test")) (void)e, ++test_pngs;
  CHECK(train_pngs == 4);
  CHECK(test_pngs == 3);

  o.out_dir = (dir / "out2").string();
  CHECK(cli::cmd_make_scene(o) == 0);
  CHECK(file_bytes(dir / "out1" / "train" / "r_2.png") ==
        file_bytes(dir / "out2" / "train" / "r_2.png"));
  CHECK(file_bytes(dir / "out1" / "transforms_test.json") ==
        file_bytes(dir / "out2" / "transforms_test.json"));

  SUBCASE("invalid spec fields surface in the error") {
    std::ofstream(dir / "bad.txt") << "blob 0 0 0 1\n";
    cli::MakeSceneOpts bad = o;
    bad.spec_path = (dir / "bad.txt").string();
    CHECK_THROWS_WITH_AS(cli::cmd_make_scene(bad), doctest::Contains("blob"),
                         std::invalid_argument);
  }
}

TEST_CASE("render and eval commands cover the file workflow") {
  fs::path dir = temp_dir("flow");
  data::SyntheticSceneSpec spec = data::parse_scene_spec_text(spec_text(), "inline");
  data::MintConfig mint;
  mint.width = 16;
  mint.height = 16;
  mint.n_samples = 64;
  data::SceneDataset ds = data::make_fewshot(spec, 2, 2, 0, mint);
  data::write_transforms(ds, (dir / "data").string());

  Model m = sample_model(73);
  save_checkpoint(m, (dir / "model.ckpt").string());

  cli::RenderOpts ro;
  ro.checkpoint = (dir / "model.ckpt").string();
  ro.dataset_dir = (dir / "data").string();
  ro.out_dir = (dir / "renders").string();
  ro.rc.near = 0.8;
  ro.rc.far = 3.2;
  ro.rc.n_samples = 32;
  CHECK(cli::cmd_render(ro) == 0);
  CHECK(fs::exists(dir / "renders" / "r_0.png"));
  CHECK(fs::exists(dir / "renders" / "r_1.png"));
  CHECK(fs::exists(dir / "renders" / "r_0_depth.png"));
  CHECK(fs::exists(dir / "renders" / "depth_scale.txt"));

  SUBCASE("re-rendering is byte-identical") {
    cli::RenderOpts ro2 = ro;
    ro2.out_dir = (dir / "renders2").string();
    CHECK(cli::cmd_render(ro2) == 0);
    CHECK(file_bytes(dir / "renders" / "r_0.png") == file_bytes(dir / "renders2" / "r_0.png"));
  }

  SUBCASE("missing checkpoints fail loudly") {
    cli::RenderOpts bad = ro;
    bad.checkpoint = (dir / "absent.ckpt").string();
    CHECK_THROWS_AS(cli::cmd_render(bad), std::runtime_error);
  }

  SUBCASE("eval of identical directories reports the sentinel") {
    cli::EvalOpts eo;
    eo.renders_dir = (dir / "renders").string();
    eo.truth_dir = (dir / "renders").string();
    eo.out_dir = (dir / "report").string();
    CHECK(cli::cmd_eval(eo) == 0);
    std::ifstream is(dir / "report" / "metrics.csv");
    std::string header, line;
    std::getline(is, header);
    CHECK(header == "view,psnr,ssim");
    int rows = 0;
    while (std::getline(is, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 3);  // two views + the mean row
    CHECK(line.find("mean") != std::string::npos);
  }

  SUBCASE("eval with mismatched directories lists the missing names") {
    fs::create_directories(dir / "partial");
    fs::copy_file(dir / "renders" / "r_0.png", dir / "partial" / "r_0.png");
    cli::EvalOpts eo;
    eo.renders_dir = (dir / "partial").string();
    eo.truth_dir = (dir / "renders").string();
    CHECK_THROWS_WITH_AS(cli::cmd_eval(eo), doctest::Contains("r_1"), std::runtime_error);
  }
}

TEST_CASE("inspect-spectrum dumps masks and retained energy") {
  fs::path dir = temp_dir("inspect");
  Model m = sample_model(74);
  save_checkpoint(m, (dir / "m.ckpt").string());
  cli::InspectOpts o;
  o.checkpoint = (dir / "m.ckpt").string();
  o.fractions = {0.0, 0.3, 1.0};
  o.out_dir = (dir / "out").string();
  CHECK(cli::cmd_inspect_spectrum(o) == 0);

  std::ifstream en(dir / "out" / "retained_energy.csv");
  std::string header;
  std::getline(en, header);
  CHECK(header == "factor_id,axis,f,retained_energy_ratio");
  int rows = 0;
  std::string line;
  bool all_in_range = true;
  while (std::getline(en, line)) {
    if (line.empty()) continue;
    ++rows;
    const double ratio = std::stod(line.substr(line.rfind(',') + 1));
    all_in_range = all_in_range && ratio >= 0.0 && ratio <= 1.0 + 1e-12;
    if (line.rfind(",1", line.size() - 3) != std::string::npos) {
      // full budget keeps all energy
    }
  }
  // (2+1+3 + 1+2+1) components, line+plane each, 3 fractions
  CHECK(rows == 10 * 2 * 3);
  CHECK(all_in_range);
  CHECK(fs::exists(dir / "out" / "masks_1d.csv"));
  CHECK(fs::exists(dir / "out" / "masks_2d.csv"));
}

TEST_CASE("check-grads command passes on the canonical problem") {
  cli::CheckGradsOpts o;
  o.probes = 32;
  o.seed = 5;
  CHECK(cli::cmd_check_grads(o) == 0);
}

TEST_SUITE_END();
