#include "fourierf/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fourierf::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("missing file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

std::vector<SceneView> load_split(const std::string& dir, const std::string& split,
                                  const Rgb& background) {
  const std::string tpath = (fs::path(dir) / ("transforms_" + split + ".json")).string();
  json j = load_json(tpath);
  if (!j.contains("camera_angle_x") || !j.contains("frames"))
    throw std::runtime_error(tpath + ": expected camera_angle_x and frames");
  const double angle_x = j["camera_angle_x"].get<double>();

  std::vector<SceneView> views;
  for (const json& frame : j["frames"]) {
    if (!frame.contains("file_path") || !frame.contains("transform_matrix"))
      throw std::runtime_error(tpath + ": frame missing file_path or transform_matrix");
    std::string rel = frame["file_path"].get<std::string>();
    if (rel.rfind("./", 0) == 0) rel = rel.substr(2);
    std::string img_path = (fs::path(dir) / rel).string();
    if (img_path.size() < 4 || img_path.substr(img_path.size() - 4) != ".png")
      img_path += ".png";

    SceneView v;
    v.name = fs::path(rel).stem().string();
    v.image = read_png_rgb(img_path, background);

    const json& tm = frame["transform_matrix"];
    if (!tm.is_array() || tm.size() != 4)
      throw std::runtime_error(img_path + ": transform_matrix must be 4x4");
    for (int r = 0; r < 4; ++r) {
      if (!tm[r].is_array() || tm[r].size() != 4)
        throw std::runtime_error(img_path + ": transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) v.camera.c2w(r, c) = tm[r][c].get<double>();
    }
    v.camera.width = v.image.width;
    v.camera.height = v.image.height;
    v.camera.focal = 0.5 * v.image.width / std::tan(0.5 * angle_x);
    if (v.camera.rotation_error() > 1e-3)
      throw std::runtime_error(img_path + ": rotation block is not orthonormal (error " +
                               std::to_string(v.camera.rotation_error()) + ")");
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace

SceneDataset load_transforms(const std::string& dir, const Rgb& background) {
  SceneDataset ds;
  ds.background = background;
  ds.train = load_split(dir, "train", background);
  ds.test = load_split(dir, "test", background);
  if (!ds.train.empty()) {
    const int w = ds.train[0].image.width, h = ds.train[0].image.height;
    for (const SceneView& v : ds.train)
      if (v.image.width != w || v.image.height != h)
        throw std::runtime_error(dir + ": images do not share dimensions");
    for (const SceneView& v : ds.test)
      if (v.image.width != w || v.image.height != h)
        throw std::runtime_error(dir + ": images do not share dimensions");
  }
  return ds;
}

namespace {

void write_split(const SceneDataset& ds, const std::vector<SceneView>& views,
                 const std::string& split, const std::string& dir) {
  fs::create_directories(fs::path(dir) / split);
  json j;
  if (views.empty()) {
    j["camera_angle_x"] = 0.0;
  } else {
    const render::Camera& c0 = views[0].camera;
    j["camera_angle_x"] = 2.0 * std::atan(0.5 * c0.width / c0.focal);
  }
  j["frames"] = json::array();
  for (const SceneView& v : views) {
    json frame;
    frame["file_path"] = "./" + split + "/" + v.name;
    json tm = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) row.push_back(v.camera.c2w(r, c));
      tm.push_back(row);
    }
    frame["transform_matrix"] = tm;
    j["frames"].push_back(frame);
    write_png_rgb((fs::path(dir) / split / (v.name + ".png")).string(), v.image);
  }
  std::ofstream os((fs::path(dir) / ("transforms_" + split + ".json")).string());
  os << j.dump(2) << "\n";
}

}  // namespace

void write_transforms(const SceneDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  write_split(ds, ds.train, "train", dir);
  write_split(ds, ds.test, "test", dir);
}

bool Primitive::contains(const Vec3& p) const {
  if (kind == Kind::Sphere) return (p - center).norm() <= radius;
  for (int a = 0; a < 3; ++a)
    if (std::abs(p[a] - center[a]) > half_size[a]) return false;
  return true;
}

void SyntheticSceneSpec::validate() const {
  for (size_t i = 0; i < primitives.size(); ++i) {
    const Primitive& pr = primitives[i];
    if (pr.sigma < 0.0)
      throw std::invalid_argument("scene spec: primitive " + std::to_string(i) +
                                  " has sigma < 0");
    Vec3 ext = pr.kind == Primitive::Kind::Sphere ? Vec3(pr.radius, pr.radius, pr.radius)
                                                  : pr.half_size;
    for (int a = 0; a < 3; ++a)
      if (pr.center[a] - ext[a] < aabb_min[a] || pr.center[a] + ext[a] > aabb_max[a])
        throw std::invalid_argument("scene spec: primitive " + std::to_string(i) +
                                    " extends outside the scene box");
  }
}

SyntheticSceneSpec parse_scene_spec_text(const std::string& text, const std::string& origin) {
  SyntheticSceneSpec spec;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;

    auto fail = [&](const std::string& why) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    auto read_n = [&](int n, double* out) {
      for (int i = 0; i < n; ++i)
        if (!(ls >> out[i])) fail("field '" + word + "' expects " + std::to_string(n) + " numbers");
    };

    if (word == "background") {
      read_n(3, spec.background.data());
    } else if (word == "aabb") {
      double v[6];
      read_n(6, v);
      spec.aabb_min = Vec3(v[0], v[1], v[2]);
      spec.aabb_max = Vec3(v[3], v[4], v[5]);
    } else if (word == "sphere") {
      double v[8];
      read_n(8, v);
      Primitive p;
      p.kind = Primitive::Kind::Sphere;
      p.center = Vec3(v[0], v[1], v[2]);
      p.radius = v[3];
      p.sigma = v[4];
      p.albedo = {v[5], v[6], v[7]};
      spec.primitives.push_back(p);
    } else if (word == "box") {
      double v[10];
      read_n(10, v);
      Primitive p;
      p.kind = Primitive::Kind::Box;
      p.center = Vec3(v[0], v[1], v[2]);
      p.half_size = Vec3(v[3], v[4], v[5]);
      p.sigma = v[6];
      p.albedo = {v[7], v[8], v[9]};
      spec.primitives.push_back(p);
    } else {
      fail("unknown field '" + word + "'");
    }
  }
  spec.validate();
  return spec;
}

SyntheticSceneSpec parse_scene_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene spec: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_scene_spec_text(buf.str(), path);
}

std::pair<double, Rgb> oracle_density(const SyntheticSceneSpec& spec, const Vec3& p) {
  double sigma = 0.0;
  Rgb weighted{0, 0, 0};
  for (const Primitive& pr : spec.primitives) {
    if (!pr.contains(p)) continue;
    sigma += pr.sigma;
    for (int c = 0; c < 3; ++c) weighted[c] += pr.sigma * pr.albedo[c];
  }
  if (sigma <= 0.0) return {sigma, spec.background};
  Rgb rgb;
  for (int c = 0; c < 3; ++c) rgb[c] = weighted[c] / sigma;
  return {sigma, rgb};
}

Image oracle_render(const SyntheticSceneSpec& spec, const render::Camera& cam, int n_samples,
                    double near, double far) {
  if (n_samples < 64) throw std::invalid_argument("oracle_render: n_samples must be >= 64");
  cam.validate(1e-3);

  Image img(cam.width, cam.height);
  const double bin = (far - near) / n_samples;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      render::Ray ray = render::pixel_ray(cam, x, y);
      // Independent front-to-back quadrature over the analytic density.
      double transmittance = 1.0;
      Rgb acc{0, 0, 0};
      for (int s = 0; s < n_samples; ++s) {
        const double t = near + (s + 0.5) * bin;
        auto [sigma, rgb] = oracle_density(spec, ray.origin + t * ray.dir);
        if (sigma > 0.0) {
          const double alpha = -std::expm1(-sigma * bin);
          const double w = transmittance * alpha;
          for (int c = 0; c < 3; ++c) acc[c] += w * rgb[c];
          transmittance *= 1.0 - alpha;
          if (transmittance < 1e-7) break;
        }
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = acc[c] + transmittance * spec.background[c];
    }
  return img;
}

SceneDataset make_fewshot(const SceneDataset& full, int n_views, int n_test,
                          std::uint64_t /*seed*/) {
  if (n_views < 1 || n_views > static_cast<int>(full.train.size()))
    throw std::invalid_argument("make_fewshot: n_views exceeds available training frames");
  if (n_test < 0 || n_test > static_cast<int>(full.test.size()))
    throw std::invalid_argument("make_fewshot: n_test exceeds available test frames");

  SceneDataset out;
  out.background = full.background;
  for (int i = 0; i < n_views; ++i)
    out.train.push_back(full.train[static_cast<size_t>(i) * full.train.size() / n_views]);
  for (int i = 0; i < n_test; ++i)
    out.test.push_back(full.test[static_cast<size_t>(i) * full.test.size() / n_test]);
  return out;
}

namespace {

render::Camera ring_camera(const SyntheticSceneSpec& spec, const MintConfig& mint,
                           double azimuth_deg, double elevation_deg) {
  const Vec3 center = 0.5 * (spec.aabb_min + spec.aabb_max);
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  const Vec3 pos = center + mint.ring_radius * Vec3(std::cos(az) * std::cos(el),
                                                    std::sin(az) * std::cos(el), std::sin(el));
  const double focal = 0.5 * mint.width / std::tan(0.5 * mint.camera_angle_x);
  return render::look_at_camera(pos, center, Vec3(0, 0, 1), mint.width, mint.height, focal);
}

}  // namespace

SceneDataset make_fewshot(const SyntheticSceneSpec& spec, int n_views, int n_test,
                          std::uint64_t /*seed*/, const MintConfig& mint) {
  if (n_views < 1) throw std::invalid_argument("make_fewshot: n_views must be >= 1");
  spec.validate();

  SceneDataset ds;
  ds.background = spec.background;
  for (int i = 0; i < n_views; ++i) {
    SceneView v;
    v.name = "r_" + std::to_string(i);
    v.camera = ring_camera(spec, mint, 360.0 * i / n_views, mint.train_elevation_deg);
    v.image = oracle_render(spec, v.camera, mint.n_samples, mint.near, mint.far);
    ds.train.push_back(std::move(v));
  }
  for (int i = 0; i < n_test; ++i) {
    SceneView v;
    v.name = "r_" + std::to_string(i);
    const double elev = mint.test_elevations_deg[i % mint.test_elevations_deg.size()];
    v.camera = ring_camera(spec, mint, 360.0 * (i + 0.5) / std::max(1, n_test), elev);
    v.image = oracle_render(spec, v.camera, mint.n_samples, mint.near, mint.far);
    ds.test.push_back(std::move(v));
  }
  return ds;
}

}  // namespace fourierf::data
