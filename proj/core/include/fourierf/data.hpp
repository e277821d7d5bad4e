#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fourierf/image.hpp"
#include "fourierf/render.hpp"

namespace fourierf::data {

using field::Vec3;

struct SceneView {
  render::Camera camera;
  Image image;
  std::string name;  // frame stem, e.g. "r_0"
};

/// Posed image collection with train/test splits.
struct SceneDataset {
  std::vector<SceneView> train;
  std::vector<SceneView> test;
  Rgb background{1.0, 1.0, 1.0};
};

/// Loads a NeRF-synthetic style dataset: transforms_train.json and
/// transforms_test.json with camera_angle_x and frames[{file_path,
/// transform_matrix}], plus PNGs. focal = 0.5*width/tan(camera_angle_x/2);
/// RGBA images are composited onto `background`. Throws std::runtime_error
/// (with path and reason) on missing files or rotation blocks whose
/// orthonormality error exceeds 1e-3.
SceneDataset load_transforms(const std::string& dir, const Rgb& background);

/// Writes a dataset in the same on-disk convention (transforms_train.json,
/// transforms_test.json, train/<name>.png, test/<name>.png).
void write_transforms(const SceneDataset& ds, const std::string& dir);

struct Primitive {
  enum class Kind { Sphere, Box } kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;       // spheres
  Vec3 half_size = Vec3::Zero();  // boxes
  double sigma = 0.0;        // uniform density, >= 0
  Rgb albedo{1.0, 1.0, 1.0};

  bool contains(const Vec3& p) const;
};

/// Analytic ground-truth scene: piecewise-constant density primitives
/// inside the scene bounding box, plus a background color.
struct SyntheticSceneSpec {
  std::vector<Primitive> primitives;
  Rgb background{1.0, 1.0, 1.0};
  Vec3 aabb_min = Vec3(-1, -1, -1);
  Vec3 aabb_max = Vec3(1, 1, 1);

  void validate() const;  // throws on sigma < 0 or out-of-box primitives
};

/// Parses the plain-text scene schema (see README): `background r g b`,
/// `aabb xmin ymin zmin xmax ymax zmax`,
/// `sphere cx cy cz radius sigma r g b`,
/// `box cx cy cz hx hy hz sigma r g b`; '#' starts a comment.
SyntheticSceneSpec parse_scene_spec(const std::string& path);
SyntheticSceneSpec parse_scene_spec_text(const std::string& text, const std::string& origin);

/// Density and albedo at a point: densities of containing primitives add;
/// the color is the density-weighted mean albedo (background color where
/// sigma = 0).
std::pair<double, Rgb> oracle_density(const SyntheticSceneSpec& spec, const Vec3& p);

/// Independent ground-truth renderer: emission-absorption quadrature over
/// oracle_density, sharing no field or decoder code paths. n_samples >= 64.
Image oracle_render(const SyntheticSceneSpec& spec, const render::Camera& cam, int n_samples,
                    double near, double far);

/// Camera/rendering parameters for minting datasets from a scene spec.
struct MintConfig {
  int width = 64;
  int height = 64;
  double camera_angle_x = 0.65;  // radians
  double ring_radius = 1.9;
  double train_elevation_deg = 32.0;
  std::vector<double> test_elevations_deg{18.0, 42.0};
  double near = 0.8;
  double far = 3.2;
  int n_samples = 512;
};

/// Deterministic few-shot split. For a loaded dataset: index-stratified
/// subsampling of each split (train index i -> floor(i*len/n)). For a
/// scene spec: mints views from cameras on fixed upper-hemisphere rings.
/// Throws if more views are requested than available.
SceneDataset make_fewshot(const SceneDataset& full, int n_views, int n_test, std::uint64_t seed);
SceneDataset make_fewshot(const SyntheticSceneSpec& spec, int n_views, int n_test,
                          std::uint64_t seed, const MintConfig& mint);

}  // namespace fourierf::data
