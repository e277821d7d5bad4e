#pragma once

#include <cstdint>
#include <string>

#include "fourierf/field.hpp"
#include "fourierf/render.hpp"

namespace fourierf {

/// Shape and initialization parameters of a trainable model.
struct ModelConfig {
  field::Decomp decomp = field::Decomp::VM;
  field::GridDims dims;
  int cp_rank = 8;                            // CP only
  std::array<int, 3> vm_ranks{4, 4, 4};       // VM only
  std::array<int, 3> vm_ranks_app{4, 4, 4};   // appearance may differ
  int cp_rank_app = 8;
  int feature_dim = 27;
  int hidden = 64;
  bool use_viewdir = false;
  double init_std = 0.1;
  std::uint64_t seed = 0;
};

/// The full trainable state: factored scene grids plus the color decoder.
struct Model {
  field::DecomposedField field;
  render::Decoder decoder;
};

/// Initializes all factor arrays, the channel basis, and the decoder
/// weights i.i.d. normal(0, init_std) from a single seeded generator, in
/// the stable parameter order (density factors, appearance factors,
/// channel basis, W1, W2).
Model make_model(const ModelConfig& cfg);

/// Density (activated) and decoded color for one world-space point.
/// Used by oracle comparisons and the floater metric.
double activated_density_at(const Model& m, const field::Vec3& world_p);

struct RenderResult {
  Image rgb;
  std::vector<double> depth;    // width*height
  std::vector<double> opacity;  // width*height
};

/// Renders a full view. Deterministic (no RNG is consumed); rows may be
/// sharded across cfg.threads workers with output independent of the
/// worker count.
RenderResult render_image(const Model& m, const render::Camera& cam,
                          const render::RenderConfig& cfg);

}  // namespace fourierf
