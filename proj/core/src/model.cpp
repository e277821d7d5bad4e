#include "fourierf/model.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace fourierf {

using field::Vec3;

Model make_model(const ModelConfig& cfg) {
  cfg.dims.validate();
  if (cfg.feature_dim < 3) throw std::invalid_argument("make_model: feature_dim must be >= 3");
  std::mt19937_64 rng(cfg.seed);

  Model m;
  m.field.dims = cfg.dims;
  m.field.channels = cfg.feature_dim;
  if (cfg.decomp == field::Decomp::CP) {
    m.field.density = field::make_cp_grid(cfg.dims, cfg.cp_rank, rng, cfg.init_std);
    m.field.appearance = field::make_cp_grid(cfg.dims, cfg.cp_rank_app, rng, cfg.init_std);
  } else {
    m.field.density = field::make_vm_grid(cfg.dims, cfg.vm_ranks, rng, cfg.init_std);
    m.field.appearance = field::make_vm_grid(cfg.dims, cfg.vm_ranks_app, rng, cfg.init_std);
  }
  std::normal_distribution<double> dist(0.0, cfg.init_std);
  m.field.app_basis.resize(static_cast<size_t>(cfg.feature_dim) *
                           m.field.appearance.component_count());
  for (double& x : m.field.app_basis) x = dist(rng);

  m.decoder = render::make_decoder(cfg.feature_dim, cfg.hidden, cfg.use_viewdir, rng,
                                   cfg.init_std);
  return m;
}

double activated_density_at(const Model& m, const Vec3& world_p) {
  Vec3 g = field::world_to_grid(world_p, m.field.dims);
  if (!m.field.density.in_range(g)) return 0.0;
  return field::density_activation(m.field.density.eval_sum(g));
}

namespace {

void render_rows(const Model& m, const render::Camera& cam, const render::RenderConfig& cfg,
                 const render::SampleRow& row, int y_begin, int y_end, RenderResult& out) {
  const field::DecomposedField& f = m.field;
  const int n = cfg.n_samples;
  const int rtot = f.appearance.component_count();

  std::vector<double> comps(rtot);
  std::vector<double> feat(f.channels);
  std::vector<double> sigma(n);
  std::vector<Rgb> rgb(n);

  for (int y = y_begin; y < y_end; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      render::Ray ray = render::pixel_ray(cam, x, y);
      for (int s = 0; s < n; ++s) {
        Vec3 p = ray.origin + row.t[s] * ray.dir;
        Vec3 g = field::world_to_grid(p, f.dims);
        if (!f.density.in_range(g)) {
          sigma[s] = 0.0;
          rgb[s] = {0, 0, 0};
          continue;
        }
        sigma[s] = field::density_activation(f.density.eval_sum(g));
        f.appearance.eval_components(g, comps);
        for (int c = 0; c < f.channels; ++c) {
          const double* brow = f.app_basis.data() + static_cast<size_t>(c) * rtot;
          double acc = 0.0;
          for (int r = 0; r < rtot; ++r) acc += brow[r] * comps[r];
          feat[c] = acc;
        }
        rgb[s] = render::decode_color(m.decoder, feat, ray.dir);
      }
      render::RenderedPixel px = render::composite(sigma, rgb, row.delta, row.t, cfg.background,
                                                   cfg.stop_transmittance);
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = px.rgb[c];
      out.depth[static_cast<size_t>(y) * cam.width + x] = px.depth;
      out.opacity[static_cast<size_t>(y) * cam.width + x] = px.opacity;
    }
  }
}

}  // namespace

RenderResult render_image(const Model& m, const render::Camera& cam,
                          const render::RenderConfig& cfg) {
  cam.validate();
  std::mt19937_64 unused_rng(0);
  render::SampleRow row =
      render::sample_along_ray(cfg.near, cfg.far, cfg.n_samples, /*jitter=*/false, unused_rng);

  RenderResult out;
  out.rgb = Image(cam.width, cam.height);
  out.depth.assign(static_cast<size_t>(cam.width) * cam.height, 0.0);
  out.opacity.assign(static_cast<size_t>(cam.width) * cam.height, 0.0);

  const int workers = std::max(1, cfg.threads);
  if (workers == 1) {
    render_rows(m, cam, cfg, row, 0, cam.height, out);
    return out;
  }
  // Rows are independent, so any sharding yields identical output.
  std::vector<std::thread> pool;
  const int chunk = (cam.height + workers - 1) / workers;
  for (int wi = 0; wi < workers; ++wi) {
    int y0 = wi * chunk;
    int y1 = std::min(cam.height, y0 + chunk);
    if (y0 >= y1) break;
    pool.emplace_back(
        [&, y0, y1]() { render_rows(m, cam, cfg, row, y0, y1, out); });
  }
  for (std::thread& th : pool) th.join();
  return out;
}

}  // namespace fourierf
