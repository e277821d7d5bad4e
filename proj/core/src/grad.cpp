#include "fourierf/grad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fourierf/losses.hpp"

namespace fourierf::grad {

using field::AxisStencil;
using field::Vec3;

bool is_spatial(ParamKind k) {
  return k == ParamKind::DensityVector || k == ParamKind::DensityMatrix ||
         k == ParamKind::AppearanceVector || k == ParamKind::AppearanceMatrix;
}

bool is_density(ParamKind k) {
  return k == ParamKind::DensityVector || k == ParamKind::DensityMatrix;
}

namespace {

void enumerate_grid(field::FactorGrid& g, const std::string& prefix, bool density,
                    std::vector<ParamView>& out) {
  const ParamKind vec_kind = density ? ParamKind::DensityVector : ParamKind::AppearanceVector;
  const ParamKind mat_kind = density ? ParamKind::DensityMatrix : ParamKind::AppearanceMatrix;
  if (g.decomp == field::Decomp::CP) {
    for (size_t r = 0; r < g.cp.size(); ++r)
      for (int a = 0; a < 3; ++a) {
        std::vector<double>& v = g.cp[r].v[a];
        out.push_back({prefix + "/cp/r" + std::to_string(r) + "/v" + std::to_string(a + 1),
                       vec_kind, v, static_cast<int>(v.size()), 1, false});
      }
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      auto [u, w] = field::plane_axes(axis);
      for (size_t r = 0; r < g.vm[axis].size(); ++r) {
        field::VmComponent& c = g.vm[axis][r];
        std::string stem = prefix + "/vm/axis" + std::to_string(axis + 1) + "/r" +
                           std::to_string(r);
        out.push_back({stem + "/line", vec_kind, c.line, static_cast<int>(c.line.size()), 1,
                       false});
        out.push_back({stem + "/plane", mat_kind, c.plane, g.dims.axis_len(u),
                       g.dims.axis_len(w), false});
      }
    }
  }
}

}  // namespace

std::vector<ParamView> enumerate_params(Model& m) {
  std::vector<ParamView> out;
  enumerate_grid(m.field.density, "density", true, out);
  enumerate_grid(m.field.appearance, "appearance", false, out);
  out.push_back({"basis", ParamKind::ChannelBasis, m.field.app_basis, m.field.channels,
                 m.field.appearance.component_count(), true});
  out.push_back({"decoder/w1", ParamKind::DecoderW1, m.decoder.w1, m.decoder.hidden,
                 m.decoder.in_dim(), true});
  out.push_back({"decoder/w2", ParamKind::DecoderW2, m.decoder.w2, 3, m.decoder.hidden, true});
  return out;
}

std::size_t total_param_count(const Model& m) {
  std::size_t n = 0;
  for (const ParamView& p : enumerate_params(const_cast<Model&>(m))) n += p.data.size();
  return n;
}

void GradSet::resize_like(const std::vector<ParamView>& params) {
  g.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) g[i].assign(params[i].data.size(), 0.0);
}

void GradSet::zero() {
  for (auto& arr : g) std::fill(arr.begin(), arr.end(), 0.0);
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Gradient-array handles for one factor-grid component.
struct CompRef {
  int axis = -1;                          // VM principal axis; -1 for CP
  int plane_cols = 0;                     // VM
  const std::vector<double>* arrs[3] = {nullptr, nullptr, nullptr};  // CP: v1,v2,v3; VM: line, plane
  double* grads[3] = {nullptr, nullptr, nullptr};
};

std::vector<CompRef> component_refs(field::FactorGrid& g, GradSet* grads, size_t base_index) {
  std::vector<CompRef> refs;
  refs.reserve(g.component_count());
  size_t idx = base_index;
  if (g.decomp == field::Decomp::CP) {
    for (field::CpComponent& c : g.cp) {
      CompRef r;
      for (int a = 0; a < 3; ++a) {
        r.arrs[a] = &c.v[a];
        if (grads) r.grads[a] = grads->g[idx].data();
        ++idx;
      }
      refs.push_back(r);
    }
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      auto [u, w] = field::plane_axes(axis);
      for (field::VmComponent& c : g.vm[axis]) {
        CompRef r;
        r.axis = axis;
        r.plane_cols = g.dims.axis_len(w);
        r.arrs[0] = &c.line;
        r.arrs[1] = &c.plane;
        if (grads) {
          r.grads[0] = grads->g[idx].data();
          r.grads[1] = grads->g[idx + 1].data();
        }
        idx += 2;
        refs.push_back(r);
      }
    }
  }
  return refs;
}

size_t grid_entry_count(const field::FactorGrid& g) {
  return g.decomp == field::Decomp::CP ? g.cp.size() * 3
                                       : static_cast<size_t>(g.component_count()) * 2;
}

// Per-sample forward cache for one ray.
struct RayWorkspace {
  std::vector<char> in_box;
  std::vector<AxisStencil> st;       // 3 per sample
  std::vector<double> den_parts;     // stride per component: CP 3, VM 2
  std::vector<double> app_parts;
  std::vector<double> app_comps;
  std::vector<double> draw, sig;
  std::vector<double> feat;          // channels per sample
  std::vector<double> hidden;        // decoder hidden per sample
  std::vector<Rgb> rgb;
  std::vector<double> alpha, w, t_next;
  std::vector<double> dec_in;        // decoder input scratch (one sample)
  std::vector<double> g_h, g_x, dfeat, dcomp;

  void resize(int n, int rd, int ra, int stride_d, int stride_a, int channels, int hid,
              int in_dim) {
    in_box.assign(n, 0);
    st.assign(static_cast<size_t>(n) * 3, {});
    den_parts.assign(static_cast<size_t>(n) * rd * stride_d, 0.0);
    app_parts.assign(static_cast<size_t>(n) * ra * stride_a, 0.0);
    app_comps.assign(static_cast<size_t>(n) * ra, 0.0);
    draw.assign(n, 0.0);
    sig.assign(n, 0.0);
    feat.assign(static_cast<size_t>(n) * channels, 0.0);
    hidden.assign(static_cast<size_t>(n) * hid, 0.0);
    rgb.assign(n, Rgb{0, 0, 0});
    alpha.assign(n, 0.0);
    w.assign(n, 0.0);
    t_next.assign(n, 0.0);
    dec_in.assign(in_dim, 0.0);
    g_h.assign(hid, 0.0);
    g_x.assign(in_dim, 0.0);
    dfeat.assign(channels, 0.0);
    dcomp.assign(std::max(rd, ra), 0.0);
  }
};

// Evaluates every component of `g` at the stencil, caching the per-factor
// interpolants in `parts` (CP: v1,v2,v3; VM: line, plane) and returning
// component products in `comps` when non-null. Returns the component sum.
double eval_components_cached(const std::vector<CompRef>& refs, int stride,
                              const AxisStencil* st, double* parts, double* comps) {
  double sum = 0.0;
  for (size_t r = 0; r < refs.size(); ++r) {
    const CompRef& c = refs[r];
    double prod;
    if (c.axis < 0) {
      double p0 = field::lerp_vector(*c.arrs[0], st[0]);
      double p1 = field::lerp_vector(*c.arrs[1], st[1]);
      double p2 = field::lerp_vector(*c.arrs[2], st[2]);
      parts[r * stride] = p0;
      parts[r * stride + 1] = p1;
      parts[r * stride + 2] = p2;
      prod = p0 * p1 * p2;
    } else {
      auto [u, w] = field::plane_axes(c.axis);
      double line = field::lerp_vector(*c.arrs[0], st[c.axis]);
      double plane = field::lerp_matrix(*c.arrs[1], c.plane_cols, st[u], st[w]);
      parts[r * stride] = line;
      parts[r * stride + 1] = plane;
      prod = line * plane;
    }
    if (comps) comps[r] = prod;
    sum += prod;
  }
  return sum;
}

void accum_vector_grad(double* g, const AxisStencil& s, double v) {
  g[s.i0] += v * (1.0 - s.frac);
  g[s.i0 + 1] += v * s.frac;
}

void accum_matrix_grad(double* g, int cols, const AxisStencil& r, const AxisStencil& c,
                       double v) {
  double* base = g + static_cast<size_t>(r.i0) * cols + c.i0;
  base[0] += v * (1.0 - r.frac) * (1.0 - c.frac);
  base[1] += v * (1.0 - r.frac) * c.frac;
  base[cols] += v * r.frac * (1.0 - c.frac);
  base[cols + 1] += v * r.frac * c.frac;
}

// Distributes a component adjoint into its factor arrays.
void backprop_component(const CompRef& c, int stride, const AxisStencil* st, const double* parts,
                        size_t r, double g_comp) {
  if (c.axis < 0) {
    const double p0 = parts[r * stride], p1 = parts[r * stride + 1], p2 = parts[r * stride + 2];
    accum_vector_grad(c.grads[0], st[0], g_comp * p1 * p2);
    accum_vector_grad(c.grads[1], st[1], g_comp * p0 * p2);
    accum_vector_grad(c.grads[2], st[2], g_comp * p0 * p1);
  } else {
    auto [u, w] = field::plane_axes(c.axis);
    accum_vector_grad(c.grads[0], st[c.axis], g_comp * parts[r * stride + 1]);
    accum_matrix_grad(c.grads[1], c.plane_cols, st[u], st[w], g_comp * parts[r * stride]);
  }
}

struct LossAccum {
  double mse = 0.0;
  double occ = 0.0;
};

LossBreakdown run_batch(Model& m, const RayBatch& batch, const LossConfig& cfg, GradSet* grads) {
  if (batch.rays.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  if (batch.samples.size() != batch.rays.size() || batch.targets.size() != batch.rays.size())
    throw std::invalid_argument("loss_and_grad: ray/sample/target counts differ");

  field::DecomposedField& f = m.field;
  render::Decoder& dec = m.decoder;
  const int rd = f.density.component_count();
  const int ra = f.appearance.component_count();
  const int stride_d = f.density.decomp == field::Decomp::CP ? 3 : 2;
  const int stride_a = f.appearance.decomp == field::Decomp::CP ? 3 : 2;
  const int channels = f.channels;
  const int hid = dec.hidden;
  const int in_dim = dec.in_dim();
  const size_t n_den_entries = grid_entry_count(f.density);
  const size_t n_app_entries = grid_entry_count(f.appearance);

  std::vector<CompRef> den_refs = component_refs(f.density, grads, 0);
  std::vector<CompRef> app_refs = component_refs(f.appearance, grads, n_den_entries);
  double* g_basis = grads ? grads->g[n_den_entries + n_app_entries].data() : nullptr;
  double* g_w1 = grads ? grads->g[n_den_entries + n_app_entries + 1].data() : nullptr;
  double* g_w2 = grads ? grads->g[n_den_entries + n_app_entries + 2].data() : nullptr;

  const size_t n_rays = batch.rays.size();
  const double inv_mse = 1.0 / (static_cast<double>(n_rays) * 3.0);
  const bool use_occ = cfg.w_occ != 0.0;
  double inv_occ = 0.0;
  if (use_occ) {
    if (cfg.occ_bins < 1) throw std::invalid_argument("occlusion: occ_bins must be >= 1");
    for (const render::SampleRow& row : batch.samples)
      if (static_cast<int>(row.t.size()) < cfg.occ_bins)
        throw std::invalid_argument("occlusion: occ_bins exceeds samples per ray");
    inv_occ = 1.0 / (static_cast<double>(n_rays) * cfg.occ_bins);
  }

  RayWorkspace ws;
  LossAccum acc;

  for (size_t ri = 0; ri < n_rays; ++ri) {
    const render::Ray& ray = batch.rays[ri];
    const render::SampleRow& row = batch.samples[ri];
    const Rgb& target = batch.targets[ri];
    const int n = static_cast<int>(row.t.size());
    ws.resize(n, rd, ra, stride_d, stride_a, channels, hid, in_dim);

    // ---- forward ----
    for (int s = 0; s < n; ++s) {
      Vec3 p = ray.origin + row.t[s] * ray.dir;
      Vec3 g = field::world_to_grid(p, f.dims);
      if (!f.density.in_range(g)) continue;  // zero density, zero appearance
      ws.in_box[s] = 1;
      AxisStencil* st = &ws.st[static_cast<size_t>(s) * 3];
      for (int a = 0; a < 3; ++a) st[a] = field::axis_stencil(g[a], f.dims.axis_len(a));

      ws.draw[s] = eval_components_cached(den_refs, stride_d, st,
                                          &ws.den_parts[static_cast<size_t>(s) * rd * stride_d],
                                          nullptr);
      ws.sig[s] = field::density_activation(ws.draw[s]);

      double* comps = &ws.app_comps[static_cast<size_t>(s) * ra];
      eval_components_cached(app_refs, stride_a, st,
                             &ws.app_parts[static_cast<size_t>(s) * ra * stride_a], comps);
      double* feat = &ws.feat[static_cast<size_t>(s) * channels];
      for (int c = 0; c < channels; ++c) {
        const double* brow = f.app_basis.data() + static_cast<size_t>(c) * ra;
        double a2 = 0.0;
        for (int r = 0; r < ra; ++r) a2 += brow[r] * comps[r];
        feat[c] = a2;
      }

      std::copy(feat, feat + channels, ws.dec_in.begin());
      if (dec.use_viewdir)
        for (int a = 0; a < 3; ++a) ws.dec_in[channels + a] = ray.dir[a];
      double* h = &ws.hidden[static_cast<size_t>(s) * hid];
      for (int jj = 0; jj < hid; ++jj) {
        const double* wrow = dec.w1.data() + static_cast<size_t>(jj) * in_dim;
        double a2 = 0.0;
        for (int ii = 0; ii < in_dim; ++ii) a2 += wrow[ii] * ws.dec_in[ii];
        h[jj] = a2 > 0.0 ? a2 : 0.0;
      }
      for (int c = 0; c < 3; ++c) {
        const double* wrow = dec.w2.data() + static_cast<size_t>(c) * hid;
        double a2 = 0.0;
        for (int jj = 0; jj < hid; ++jj) a2 += wrow[jj] * h[jj];
        ws.rgb[s][c] = sigmoid(a2);
      }
    }

    // compositing (no early termination: forward and backward stay consistent)
    Rgb pixel{0, 0, 0};
    double transmittance = 1.0;
    for (int s = 0; s < n; ++s) {
      const double a = ws.in_box[s] ? -std::expm1(-ws.sig[s] * row.delta[s]) : 0.0;
      ws.alpha[s] = a;
      ws.w[s] = transmittance * a;
      if (ws.in_box[s])
        for (int c = 0; c < 3; ++c) pixel[c] += ws.w[s] * ws.rgb[s][c];
      transmittance *= 1.0 - a;
      ws.t_next[s] = transmittance;
    }
    for (int c = 0; c < 3; ++c) pixel[c] += transmittance * cfg.background[c];

    double ray_sq = 0.0;
    Rgb gp{0, 0, 0};
    for (int c = 0; c < 3; ++c) {
      const double r2 = pixel[c] - target[c];
      ray_sq += r2 * r2;
      gp[c] = cfg.w_mse * 2.0 * r2 * inv_mse;
    }
    acc.mse += ray_sq;
    const bool color_grad = cfg.w_mse != 0.0;

    if (use_occ)
      for (int s = 0; s < cfg.occ_bins; ++s) acc.occ += ws.sig[s];

    if (!grads) continue;

    // ---- backward ----
    const double beta = gp[0] * cfg.background[0] + gp[1] * cfg.background[1] +
                        gp[2] * cfg.background[2];
    double suffix = 0.0;  // sum over q > s of u_q * w_q
    for (int s = n - 1; s >= 0; --s) {
      if (!ws.in_box[s]) continue;
      const double u =
          gp[0] * ws.rgb[s][0] + gp[1] * ws.rgb[s][1] + gp[2] * ws.rgb[s][2] - beta;
      double dsig = row.delta[s] * (u * ws.t_next[s] - suffix);
      suffix += u * ws.w[s];

      if (use_occ && s < cfg.occ_bins) dsig += cfg.w_occ * inv_occ;

      double scale = 1.0;
      if (cfg.grad_scaling) scale = train::distance_grad_scale(row.t[s], cfg.near_scale);

      // density chain: sigma -> raw -> factors
      const double ddraw = scale * dsig * field::density_activation_deriv(ws.draw[s]);
      const AxisStencil* st = &ws.st[static_cast<size_t>(s) * 3];
      const double* dparts = &ws.den_parts[static_cast<size_t>(s) * rd * stride_d];
      for (size_t r = 0; r < den_refs.size(); ++r)
        backprop_component(den_refs[r], stride_d, st, dparts, r, ddraw);

      if (!color_grad) continue;

      // color chain: pixel -> rgb -> decoder -> features -> basis/factors
      const double* h = &ws.hidden[static_cast<size_t>(s) * hid];
      const double* feat = &ws.feat[static_cast<size_t>(s) * channels];
      std::copy(feat, feat + channels, ws.dec_in.begin());
      if (dec.use_viewdir)
        for (int a = 0; a < 3; ++a) ws.dec_in[channels + a] = ray.dir[a];

      std::fill(ws.g_h.begin(), ws.g_h.end(), 0.0);
      for (int c = 0; c < 3; ++c) {
        const double drgb = scale * gp[c] * ws.w[s];
        const double go = drgb * ws.rgb[s][c] * (1.0 - ws.rgb[s][c]);
        double* gw2row = g_w2 + static_cast<size_t>(c) * hid;
        const double* w2row = dec.w2.data() + static_cast<size_t>(c) * hid;
        for (int jj = 0; jj < hid; ++jj) {
          gw2row[jj] += go * h[jj];
          ws.g_h[jj] += go * w2row[jj];
        }
      }
      std::fill(ws.g_x.begin(), ws.g_x.end(), 0.0);
      for (int jj = 0; jj < hid; ++jj) {
        if (h[jj] <= 0.0) continue;  // relu gate
        const double ghp = ws.g_h[jj];
        double* gw1row = g_w1 + static_cast<size_t>(jj) * in_dim;
        const double* w1row = dec.w1.data() + static_cast<size_t>(jj) * in_dim;
        for (int ii = 0; ii < in_dim; ++ii) {
          gw1row[ii] += ghp * ws.dec_in[ii];
          ws.g_x[ii] += ghp * w1row[ii];
        }
      }

      const double* comps = &ws.app_comps[static_cast<size_t>(s) * ra];
      std::fill(ws.dcomp.begin(), ws.dcomp.begin() + ra, 0.0);
      for (int c = 0; c < channels; ++c) {
        const double gf = ws.g_x[c];
        if (gf == 0.0) continue;
        double* gbrow = g_basis + static_cast<size_t>(c) * ra;
        const double* brow = f.app_basis.data() + static_cast<size_t>(c) * ra;
        for (int r = 0; r < ra; ++r) {
          gbrow[r] += gf * comps[r];
          ws.dcomp[r] += gf * brow[r];
        }
      }
      const double* aparts = &ws.app_parts[static_cast<size_t>(s) * ra * stride_a];
      for (size_t r = 0; r < app_refs.size(); ++r)
        if (ws.dcomp[r] != 0.0)
          backprop_component(app_refs[r], stride_a, st, aparts, r, ws.dcomp[r]);
    }
  }

  LossBreakdown out;
  out.mse = acc.mse * inv_mse;
  out.occ = use_occ ? acc.occ * inv_occ : 0.0;
  out.tv = train::tv_loss(f);
  out.l1 = train::l1_loss(f.density);
  out.total =
      cfg.w_mse * out.mse + cfg.w_tv * out.tv + cfg.w_l1 * out.l1 + cfg.w_occ * out.occ;

  if (grads && cfg.w_tv != 0.0) {
    auto params = enumerate_params(m);
    for (size_t i = 0; i < params.size(); ++i)
      if (is_spatial(params[i].kind))
        train::tv_term_grad(params[i].data, params[i].rows, params[i].cols, cfg.w_tv,
                            grads->g[i]);
  }
  if (grads && cfg.w_l1 != 0.0) {
    auto params = enumerate_params(m);
    size_t n_density = 0;
    for (const ParamView& p : params)
      if (is_density(p.kind)) n_density += p.data.size();
    const double gl1 = cfg.w_l1 / static_cast<double>(n_density);
    for (size_t i = 0; i < params.size(); ++i) {
      if (!is_density(params[i].kind)) continue;
      for (size_t e = 0; e < params[i].data.size(); ++e) {
        double v = params[i].data[e];
        if (v > 0.0)
          grads->g[i][e] += gl1;
        else if (v < 0.0)
          grads->g[i][e] -= gl1;
      }
    }
  }

  if (!std::isfinite(out.total)) {
    auto params = enumerate_params(m);
    for (const ParamView& p : params)
      for (double v : p.data)
        if (!std::isfinite(v))
          throw std::runtime_error("loss_and_grad: non-finite loss; first offending parameter "
                                   "array: " + p.name);
    throw std::runtime_error("loss_and_grad: non-finite loss with finite parameters");
  }
  return out;
}

}  // namespace

LossBreakdown loss_and_grad(Model& m, const RayBatch& batch, const LossConfig& cfg,
                            GradSet& grads) {
  auto params = enumerate_params(m);
  if (grads.g.size() != params.size()) grads.resize_like(params);
  grads.zero();
  return run_batch(m, batch, cfg, &grads);
}

LossBreakdown loss_only(Model& m, const RayBatch& batch, const LossConfig& cfg) {
  return run_batch(m, batch, cfg, nullptr);
}

double fd_check(Model& m, const RayBatch& batch, const LossConfig& cfg, int k,
                std::mt19937_64& rng, double h) {
  if (k <= 0) return 0.0;
  auto params = enumerate_params(m);
  GradSet grads;
  grads.resize_like(params);
  run_batch(m, batch, cfg, &grads);

  std::size_t total = 0;
  for (const ParamView& p : params) total += p.data.size();
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);

  double max_rel = 0.0;
  for (int probe = 0; probe < k; ++probe) {
    std::size_t flat = pick(rng);
    std::size_t ai = 0;
    while (flat >= params[ai].data.size()) flat -= params[ai++].data.size();

    double& theta = params[ai].data[flat];
    const double saved = theta;
    theta = saved + h;
    const double lp = run_batch(m, batch, cfg, nullptr).total;
    theta = saved - h;
    const double lm = run_batch(m, batch, cfg, nullptr).total;
    theta = saved;

    const double fd = (lp - lm) / (2.0 * h);
    const double an = grads.g[ai][flat];
    const double err = std::abs(fd - an);
    if (err < 1e-7) continue;  // absolute-tolerance floor
    const double rel = err / std::max(std::abs(fd), std::abs(an));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace fourierf::grad
