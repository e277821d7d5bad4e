#include "fourierf/field.hpp"

#include <cmath>
#include <stdexcept>

namespace fourierf::field {

namespace {

constexpr std::int64_t kDenseVoxelCap = std::int64_t(1) << 21;

std::vector<double> random_array(size_t n, std::mt19937_64& rng, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  std::vector<double> out(n);
  for (double& x : out) x = dist(rng);
  return out;
}

}  // namespace

void GridDims::validate() const {
  if (i < 2 || j < 2 || k < 2)
    throw std::invalid_argument("GridDims: every axis resolution must be >= 2");
  for (int a = 0; a < 3; ++a)
    if (!(aabb_min[a] < aabb_max[a]))
      throw std::invalid_argument("GridDims: aabb_min must be strictly below aabb_max");
}

Vec3 world_to_grid(const Vec3& p, const GridDims& dims) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    double span = dims.aabb_max[a] - dims.aabb_min[a];
    g[a] = (p[a] - dims.aabb_min[a]) / span * (dims.axis_len(a) - 1);
  }
  return g;
}

double density_activation(double raw) {
  // softplus, overflow-safe
  return std::max(raw, 0.0) + std::log1p(std::exp(-std::abs(raw)));
}

double density_activation_deriv(double raw) {
  if (raw >= 0.0) return 1.0 / (1.0 + std::exp(-raw));
  double e = std::exp(raw);
  return e / (1.0 + e);
}

int FactorGrid::component_count() const {
  if (decomp == Decomp::CP) return static_cast<int>(cp.size());
  return static_cast<int>(vm[0].size() + vm[1].size() + vm[2].size());
}

bool FactorGrid::in_range(const Vec3& g) const {
  for (int a = 0; a < 3; ++a)
    if (g[a] < 0.0 || g[a] > dims.axis_len(a) - 1) return false;
  return true;
}

void FactorGrid::eval_components(const Vec3& g, std::span<double> out) const {
  if (!in_range(g)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  AxisStencil st[3];
  for (int a = 0; a < 3; ++a) st[a] = axis_stencil(g[a], dims.axis_len(a));

  size_t idx = 0;
  if (decomp == Decomp::CP) {
    for (const CpComponent& c : cp)
      out[idx++] = lerp_vector(c.v[0], st[0]) * lerp_vector(c.v[1], st[1]) * lerp_vector(c.v[2], st[2]);
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      auto [u, w] = plane_axes(axis);
      int cols = dims.axis_len(w);
      for (const VmComponent& c : vm[axis])
        out[idx++] = lerp_vector(c.line, st[axis]) * lerp_matrix(c.plane, cols, st[u], st[w]);
    }
  }
}

double FactorGrid::eval_sum(const Vec3& g) const {
  if (!in_range(g)) return 0.0;
  AxisStencil st[3];
  for (int a = 0; a < 3; ++a) st[a] = axis_stencil(g[a], dims.axis_len(a));

  double sum = 0.0;
  if (decomp == Decomp::CP) {
    for (const CpComponent& c : cp)
      sum += lerp_vector(c.v[0], st[0]) * lerp_vector(c.v[1], st[1]) * lerp_vector(c.v[2], st[2]);
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      auto [u, w] = plane_axes(axis);
      int cols = dims.axis_len(w);
      for (const VmComponent& c : vm[axis])
        sum += lerp_vector(c.line, st[axis]) * lerp_matrix(c.plane, cols, st[u], st[w]);
    }
  }
  return sum;
}

void FactorGrid::validate() const {
  dims.validate();
  if (decomp == Decomp::CP) {
    if (cp.empty()) throw std::invalid_argument("FactorGrid: CP rank must be >= 1");
    for (const CpComponent& c : cp)
      for (int a = 0; a < 3; ++a)
        if (c.v[a].size() != static_cast<size_t>(dims.axis_len(a)))
          throw std::invalid_argument("FactorGrid: CP factor length mismatch");
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      if (vm[axis].empty()) throw std::invalid_argument("FactorGrid: VM ranks must be >= 1");
      auto [u, w] = plane_axes(axis);
      for (const VmComponent& c : vm[axis]) {
        if (c.line.size() != static_cast<size_t>(dims.axis_len(axis)))
          throw std::invalid_argument("FactorGrid: VM line length mismatch");
        if (c.plane.size() != static_cast<size_t>(dims.axis_len(u)) * dims.axis_len(w))
          throw std::invalid_argument("FactorGrid: VM plane shape mismatch");
      }
    }
  }
}

FactorGrid make_cp_grid(const GridDims& dims, int rank, std::mt19937_64& rng, double init_std) {
  dims.validate();
  if (rank < 1) throw std::invalid_argument("make_cp_grid: rank must be >= 1");
  FactorGrid g;
  g.decomp = Decomp::CP;
  g.dims = dims;
  g.cp.resize(rank);
  for (CpComponent& c : g.cp)
    for (int a = 0; a < 3; ++a) c.v[a] = random_array(dims.axis_len(a), rng, init_std);
  return g;
}

FactorGrid make_vm_grid(const GridDims& dims, const std::array<int, 3>& ranks,
                        std::mt19937_64& rng, double init_std) {
  dims.validate();
  FactorGrid g;
  g.decomp = Decomp::VM;
  g.dims = dims;
  for (int axis = 0; axis < 3; ++axis) {
    if (ranks[axis] < 1) throw std::invalid_argument("make_vm_grid: ranks must be >= 1");
    auto [u, w] = plane_axes(axis);
    g.vm[axis].resize(ranks[axis]);
    for (VmComponent& c : g.vm[axis]) {
      c.line = random_array(dims.axis_len(axis), rng, init_std);
      c.plane = random_array(static_cast<size_t>(dims.axis_len(u)) * dims.axis_len(w), rng,
                             init_std);
    }
  }
  return g;
}

FeatureSample DecomposedField::eval(const Vec3& grid_p) const {
  FeatureSample s;
  s.appearance.assign(channels, 0.0);
  s.density_raw = density.eval_sum(grid_p);
  if (!appearance.in_range(grid_p)) return s;

  int rtot = appearance.component_count();
  std::vector<double> comps(rtot);
  appearance.eval_components(grid_p, comps);
  for (int c = 0; c < channels; ++c) {
    double acc = 0.0;
    const double* row = app_basis.data() + static_cast<size_t>(c) * rtot;
    for (int r = 0; r < rtot; ++r) acc += row[r] * comps[r];
    s.appearance[c] = acc;
  }
  return s;
}

namespace {

std::vector<double> materialize_impl(const FactorGrid& g, const double* basis, int channels) {
  if (g.dims.voxel_count() > kDenseVoxelCap)
    throw std::invalid_argument("materialize_dense: grid exceeds the 2^21 voxel cap");
  g.validate();

  const int I = g.dims.i, J = g.dims.j, K = g.dims.k;
  const int rtot = g.component_count();
  std::vector<double> comp(rtot);
  std::vector<double> out(static_cast<size_t>(I) * J * K * channels, 0.0);

  size_t cell = 0;
  for (int a = 0; a < I; ++a)
    for (int b = 0; b < J; ++b)
      for (int c = 0; c < K; ++c, ++cell) {
        size_t idx = 0;
        if (g.decomp == Decomp::CP) {
          for (const CpComponent& comp_r : g.cp)
            comp[idx++] = comp_r.v[0][a] * comp_r.v[1][b] * comp_r.v[2][c];
        } else {
          const int node[3] = {a, b, c};
          for (int axis = 0; axis < 3; ++axis) {
            auto [u, w] = plane_axes(axis);
            int cols = g.dims.axis_len(w);
            for (const VmComponent& comp_r : g.vm[axis])
              comp[idx++] =
                  comp_r.line[node[axis]] * comp_r.plane[static_cast<size_t>(node[u]) * cols + node[w]];
          }
        }
        double* dst = out.data() + cell * channels;
        if (basis == nullptr) {
          double sum = 0.0;
          for (int r = 0; r < rtot; ++r) sum += comp[r];
          dst[0] = sum;
        } else {
          for (int ch = 0; ch < channels; ++ch) {
            double acc = 0.0;
            const double* row = basis + static_cast<size_t>(ch) * rtot;
            for (int r = 0; r < rtot; ++r) acc += row[r] * comp[r];
            dst[ch] = acc;
          }
        }
      }
  return out;
}

}  // namespace

std::vector<double> materialize_dense(const FactorGrid& g) {
  return materialize_impl(g, nullptr, 1);
}

std::vector<double> materialize_dense(const FactorGrid& g, std::span<const double> basis,
                                      int channels) {
  if (channels < 1 || basis.size() != static_cast<size_t>(channels) * g.component_count())
    throw std::invalid_argument("materialize_dense: basis shape mismatch");
  return materialize_impl(g, basis.data(), channels);
}

}  // namespace fourierf::field
