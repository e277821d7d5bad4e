#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fourierf::field {

using Vec3 = Eigen::Vector3d;

/// Voxel resolution and world-space bounding box of the scene tensor.
struct GridDims {
  int i = 0, j = 0, k = 0;  // per-axis resolution, >= 2
  Vec3 aabb_min = Vec3::Zero();
  Vec3 aabb_max = Vec3::Ones();

  int axis_len(int axis) const { return axis == 0 ? i : (axis == 1 ? j : k); }
  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(i) * j * k;
  }
  void validate() const;  // throws std::invalid_argument on bad dims/box
};

/// Affine map from world space to continuous grid coordinates:
/// aabb_min -> (0,0,0), aabb_max -> (i-1, j-1, k-1).
Vec3 world_to_grid(const Vec3& p, const GridDims& dims);

/// Linear interpolation stencil along one axis: node index i0 in
/// [0, len-2] and fractional offset, value = a[i0]*(1-frac) + a[i0+1]*frac.
struct AxisStencil {
  int i0 = 0;
  double frac = 0.0;
};

inline AxisStencil axis_stencil(double x, int len) {
  int i0 = static_cast<int>(x);
  if (i0 > len - 2) i0 = len - 2;
  if (i0 < 0) i0 = 0;
  return {i0, x - i0};
}

inline double lerp_vector(const std::vector<double>& v, const AxisStencil& s) {
  return v[s.i0] * (1.0 - s.frac) + v[s.i0 + 1] * s.frac;
}

inline double lerp_matrix(const std::vector<double>& m, int cols, const AxisStencil& r,
                          const AxisStencil& c) {
  const double* base = m.data() + static_cast<size_t>(r.i0) * cols + c.i0;
  double top = base[0] * (1.0 - c.frac) + base[1] * c.frac;
  double bot = base[cols] * (1.0 - c.frac) + base[cols + 1] * c.frac;
  return top * (1.0 - r.frac) + bot * r.frac;
}

/// softplus; maps raw feature values to nonnegative density.
double density_activation(double raw);
/// d/draw of density_activation (the logistic function).
double density_activation_deriv(double raw);

enum class Decomp { CP, VM };

/// One CP component: three factor vectors, lengths I, J, K.
struct CpComponent {
  std::array<std::vector<double>, 3> v;
};

/// One VM component for a principal axis: a factor vector along that axis
/// and a factor matrix over the two complementary axes (row-major, rows =
/// first complementary axis, cols = second).
struct VmComponent {
  std::vector<double> line;
  std::vector<double> plane;
};

/// Complementary axes of a VM plane: 0 -> (1,2), 1 -> (0,2), 2 -> (0,1).
constexpr std::array<int, 2> plane_axes(int axis) {
  return axis == 0 ? std::array<int, 2>{1, 2}
                   : (axis == 1 ? std::array<int, 2>{0, 2} : std::array<int, 2>{0, 1});
}

/// A decomposed scalar grid: either a CP factorization (rank R) or a VM
/// factorization (per-axis ranks R1..R3). Evaluating at a point yields one
/// scalar per component; callers combine them (sum for density, basis mix
/// for appearance).
struct FactorGrid {
  Decomp decomp = Decomp::VM;
  GridDims dims;
  std::vector<CpComponent> cp;                 // CP components
  std::array<std::vector<VmComponent>, 3> vm;  // VM components, per principal axis

  int component_count() const;
  bool in_range(const Vec3& g) const;

  /// Writes one interpolated scalar per component into `out`
  /// (size component_count()). Out-of-range points yield all zeros.
  void eval_components(const Vec3& g, std::span<double> out) const;

  /// Sum of all component values (the density read-out). Zero out of range.
  double eval_sum(const Vec3& g) const;

  void validate() const;
};

FactorGrid make_cp_grid(const GridDims& dims, int rank, std::mt19937_64& rng, double init_std);
FactorGrid make_vm_grid(const GridDims& dims, const std::array<int, 3>& ranks,
                        std::mt19937_64& rng, double init_std);

/// Density plus appearance features at one query point.
struct FeatureSample {
  double density_raw = 0.0;
  std::vector<double> appearance;
};

/// The full trainable scene representation: separate density and appearance
/// factor grids plus a per-component channel basis for the appearance
/// features (row-major `channels` x appearance.component_count()).
struct DecomposedField {
  GridDims dims;
  FactorGrid density;
  FactorGrid appearance;
  std::vector<double> app_basis;
  int channels = 27;

  /// Interpolated density/appearance at continuous grid coordinates.
  /// Out-of-range points return zero density and zero appearance.
  FeatureSample eval(const Vec3& grid_p) const;
};

/// Dense realization of a factor grid at grid nodes (flat [i][j][k],
/// row-major). Refuses grids with more than 2^21 voxels.
std::vector<double> materialize_dense(const FactorGrid& g);

/// Dense realization with channel mixing: flat [i][j][k][c] where
/// out[...][c] = sum_r basis[c*R + r] * component_r. Same size cap.
std::vector<double> materialize_dense(const FactorGrid& g, std::span<const double> basis,
                                      int channels);

}  // namespace fourierf::field
