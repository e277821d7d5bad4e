#include "fourierf/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fourierf/grad.hpp"

namespace fourierf {

namespace {

constexpr char kMagic[9] = {'F', 'O', 'U', 'R', 'I', 'E', 'R', 'F', '1'};
constexpr std::uint32_t kEndianTag = 0x01020304u;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);

  os.write(kMagic, sizeof(kMagic));
  put(os, kEndianTag);

  const field::GridDims& d = m.field.dims;
  put<std::uint32_t>(os, m.field.density.decomp == field::Decomp::CP ? 0 : 1);
  put<std::int32_t>(os, d.i);
  put<std::int32_t>(os, d.j);
  put<std::int32_t>(os, d.k);
  for (int a = 0; a < 3; ++a) put(os, d.aabb_min[a]);
  for (int a = 0; a < 3; ++a) put(os, d.aabb_max[a]);

  auto put_ranks = [&](const field::FactorGrid& g) {
    if (g.decomp == field::Decomp::CP) {
      put<std::int32_t>(os, static_cast<std::int32_t>(g.cp.size()));
      put<std::int32_t>(os, 0);
      put<std::int32_t>(os, 0);
    } else {
      for (int axis = 0; axis < 3; ++axis)
        put<std::int32_t>(os, static_cast<std::int32_t>(g.vm[axis].size()));
    }
  };
  put_ranks(m.field.density);
  put_ranks(m.field.appearance);
  put<std::int32_t>(os, m.field.channels);
  put<std::int32_t>(os, m.decoder.hidden);
  put<std::uint8_t>(os, m.decoder.use_viewdir ? 1 : 0);

  auto params = grad::enumerate_params(const_cast<Model&>(m));
  std::uint64_t total = 0;
  for (const auto& p : params) total += p.data.size();
  put(os, total);
  for (const auto& p : params)
    os.write(reinterpret_cast<const char*>(p.data.data()),
             static_cast<std::streamsize>(p.data.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed to write checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a FOURIERF1 checkpoint: " + path);
  if (get<std::uint32_t>(is, path) != kEndianTag)
    throw std::runtime_error("checkpoint endianness mismatch: " + path);

  ModelConfig cfg;
  const std::uint32_t decomp = get<std::uint32_t>(is, path);
  cfg.decomp = decomp == 0 ? field::Decomp::CP : field::Decomp::VM;
  cfg.dims.i = get<std::int32_t>(is, path);
  cfg.dims.j = get<std::int32_t>(is, path);
  cfg.dims.k = get<std::int32_t>(is, path);
  for (int a = 0; a < 3; ++a) cfg.dims.aabb_min[a] = get<double>(is, path);
  for (int a = 0; a < 3; ++a) cfg.dims.aabb_max[a] = get<double>(is, path);

  std::array<int, 3> den_ranks{}, app_ranks{};
  for (int& r : den_ranks) r = get<std::int32_t>(is, path);
  for (int& r : app_ranks) r = get<std::int32_t>(is, path);
  if (cfg.decomp == field::Decomp::CP) {
    cfg.cp_rank = den_ranks[0];
    cfg.cp_rank_app = app_ranks[0];
  } else {
    cfg.vm_ranks = den_ranks;
    cfg.vm_ranks_app = app_ranks;
  }
  cfg.feature_dim = get<std::int32_t>(is, path);
  cfg.hidden = get<std::int32_t>(is, path);
  cfg.use_viewdir = get<std::uint8_t>(is, path) != 0;

  Model m = make_model(cfg);
  auto params = grad::enumerate_params(m);
  std::uint64_t total = 0;
  for (const auto& p : params) total += p.data.size();
  const std::uint64_t stored = get<std::uint64_t>(is, path);
  if (stored != total)
    throw std::runtime_error("checkpoint parameter count mismatch: " + path);
  for (auto& p : params) {
    is.read(reinterpret_cast<char*>(p.data.data()),
            static_cast<std::streamsize>(p.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint truncated: " + path);
  }
  return m;
}

}  // namespace fourierf
