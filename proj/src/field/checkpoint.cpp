#include <bit>
#include <cstring>
#include <fstream>

#include "ssrecon/error.hpp"
#include "ssrecon/field/checkpoint.hpp"

namespace ssrecon::field {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename V>
void put(std::ostream& os, V v) {
  char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  os.write(bytes, sizeof(V));
}

template <typename V>
V get(std::istream& is, const std::filesystem::path& path) {
  char bytes[sizeof(V)];
  if (!is.read(bytes, sizeof(V))) throw Error(ErrorKind::Parse, "truncated checkpoint: " + path.string());
  V v;
  std::memcpy(&v, bytes, sizeof(V));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const FieldParams& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const FieldConfig& cfg = params.config();
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, cfg.grid.levels);
  put<std::uint32_t>(os, cfg.grid.features_per_level);
  put<std::uint32_t>(os, cfg.grid.table_size_log2);
  put<std::uint32_t>(os, cfg.grid.base_resolution);
  put<double>(os, cfg.grid.growth_factor);
  put<double>(os, cfg.grid.scene_bound);
  put<std::uint32_t>(os, cfg.mlp.hidden_width);
  put<std::uint32_t>(os, cfg.mlp.hidden_layers);
  put<std::uint32_t>(os, cfg.mlp.geo_features);
  put<std::uint32_t>(os, cfg.mlp.direction_order);
  const auto values = params.values();
  put<std::uint64_t>(os, values.size());
  os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

FieldParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error(ErrorKind::Parse, "not a checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Parse, "unsupported checkpoint version " + std::to_string(version));
  }
  FieldConfig cfg;
  cfg.grid.levels = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.grid.features_per_level = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.grid.table_size_log2 = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.grid.base_resolution = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.grid.growth_factor = get<double>(is, path);
  cfg.grid.scene_bound = get<double>(is, path);
  cfg.mlp.hidden_width = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.mlp.hidden_layers = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.mlp.geo_features = static_cast<int>(get<std::uint32_t>(is, path));
  cfg.mlp.direction_order = static_cast<int>(get<std::uint32_t>(is, path));
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, std::string("checkpoint config invalid: ") + e.what());
  }
  FieldParams params(cfg);
  const auto count = get<std::uint64_t>(is, path);
  if (count != params.values().size()) {
    throw Error(ErrorKind::Parse, "checkpoint parameter count does not match its config");
  }
  auto values = params.values();
  if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
    throw Error(ErrorKind::Parse, "truncated checkpoint: " + path.string());
  }
  return params;
}

}  // namespace ssrecon::field
