#pragma once

#include <cstdint>
#include <filesystem>

#include "ssrecon/field/field.hpp"

namespace ssrecon::field {

inline constexpr char kCheckpointMagic[4] = {'S', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (all little-endian):
///   "SSCK" | u32 version | config block | u64 count | count x f32 params
/// Config block: u32 levels, u32 features_per_level, u32 table_size_log2,
/// u32 base_resolution, f64 growth_factor, f64 scene_bound, u32 hidden_width,
/// u32 hidden_layers, u32 geo_features, u32 direction_order.
void save_checkpoint(const std::filesystem::path& path, const FieldParams& params);
FieldParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ssrecon::field
