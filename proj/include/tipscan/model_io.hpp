#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tipscan/network.hpp"

namespace tipscan {

inline constexpr char kModelMagic[] = "TIPSCAN-MODEL";
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct StoredModel {
    NetworkSpec spec;
    ModelParams params;
};

/// Binary layout, all integers little-endian:
///   magic "TIPSCAN-MODEL" (13 bytes), u32 version, u32 name length, name,
///   u32 input side, u32 tensor count, then per tensor in layer order:
///   u32 n, c, h, w followed by n*c*h*w IEEE-754 binary64 values.
std::vector<std::uint8_t> serialize_model(const NetworkSpec& spec, const ModelParams& params);
StoredModel deserialize_model(std::span<const std::uint8_t> bytes);

/// Writes `path` plus a human-readable `<path>.layers.txt` sidecar.
void save_model(const std::filesystem::path& path, const NetworkSpec& spec,
                const ModelParams& params);
StoredModel load_model(const std::filesystem::path& path);

std::filesystem::path model_sidecar_path(const std::filesystem::path& path);

}  // namespace tipscan
