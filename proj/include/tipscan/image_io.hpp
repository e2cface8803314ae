#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tipscan/patch.hpp"

namespace tipscan {

/// Decodes a PNG or JPEG byte stream (detected by signature) to RGB8.
/// Alpha is dropped, grey is expanded.
RgbPatch decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const RgbPatch& patch);

RgbPatch read_png(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it into place.
void write_png(const std::filesystem::path& path, const RgbPatch& patch);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace tipscan
