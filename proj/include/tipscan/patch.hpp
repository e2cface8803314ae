#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tipscan {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major RGB8 raster. Always non-empty.
class RgbPatch {
public:
    RgbPatch(int width, int height, Rgb fill = {0, 0, 0});
    RgbPatch(int width, int height, std::vector<std::uint8_t> interleaved);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool square() const noexcept { return width_ == height_; }

    Rgb at(int row, int col) const {
        const auto* p = &data_[offset(row, col)];
        return {p[0], p[1], p[2]};
    }
    void set(int row, int col, Rgb value) {
        auto* p = &data_[offset(row, col)];
        p[0] = value[0];
        p[1] = value[1];
        p[2] = value[2];
    }
    std::uint8_t channel(int row, int col, int c) const { return data_[offset(row, col) + c]; }

    /// Interleaved r,g,b bytes, width*height*3 long.
    const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }

    friend bool operator==(const RgbPatch&, const RgbPatch&) = default;

private:
    std::size_t offset(int row, int col) const {
        return (static_cast<std::size_t>(row) * width_ + col) * 3;
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> data_;
};

/// Binary patch class. Index order is fixed: not_garbage = 0, garbage = 1,
/// so a softmax tie resolves to not_garbage.
enum class PatchLabel : int { not_garbage = 0, garbage = 1 };

inline constexpr int kNumClasses = 2;

std::string_view to_string(PatchLabel label);
std::optional<PatchLabel> parse_label(std::string_view text);
inline int class_index(PatchLabel label) { return static_cast<int>(label); }

/// Bilinear resampling with half-pixel centres, edge-clamped. Each channel is
/// interpolated independently, rounded to nearest and clamped to [0, 255].
RgbPatch resize_bilinear(const RgbPatch& patch, int out_width, int out_height);

/// Copy of the window [col, col+width) x [row, row+height). Must lie inside the patch.
RgbPatch crop(const RgbPatch& patch, int col, int row, int width, int height);

}  // namespace tipscan
