#include "tipscan/patch.hpp"

#include <algorithm>
#include <cmath>

#include "tipscan/error.hpp"

namespace tipscan {

RgbPatch::RgbPatch(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw Error("patch dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
    }
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill[0];
        data_[i + 1] = fill[1];
        data_[i + 2] = fill[2];
    }
}

RgbPatch::RgbPatch(int width, int height, std::vector<std::uint8_t> interleaved)
    : width_(width), height_(height), data_(std::move(interleaved)) {
    if (width <= 0 || height <= 0) {
        throw Error("patch dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
        throw Error("pixel buffer length does not match " + std::to_string(width) + "x" +
                    std::to_string(height) + "x3");
    }
}

std::string_view to_string(PatchLabel label) {
    return label == PatchLabel::garbage ? "garbage" : "not_garbage";
}

std::optional<PatchLabel> parse_label(std::string_view text) {
    if (text == "garbage") return PatchLabel::garbage;
    if (text == "not_garbage") return PatchLabel::not_garbage;
    return std::nullopt;
}

namespace {

struct Tap {
    int lo;
    int hi;
    double frac;
};

std::vector<Tap> bilinear_taps(int in_size, int out_size) {
    std::vector<Tap> taps(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int i = 0; i < out_size; ++i) {
        double src = (i + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
        const int lo = static_cast<int>(std::floor(src));
        taps[i] = {lo, std::min(lo + 1, in_size - 1), src - lo};
    }
    return taps;
}

}  // namespace

RgbPatch resize_bilinear(const RgbPatch& patch, int out_width, int out_height) {
    if (out_width <= 0 || out_height <= 0) {
        throw Error("resize target must be positive, got " + std::to_string(out_width) + "x" +
                    std::to_string(out_height));
    }
    if (out_width == patch.width() && out_height == patch.height()) {
        return patch;
    }
    const auto xs = bilinear_taps(patch.width(), out_width);
    const auto ys = bilinear_taps(patch.height(), out_height);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_width) * out_height * 3);
    std::size_t k = 0;
    for (int r = 0; r < out_height; ++r) {
        const Tap& ty = ys[r];
        for (int c = 0; c < out_width; ++c) {
            const Tap& tx = xs[c];
            for (int ch = 0; ch < 3; ++ch) {
                const double top = patch.channel(ty.lo, tx.lo, ch) * (1.0 - tx.frac) +
                                   patch.channel(ty.lo, tx.hi, ch) * tx.frac;
                const double bottom = patch.channel(ty.hi, tx.lo, ch) * (1.0 - tx.frac) +
                                      patch.channel(ty.hi, tx.hi, ch) * tx.frac;
                const double v = top * (1.0 - ty.frac) + bottom * ty.frac;
                out[k++] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return RgbPatch(out_width, out_height, std::move(out));
}

RgbPatch crop(const RgbPatch& patch, int col, int row, int width, int height) {
    if (width <= 0 || height <= 0 || col < 0 || row < 0 || col + width > patch.width() ||
        row + height > patch.height()) {
        throw Error("crop window outside patch bounds");
    }
    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(width) * height * 3);
    const auto& src = patch.bytes();
    for (int r = row; r < row + height; ++r) {
        const auto begin = src.begin() + (static_cast<std::ptrdiff_t>(r) * patch.width() + col) * 3;
        out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(width) * 3);
    }
    return RgbPatch(width, height, std::move(out));
}

}  // namespace tipscan
