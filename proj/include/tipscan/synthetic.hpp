#pragma once

#include <cstdint>
#include <filesystem>

#include "tipscan/manifest.hpp"

namespace tipscan {

struct GeoBox {
    double min_lat = 34.56;
    double min_lon = 32.27;
    double max_lat = 35.70;
    double max_lon = 34.59;
};

struct SyntheticParams {
    int clutter_min = 3;
    int clutter_max = 8;
    int noise_octaves = 4;
    int side = kCanonicalPatchSide;
    GeoBox bbox;  // records are laid out on a grid inside this box
};

/// One synthetic patch. not_garbage is smooth multi-octave value-noise terrain;
/// garbage is the same kind of terrain with a centred cluster of
/// high-contrast rectangles and ellipses.
RgbPatch render_synthetic_patch(PatchLabel label, std::uint64_t seed,
                                const SyntheticParams& params = {});

/// Balanced synthetic dataset: 2*count_per_class records (alternating
/// garbage / not_garbage), PNGs written under out_dir/patches/. The manifest
/// CSV itself is not written.
DatasetManifest generate_synthetic(int count_per_class, std::uint64_t seed,
                                   const SyntheticParams& params,
                                   const std::filesystem::path& out_dir);

}  // namespace tipscan
