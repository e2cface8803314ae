#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tipscan/manifest.hpp"

namespace tipscan {

enum class AugmentationOp { rotate90, rotate180, rotate270, flip_h, flip_v, sharpen, center_crop };

std::string_view to_string(AugmentationOp op);

/// Ops in application order: chain[0] is applied first.
using OpChain = std::vector<AugmentationOp>;

/// Canonical tag, outermost op first: {center_crop, rotate90, sharpen} renders
/// as "sharpen∘rotate90∘crop". The empty chain is "original".
std::string chain_tag(const OpChain& chain);

enum class FlipAxis { horizontal, vertical };

using SharpenKernel = std::array<double, 9>;
inline constexpr SharpenKernel kDefaultSharpenKernel = {0, -1, 0, -1, 5, -1, 0, -1, 0};
inline constexpr double kDefaultCropFraction = 0.5;

/// Clockwise quarter turns of a square patch; (r, c) -> (c, H-1-r) per turn.
RgbPatch rotate(const RgbPatch& patch, int quarter_turns);

RgbPatch flip(const RgbPatch& patch, FlipAxis axis);

/// 3x3 per-channel convolution (row-major kernel), replicate border, rounded and clamped.
RgbPatch sharpen(const RgbPatch& patch, const SharpenKernel& kernel = kDefaultSharpenKernel);

/// Centred window of side floor(fraction*side) per axis, bilinearly upscaled back.
RgbPatch center_crop_upscale(const RgbPatch& patch, double crop_fraction = kDefaultCropFraction);

struct AugmentOptions {
    double crop_fraction = kDefaultCropFraction;
    SharpenKernel sharpen_kernel = kDefaultSharpenKernel;
    int jobs = 1;
};

RgbPatch apply_op(const RgbPatch& patch, AugmentationOp op, const AugmentOptions& options = {});
RgbPatch apply_chain(const RgbPatch& patch, const OpChain& chain,
                     const AugmentOptions& options = {});

enum class Technique { crop, sharpen, flip, rotate };
enum class PipelineId { pipeline_1 = 1, pipeline_2 = 2, pipeline_3 = 3 };

std::optional<Technique> parse_technique(std::string_view text);
std::string_view to_string(Technique technique);

/// Per-record chains, original first. Sizes: crop 2, sharpen 2, flip 3, rotate 4.
std::vector<OpChain> technique_chains(Technique technique);

/// Per-record chains. Sizes: pipeline_1 8, pipeline_2 12, pipeline_3 24.
std::vector<OpChain> pipeline_chains(PipelineId id);

/// Applies the chains to every record. Output order: input order, each record
/// followed by its variants in chain order. Patches are written under
/// out_dir/patches/ and the returned manifest is rooted at out_dir.
DatasetManifest expand_dataset(const DatasetManifest& dataset, const std::vector<OpChain>& chains,
                               const std::filesystem::path& out_dir,
                               const AugmentOptions& options = {});

DatasetManifest augment_single(const DatasetManifest& dataset, Technique technique,
                               const std::filesystem::path& out_dir,
                               const AugmentOptions& options = {});

DatasetManifest build_pipeline(const DatasetManifest& dataset, PipelineId id,
                               const std::filesystem::path& out_dir,
                               const AugmentOptions& options = {});

}  // namespace tipscan
