#include "tipscan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tipscan/error.hpp"
#include "tipscan/parallel.hpp"

namespace tipscan {

namespace {
constexpr std::string_view kCompose = "∘";  // ∘
}

std::string_view to_string(AugmentationOp op) {
    switch (op) {
        case AugmentationOp::rotate90: return "rotate90";
        case AugmentationOp::rotate180: return "rotate180";
        case AugmentationOp::rotate270: return "rotate270";
        case AugmentationOp::flip_h: return "flip_h";
        case AugmentationOp::flip_v: return "flip_v";
        case AugmentationOp::sharpen: return "sharpen";
        case AugmentationOp::center_crop: return "crop";
    }
    return "?";
}

std::string chain_tag(const OpChain& chain) {
    if (chain.empty()) return "original";
    std::string tag;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        if (!tag.empty()) tag += kCompose;
        tag += to_string(*it);
    }
    return tag;
}

RgbPatch rotate(const RgbPatch& patch, int quarter_turns) {
    if (quarter_turns < 1 || quarter_turns > 3) {
        throw Error("quarter_turns must be 1, 2 or 3, got " + std::to_string(quarter_turns));
    }
    if (!patch.square()) {
        throw Error("rotation needs a square patch, got " + std::to_string(patch.width()) + "x" +
                    std::to_string(patch.height()));
    }
    const int n = patch.width();
    RgbPatch out(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            switch (quarter_turns) {
                case 1: out.set(c, n - 1 - r, patch.at(r, c)); break;
                case 2: out.set(n - 1 - r, n - 1 - c, patch.at(r, c)); break;
                default: out.set(n - 1 - c, r, patch.at(r, c)); break;
            }
        }
    }
    return out;
}

RgbPatch flip(const RgbPatch& patch, FlipAxis axis) {
    const int w = patch.width();
    const int h = patch.height();
    RgbPatch out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (axis == FlipAxis::horizontal) {
                out.set(r, w - 1 - c, patch.at(r, c));
            } else {
                out.set(h - 1 - r, c, patch.at(r, c));
            }
        }
    }
    return out;
}

RgbPatch sharpen(const RgbPatch& patch, const SharpenKernel& kernel) {
    const int w = patch.width();
    const int h = patch.height();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * 3);
    std::size_t k = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                double acc = 0.0;
                for (int dr = -1; dr <= 1; ++dr) {
                    const int rr = std::clamp(r + dr, 0, h - 1);
                    for (int dc = -1; dc <= 1; ++dc) {
                        const double coeff = kernel[(dr + 1) * 3 + (dc + 1)];
                        if (coeff == 0.0) continue;
                        acc += coeff * patch.channel(rr, std::clamp(c + dc, 0, w - 1), ch);
                    }
                }
                out[k++] = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
            }
        }
    }
    return RgbPatch(w, h, std::move(out));
}

RgbPatch center_crop_upscale(const RgbPatch& patch, double crop_fraction) {
    if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
        throw Error("crop fraction must lie in (0, 1], got " + std::to_string(crop_fraction));
    }
    const int cw = static_cast<int>(std::floor(crop_fraction * patch.width() + 1e-9));
    const int chh = static_cast<int>(std::floor(crop_fraction * patch.height() + 1e-9));
    if (cw < 1 || chh < 1) {
        throw Error("crop window degenerates below one pixel");
    }
    const auto window =
        crop(patch, (patch.width() - cw) / 2, (patch.height() - chh) / 2, cw, chh);
    return resize_bilinear(window, patch.width(), patch.height());
}

RgbPatch apply_op(const RgbPatch& patch, AugmentationOp op, const AugmentOptions& options) {
    switch (op) {
        case AugmentationOp::rotate90: return rotate(patch, 1);
        case AugmentationOp::rotate180: return rotate(patch, 2);
        case AugmentationOp::rotate270: return rotate(patch, 3);
        case AugmentationOp::flip_h: return flip(patch, FlipAxis::horizontal);
        case AugmentationOp::flip_v: return flip(patch, FlipAxis::vertical);
        case AugmentationOp::sharpen: return sharpen(patch, options.sharpen_kernel);
        case AugmentationOp::center_crop: return center_crop_upscale(patch, options.crop_fraction);
    }
    throw Error("unknown augmentation op");
}

RgbPatch apply_chain(const RgbPatch& patch, const OpChain& chain, const AugmentOptions& options) {
    RgbPatch out = patch;
    for (auto op : chain) out = apply_op(out, op, options);
    return out;
}

std::optional<Technique> parse_technique(std::string_view text) {
    if (text == "crop") return Technique::crop;
    if (text == "sharpen") return Technique::sharpen;
    if (text == "flip") return Technique::flip;
    if (text == "rotate") return Technique::rotate;
    return std::nullopt;
}

std::string_view to_string(Technique technique) {
    switch (technique) {
        case Technique::crop: return "crop";
        case Technique::sharpen: return "sharpen";
        case Technique::flip: return "flip";
        case Technique::rotate: return "rotate";
    }
    return "?";
}

std::vector<OpChain> technique_chains(Technique technique) {
    using Op = AugmentationOp;
    switch (technique) {
        case Technique::crop: return {{}, {Op::center_crop}};
        case Technique::sharpen: return {{}, {Op::sharpen}};
        case Technique::flip: return {{}, {Op::flip_h}, {Op::flip_v}};
        case Technique::rotate: return {{}, {Op::rotate90}, {Op::rotate180}, {Op::rotate270}};
    }
    throw Error("unknown augmentation technique");
}

namespace {

std::vector<OpChain> geometric_set() {
    using Op = AugmentationOp;
    return {{}, {Op::rotate90}, {Op::rotate180}, {Op::rotate270}, {Op::flip_h}, {Op::flip_v}};
}

// Geometric set plus each member followed by sharpen.
std::vector<OpChain> rotate_flip_sharpen() {
    auto chains = geometric_set();
    const auto n = chains.size();
    for (std::size_t i = 0; i < n; ++i) {
        auto sharpened = chains[i];
        sharpened.push_back(AugmentationOp::sharpen);
        chains.push_back(std::move(sharpened));
    }
    return chains;
}

}  // namespace

std::vector<OpChain> pipeline_chains(PipelineId id) {
    using Op = AugmentationOp;
    switch (id) {
        case PipelineId::pipeline_1:
            // One shared baseline copy, then each single-technique set's variants.
            return {{},           {Op::center_crop}, {Op::sharpen},   {Op::flip_h},
                    {Op::flip_v}, {Op::rotate90},    {Op::rotate180}, {Op::rotate270}};
        case PipelineId::pipeline_2:
            return rotate_flip_sharpen();
        case PipelineId::pipeline_3: {
            auto chains = rotate_flip_sharpen();
            const auto n = chains.size();
            for (std::size_t i = 0; i < n; ++i) {
                OpChain cropped{Op::center_crop};
                cropped.insert(cropped.end(), chains[i].begin(), chains[i].end());
                chains.push_back(std::move(cropped));
            }
            return chains;
        }
    }
    throw Error("unknown pipeline id");
}

namespace {

std::string compose_tag(const std::string& chain, const std::string& base) {
    if (base == "original" || base.empty()) return chain;
    if (chain == "original") return base;
    return chain + std::string(kCompose) + base;
}

std::string id_suffix(const OpChain& chain) {
    std::string out;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        out += '.';
        out += to_string(*it);
    }
    return out;
}

}  // namespace

DatasetManifest expand_dataset(const DatasetManifest& dataset, const std::vector<OpChain>& chains,
                               const std::filesystem::path& out_dir,
                               const AugmentOptions& options) {
    std::set<std::string> tags;
    for (const auto& chain : chains) {
        if (!tags.insert(chain_tag(chain)).second) {
            throw Error("duplicate augmentation chain " + chain_tag(chain));
        }
    }
    const std::size_t per = chains.size();
    std::vector<PatchRecord> out(dataset.size() * per);
    parallel_for(dataset.size(), options.jobs, [&](std::size_t i) {
        const auto& src = dataset.records[i];
        const auto patch = load_patch(dataset, src);
        for (std::size_t v = 0; v < per; ++v) {
            PatchRecord rec = src;
            rec.id = src.id + id_suffix(chains[v]);
            rec.file_path = "patches/" + rec.id + ".png";
            rec.augmentation_tag = compose_tag(chain_tag(chains[v]), src.augmentation_tag);
            store_patch(out_dir, rec, apply_chain(patch, chains[v], options));
            out[i * per + v] = std::move(rec);
        }
    });
    validate_records(out);
    auto result = dataset.with_records(std::move(out));
    result.root = out_dir;
    return result;
}

DatasetManifest augment_single(const DatasetManifest& dataset, Technique technique,
                               const std::filesystem::path& out_dir,
                               const AugmentOptions& options) {
    return expand_dataset(dataset, technique_chains(technique), out_dir, options);
}

DatasetManifest build_pipeline(const DatasetManifest& dataset, PipelineId id,
                               const std::filesystem::path& out_dir,
                               const AugmentOptions& options) {
    if (dataset.empty()) {
        throw Error("pipeline input dataset is empty");
    }
    if (dataset.patch_width != dataset.patch_height) {
        throw Error("pipelines need square patches");
    }
    return expand_dataset(dataset, pipeline_chains(id), out_dir, options);
}

}  // namespace tipscan
