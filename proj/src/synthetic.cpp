#include "tipscan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tipscan/error.hpp"
#include "tipscan/rng.hpp"

namespace tipscan {

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise: random lattice values, smoothstep-interpolated; octaves double
// the lattice frequency and halve the amplitude. Output roughly in [0, 1].
std::vector<double> terrain_field(int side, int octaves, Rng& rng) {
    std::vector<double> field(static_cast<std::size_t>(side) * side, 0.0);
    double amplitude = 1.0;
    double total = 0.0;
    int cells = 2;
    for (int o = 0; o < octaves; ++o) {
        const int n = cells + 1;
        std::vector<double> lattice(static_cast<std::size_t>(n) * n);
        for (auto& v : lattice) v = rng.uniform01();
        const double step = static_cast<double>(side) / cells;
        for (int r = 0; r < side; ++r) {
            const double fy = (r + 0.5) / step;
            const int y0 = std::min(static_cast<int>(fy), cells - 1);
            const double ty = smoothstep(fy - y0);
            for (int c = 0; c < side; ++c) {
                const double fx = (c + 0.5) / step;
                const int x0 = std::min(static_cast<int>(fx), cells - 1);
                const double tx = smoothstep(fx - x0);
                const double a = lattice[y0 * n + x0];
                const double b = lattice[y0 * n + x0 + 1];
                const double d = lattice[(y0 + 1) * n + x0];
                const double e = lattice[(y0 + 1) * n + x0 + 1];
                const double top = a + (b - a) * tx;
                const double bottom = d + (e - d) * tx;
                field[static_cast<std::size_t>(r) * side + c] +=
                    amplitude * (top + (bottom - top) * ty);
            }
        }
        total += amplitude;
        amplitude *= 0.5;
        cells *= 2;
    }
    for (auto& v : field) v /= total;
    return field;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Scrub, soil and dry grass tones.
constexpr std::array<std::array<double, 3>, 4> kTerrainLow = {{
    {72, 88, 52}, {96, 84, 62}, {84, 96, 60}, {110, 98, 70}}};
constexpr std::array<std::array<double, 3>, 4> kTerrainHigh = {{
    {150, 140, 102}, {170, 150, 112}, {140, 146, 96}, {182, 164, 124}}};

// Plastic, white goods, rubble, tarpaulin.
constexpr std::array<Rgb, 8> kClutterColours = {{{245, 245, 245},
                                                 {30, 30, 34},
                                                 {40, 90, 220},
                                                 {220, 40, 40},
                                                 {250, 210, 30},
                                                 {30, 180, 200},
                                                 {250, 120, 20},
                                                 {200, 60, 200}}};

void draw_clutter(RgbPatch& patch, const SyntheticParams& params, Rng& rng) {
    const int side = patch.width();
    const int lo = params.clutter_min;
    const int hi = params.clutter_max;
    const int count = lo + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    const double centre = side / 2.0;
    const double spread = side * 0.10;
    for (int i = 0; i < count; ++i) {
        const double cx = std::clamp(centre + rng.normal() * spread, side * 0.2, side * 0.8);
        const double cy = std::clamp(centre + rng.normal() * spread, side * 0.2, side * 0.8);
        const double half_w = side * rng.uniform(0.04, 0.12);
        const double half_h = side * rng.uniform(0.04, 0.12);
        const bool ellipse = rng.uniform01() < 0.5;
        Rgb colour = kClutterColours[rng.uniform_index(kClutterColours.size())];
        for (auto& ch : colour) {
            ch = to_byte(ch + rng.uniform(-12.0, 12.0));
        }
        const int r0 = std::max(0, static_cast<int>(std::floor(cy - half_h)));
        const int r1 = std::min(side - 1, static_cast<int>(std::ceil(cy + half_h)));
        const int c0 = std::max(0, static_cast<int>(std::floor(cx - half_w)));
        const int c1 = std::min(side - 1, static_cast<int>(std::ceil(cx + half_w)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dx = (c + 0.5 - cx) / half_w;
                const double dy = (r + 0.5 - cy) / half_h;
                const bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                                            : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (inside) patch.set(r, c, colour);
            }
        }
    }
}

}  // namespace

RgbPatch render_synthetic_patch(PatchLabel label, std::uint64_t seed,
                                const SyntheticParams& params) {
    if (params.side <= 0 || params.noise_octaves < 1 || params.clutter_min < 1 ||
        params.clutter_max < params.clutter_min) {
        throw Error("invalid synthetic parameters");
    }
    Rng rng(seed);
    const int side = params.side;
    const auto field = terrain_field(side, params.noise_octaves, rng);
    const auto palette = rng.uniform_index(kTerrainLow.size());
    const auto& low = kTerrainLow[palette];
    const auto& high = kTerrainHigh[palette];
    RgbPatch patch(side, side);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const double t = field[static_cast<std::size_t>(r) * side + c];
            patch.set(r, c,
                      {to_byte(low[0] + (high[0] - low[0]) * t),
                       to_byte(low[1] + (high[1] - low[1]) * t),
                       to_byte(low[2] + (high[2] - low[2]) * t)});
        }
    }
    if (label == PatchLabel::garbage) {
        draw_clutter(patch, params, rng);
    }
    return patch;
}

DatasetManifest generate_synthetic(int count_per_class, std::uint64_t seed,
                                   const SyntheticParams& params,
                                   const std::filesystem::path& out_dir) {
    if (count_per_class < 1) {
        throw Error("count per class must be >= 1, got " + std::to_string(count_per_class));
    }
    const auto& box = params.bbox;
    if (!(box.min_lat < box.max_lat && box.min_lon < box.max_lon)) {
        throw Error("synthetic bbox must satisfy min < max on both axes");
    }
    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.patch_width = params.side;
    manifest.patch_height = params.side;
    manifest.meters_per_pixel = kDefaultMetersPerPixel;

    const int total = 2 * count_per_class;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
    const int rows = (total + cols - 1) / cols;
    for (int i = 0; i < total; ++i) {
        const auto label = (i % 2 == 0) ? PatchLabel::garbage : PatchLabel::not_garbage;
        // The seed keeps ids of independently generated sets apart.
        char id[64];
        std::snprintf(id, sizeof id, "s%llu-%s%05d", static_cast<unsigned long long>(seed),
                      label == PatchLabel::garbage ? "g" : "n", i / 2);
        PatchRecord rec;
        rec.id = id;
        rec.file_path = "patches/" + rec.id + ".png";
        rec.label = label;
        rec.lat = box.max_lat - (box.max_lat - box.min_lat) * ((i / cols) + 0.5) / rows;
        rec.lon = box.min_lon + (box.max_lon - box.min_lon) * ((i % cols) + 0.5) / cols;
        rec.provenance_id = rec.id;
        const auto patch = render_synthetic_patch(
            label, derive_seed(seed, "synthetic/" + std::to_string(i)), params);
        store_patch(out_dir, rec, patch);
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

}  // namespace tipscan
