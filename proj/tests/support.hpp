#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "tipscan/manifest.hpp"
#include "tipscan/network.hpp"
#include "tipscan/patch.hpp"
#include "tipscan/rng.hpp"
#include "tipscan/synthetic.hpp"

namespace tipscan::test {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("tipscan-" + name + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline RgbPatch random_patch(int width, int height, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * 3);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_index(256));
    return RgbPatch(width, height, std::move(bytes));
}

// Small synthetic dataset written under dir; side is the patch side in pixels.
inline DatasetManifest small_dataset(const fs::path& dir, int per_class, int side,
                                     std::uint64_t seed) {
    SyntheticParams params;
    params.side = side;
    return generate_synthetic(per_class, seed, params, dir);
}

// Zero weights and a dense bias that always favours `label`.
inline ModelParams constant_model(const NetworkSpec& spec, PatchLabel label) {
    auto params = allocate_params(spec);
    for (std::size_t i = spec.layers.size(); i-- > 0;) {
        if (spec.layers[i].kind == LayerKind::dense) {
            params.layers[i][1][static_cast<std::size_t>(class_index(label))] = 1.0;
            break;
        }
    }
    return params;
}

}  // namespace tipscan::test

#include "tipscan/image_io.hpp"
#include "tipscan/mercator.hpp"
#include "tipscan/tiles.hpp"

namespace tipscan::test {

// Deterministic colour of a global pixel; any tile can be synthesised from it.
inline Rgb world_pixel(std::int64_t gx, std::int64_t gy) {
    return {static_cast<std::uint8_t>((gx * 7 + gy * 3) & 255),
            static_cast<std::uint8_t>((gx * gy + 11) & 255),
            static_cast<std::uint8_t>(((gx / 5) ^ (gy / 3)) & 255)};
}

inline RgbPatch world_tile(const TileKey& key, int tile_size = kDefaultTileSize) {
    RgbPatch tile(tile_size, tile_size);
    for (int r = 0; r < tile_size; ++r) {
        for (int c = 0; c < tile_size; ++c) {
            tile.set(r, c, world_pixel(key.x * tile_size + c, key.y * tile_size + r));
        }
    }
    return tile;
}

// Tile source that renders world_pixel tiles in memory.
class PatternTileSource : public TileSource {
public:
    RgbPatch fetch(const TileKey& key) override {
        ++fetches;
        return world_tile(key);
    }
    std::atomic<int> fetches{0};
};

// Writes z/x/y.png tiles covering the box plus a pixel margin at one zoom.
inline void write_fixture_tiles(const fs::path& dir, double min_lat, double min_lon, double max_lat,
                                double max_lon, int zoom, double margin_px) {
    const auto nw = latlon_to_global_pixel(max_lat, min_lon, zoom);
    const auto se = latlon_to_global_pixel(min_lat, max_lon, zoom);
    const auto tx0 = static_cast<std::int64_t>(std::floor((nw.x - margin_px) / kDefaultTileSize));
    const auto tx1 = static_cast<std::int64_t>(std::floor((se.x + margin_px) / kDefaultTileSize));
    const auto ty0 = static_cast<std::int64_t>(std::floor((nw.y - margin_px) / kDefaultTileSize));
    const auto ty1 = static_cast<std::int64_t>(std::floor((se.y + margin_px) / kDefaultTileSize));
    for (auto x = tx0; x <= tx1; ++x) {
        for (auto y = ty0; y <= ty1; ++y) {
            const TileKey key{zoom, x, y};
            write_png(dir / std::to_string(zoom) / std::to_string(x) / (std::to_string(y) + ".png"),
                      world_tile(key));
        }
    }
}

}  // namespace tipscan::test
