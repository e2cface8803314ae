#include "tipscan/tiles.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdio>
#include <thread>

#include "tipscan/image_io.hpp"
#include "tipscan/parallel.hpp"
#include "tipscan/rng.hpp"

namespace tipscan {

std::string to_string(const TileKey& key) {
    return std::to_string(key.zoom) + "/" + std::to_string(key.x) + "/" + std::to_string(key.y);
}

namespace {

std::size_t count_occurrences(const std::string& text, std::string_view needle) {
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

void replace_once(std::string& text, std::string_view needle, const std::string& value) {
    const auto pos = text.find(needle);
    if (pos != std::string::npos) text.replace(pos, needle.size(), value);
}

}  // namespace

void TileSourceConfig::validate() const {
    if (tile_size <= 0) throw UsageError("imagery.tile_size must be positive");
    if (max_concurrent < 1 || max_concurrent > 1024) {
        throw UsageError("imagery.max_concurrent must lie in [1, 1024]");
    }
    if (!(request_timeout_s > 0.0)) throw UsageError("imagery.timeout_s must be positive");
    if (kind == TileSourceKind::http_template) {
        for (std::string_view ph : {"{z}", "{x}", "{y}"}) {
            if (count_occurrences(url_template, ph) != 1) {
                throw UsageError("url template must contain " + std::string(ph) +
                                 " exactly once: " + url_template);
            }
        }
    } else if (local_dir.empty()) {
        throw UsageError("local tile source needs a directory");
    }
}

std::string TileSourceConfig::source_hash() const {
    const std::string identity = kind == TileSourceKind::http_template
                                     ? "http:" + url_template
                                     : "local:" + std::filesystem::absolute(local_dir).string();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(identity + "#" + std::to_string(tile_size))));
    return buf;
}

std::string expand_template(const std::string& url_template, const TileKey& key) {
    std::string url = url_template;
    replace_once(url, "{z}", std::to_string(key.zoom));
    replace_once(url, "{x}", std::to_string(key.x));
    replace_once(url, "{y}", std::to_string(key.y));
    return url;
}

RgbPatch LocalDirTileSource::fetch(const TileKey& key) {
    const auto base = dir_ / std::to_string(key.zoom) / std::to_string(key.x);
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        const auto file = base / (std::to_string(key.y) + ext);
        if (std::filesystem::exists(file)) {
            try {
                return decode_image(read_file_bytes(file));
            } catch (const Error& e) {
                throw TileError("tile " + to_string(key) + ": " + e.what(), key);
            }
        }
    }
    throw TileError("tile " + to_string(key) + ": missing under " + dir_.string(), key);
}

std::vector<std::uint8_t> HttplibTransport::get(const std::string& url, double timeout_s) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("url without scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(origin);
    const auto timeout = std::chrono::duration<double>(timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_follow_location(true);
    auto res = client.Get(path);
    if (!res) {
        throw Error("GET " + url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error("GET " + url + " returned HTTP " + std::to_string(res->status));
    }
    return {res->body.begin(), res->body.end()};
}

HttpTileSource::HttpTileSource(TileSourceConfig config, std::shared_ptr<HttpTransport> transport,
                               RetryPolicy retry)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      retry_(retry),
      slots_(config_.max_concurrent) {
    config_.validate();
    if (!transport_) transport_ = std::make_shared<HttplibTransport>();
}

RgbPatch HttpTileSource::fetch(const TileKey& key) {
    const std::string url = expand_template(config_.url_template, key);
    std::string last_error;
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        std::vector<std::uint8_t> body;
        bool ok = false;
        slots_.acquire();
        try {
            ++requests_;
            body = transport_->get(url, config_.request_timeout_s);
            ok = true;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
        slots_.release();
        if (ok) {
            try {
                return decode_image(body);
            } catch (const Error& e) {
                throw TileError("tile " + to_string(key) + ": " + e.what(), key);
            }
        }
        if (attempt < retry_.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TileError("tile " + to_string(key) + ": " + last_error + " (after " +
                        std::to_string(retry_.attempts) + " attempts)",
                    key);
}

CachedTileSource::CachedTileSource(std::unique_ptr<TileSource> inner,
                                   std::filesystem::path cache_dir, std::string source_hash)
    : inner_(std::move(inner)), root_(std::move(cache_dir) / std::move(source_hash)) {}

std::filesystem::path CachedTileSource::cache_path(const TileKey& key) const {
    return root_ / std::to_string(key.zoom) / std::to_string(key.x) /
           (std::to_string(key.y) + ".png");
}

RgbPatch CachedTileSource::fetch(const TileKey& key) {
    const auto file = cache_path(key);
    if (std::filesystem::exists(file)) {
        try {
            auto tile = read_png(file);
            ++hits_;
            return tile;
        } catch (const Error&) {
            // Corrupt entry: refetch and overwrite.
        }
    }
    ++misses_;
    auto tile = inner_->fetch(key);
    std::lock_guard lock(write_mutex_);
    write_png(file, tile);
    return tile;
}

std::unique_ptr<TileSource> make_tile_source(const TileSourceConfig& config,
                                             std::shared_ptr<HttpTransport> transport) {
    config.validate();
    std::unique_ptr<TileSource> source;
    if (config.kind == TileSourceKind::http_template) {
        source = std::make_unique<HttpTileSource>(config, std::move(transport));
    } else {
        source = std::make_unique<LocalDirTileSource>(config.local_dir);
    }
    if (!config.cache_dir.empty()) {
        source = std::make_unique<CachedTileSource>(std::move(source), config.cache_dir,
                                                    config.source_hash());
    }
    return source;
}

int select_zoom(double lat, double target_m_per_px, int tile_size) {
    if (!(target_m_per_px > 0.0)) throw Error("target resolution must be positive");
    for (int z = 0; z <= 30; ++z) {
        if (ground_resolution(lat, z, tile_size) <= target_m_per_px * (1.0 + 1e-9)) return z;
    }
    throw Error("no zoom level reaches " + std::to_string(target_m_per_px) + " m/px");
}

namespace {
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}
}  // namespace

RgbPatch fetch_patch(TileSource& source, const FetchRequest& request, int tile_size,
                     int max_concurrent) {
    if (request.side_pixels < 1) throw Error("patch side must be >= 1 pixel");
    check_mercator_range(request.lat, request.lon);
    const int zoom = select_zoom(request.lat, request.target_m_per_px, tile_size);
    const double res = ground_resolution(request.lat, zoom, tile_size);
    const bool exact = std::abs(res - request.target_m_per_px) <= 1e-9 * request.target_m_per_px;
    const int src_side =
        exact ? request.side_pixels
              : std::max(request.side_pixels,
                         static_cast<int>(std::lround(request.side_pixels *
                                                      request.target_m_per_px / res)));

    const auto centre = latlon_to_global_pixel(request.lat, request.lon, zoom, tile_size);
    const auto x0 = static_cast<std::int64_t>(std::floor(centre.x - src_side / 2.0 + 0.5));
    const auto y0 = static_cast<std::int64_t>(std::floor(centre.y - src_side / 2.0 + 0.5));
    const std::int64_t tiles_per_axis = std::int64_t{1} << zoom;
    const std::int64_t world = tiles_per_axis * tile_size;
    if (y0 < 0 || y0 + src_side > world) {
        throw TileError("patch window leaves the Mercator world at zoom " + std::to_string(zoom),
                        TileKey{zoom, 0, std::clamp<std::int64_t>(floor_div(y0, tile_size), 0,
                                                                  tiles_per_axis - 1)});
    }

    const std::int64_t tx0 = floor_div(x0, tile_size);
    const std::int64_t tx1 = floor_div(x0 + src_side - 1, tile_size);
    const std::int64_t ty0 = y0 / tile_size;
    const std::int64_t ty1 = (y0 + src_side - 1) / tile_size;
    struct Slot {
        std::int64_t tx;  // unwrapped column, for placement
        TileKey key;
    };
    std::vector<Slot> slots;
    for (std::int64_t ty = ty0; ty <= ty1; ++ty) {
        for (std::int64_t tx = tx0; tx <= tx1; ++tx) {
            const std::int64_t wrapped = ((tx % tiles_per_axis) + tiles_per_axis) % tiles_per_axis;
            slots.push_back({tx, TileKey{zoom, wrapped, ty}});
        }
    }
    std::vector<std::optional<RgbPatch>> tiles(slots.size());
    parallel_for(slots.size(), max_concurrent, [&](std::size_t i) {
        auto tile = source.fetch(slots[i].key);
        if (tile.width() != tile_size || tile.height() != tile_size) {
            throw TileError("tile " + to_string(slots[i].key) + " is " +
                                std::to_string(tile.width()) + "x" + std::to_string(tile.height()) +
                                ", expected " + std::to_string(tile_size),
                            slots[i].key);
        }
        tiles[i] = std::move(tile);
    });

    RgbPatch window(src_side, src_side);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& tile = *tiles[i];
        const std::int64_t ox = slots[i].tx * tile_size;
        const std::int64_t oy = slots[i].key.y * tile_size;
        const std::int64_t r_begin = std::max(y0, oy);
        const std::int64_t r_end = std::min(y0 + src_side, oy + tile_size);
        const std::int64_t c_begin = std::max(x0, ox);
        const std::int64_t c_end = std::min(x0 + src_side, ox + tile_size);
        for (std::int64_t r = r_begin; r < r_end; ++r) {
            for (std::int64_t c = c_begin; c < c_end; ++c) {
                window.set(static_cast<int>(r - y0), static_cast<int>(c - x0),
                           tile.at(static_cast<int>(r - oy), static_cast<int>(c - ox)));
            }
        }
    }
    if (exact) return window;
    return resize_bilinear(window, request.side_pixels, request.side_pixels);
}

RgbPatch fetch_patch(const TileSourceConfig& config, const FetchRequest& request) {
    auto source = make_tile_source(config);
    return fetch_patch(*source, request, config.tile_size, config.max_concurrent);
}

}  // namespace tipscan
