#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "tipscan/error.hpp"
#include "tipscan/mercator.hpp"
#include "tipscan/patch.hpp"

namespace tipscan {

std::string to_string(const TileKey& key);

/// A tile could not be produced. Carries the key that failed.
class TileError : public Error {
public:
    TileError(const std::string& what, TileKey key) : Error(what), key_(key) {}
    const TileKey& key() const noexcept { return key_; }

private:
    TileKey key_;
};

enum class TileSourceKind { local_dir, http_template };

struct TileSourceConfig {
    TileSourceKind kind = TileSourceKind::local_dir;
    std::string url_template;        // http: contains {z}, {x}, {y} once each
    std::filesystem::path local_dir; // local: <dir>/<z>/<x>/<y>.png (or .jpg)
    double request_timeout_s = 10.0;
    int max_concurrent = 4;
    std::filesystem::path cache_dir; // empty disables the cache
    int tile_size = kDefaultTileSize;

    /// Throws UsageError on a malformed configuration.
    void validate() const;
    /// Stable identity of the imagery behind the source (hash of template or directory).
    std::string source_hash() const;
};

/// Replaces {z}, {x}, {y}.
std::string expand_template(const std::string& url_template, const TileKey& key);

class TileSource {
public:
    virtual ~TileSource() = default;
    /// Decoded tile. Throws TileError.
    virtual RgbPatch fetch(const TileKey& key) = 0;
};

class LocalDirTileSource : public TileSource {
public:
    explicit LocalDirTileSource(std::filesystem::path dir) : dir_(std::move(dir)) {}
    RgbPatch fetch(const TileKey& key) override;

private:
    std::filesystem::path dir_;
};

/// Raw HTTP GET. Implementations throw Error on network failure or non-200 status.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual std::vector<std::uint8_t> get(const std::string& url, double timeout_s) = 0;
};

/// cpp-httplib backed transport; https needs the OpenSSL build.
class HttplibTransport : public HttpTransport {
public:
    std::vector<std::uint8_t> get(const std::string& url, double timeout_s) override;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
};

class HttpTileSource : public TileSource {
public:
    HttpTileSource(TileSourceConfig config, std::shared_ptr<HttpTransport> transport,
                   RetryPolicy retry = {});
    RgbPatch fetch(const TileKey& key) override;

    /// Transport calls issued so far, retries included.
    std::uint64_t request_count() const noexcept { return requests_.load(); }

private:
    TileSourceConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    std::counting_semaphore<1024> slots_;
    std::atomic<std::uint64_t> requests_{0};
};

/// Disk cache in front of another source: <cache_dir>/<source_hash>/<z>/<x>/<y>.png.
/// Writes go to a temp file and are renamed into place, one at a time.
class CachedTileSource : public TileSource {
public:
    CachedTileSource(std::unique_ptr<TileSource> inner, std::filesystem::path cache_dir,
                     std::string source_hash);
    RgbPatch fetch(const TileKey& key) override;

    std::filesystem::path cache_path(const TileKey& key) const;
    std::uint64_t hits() const noexcept { return hits_.load(); }
    std::uint64_t misses() const noexcept { return misses_.load(); }

private:
    std::unique_ptr<TileSource> inner_;
    std::filesystem::path root_;
    std::mutex write_mutex_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

/// Source stack for a configuration: local or HTTP, wrapped in the disk cache
/// when cache_dir is set. `transport` defaults to HttplibTransport.
std::unique_ptr<TileSource> make_tile_source(const TileSourceConfig& config,
                                             std::shared_ptr<HttpTransport> transport = nullptr);

/// Finest-needed zoom: the smallest zoom whose ground resolution at `lat` is
/// at or below target_m_per_px.
int select_zoom(double lat, double target_m_per_px, int tile_size = kDefaultTileSize);

struct FetchRequest {
    double lat = 0.0;
    double lon = 0.0;
    int side_pixels = 200;
    double target_m_per_px = 0.10;
};

/// Patch of side_pixels^2 centred on (lat, lon) at target_m_per_px. Covering
/// tiles are fetched up to `max_concurrent` at a time and mosaicked; the
/// window is downsampled with resize_bilinear unless the zoom matches exactly.
RgbPatch fetch_patch(TileSource& source, const FetchRequest& request,
                     int tile_size = kDefaultTileSize, int max_concurrent = 4);

RgbPatch fetch_patch(const TileSourceConfig& config, const FetchRequest& request);

}  // namespace tipscan
