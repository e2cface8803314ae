#include <doctest.h>

#include <httplib.h>

#include <mutex>
#include <thread>

#include "support.hpp"
#include "tipscan/error.hpp"
#include "tipscan/image_io.hpp"
#include "tipscan/tiles.hpp"

using namespace tipscan;
using namespace std::chrono_literals;
using tipscan::test::PatternTileSource;
using tipscan::test::TempDir;
using tipscan::test::world_pixel;
using tipscan::test::world_tile;

namespace {

// Serves world tiles and counts requests.
class TileServer {
public:
    TileServer() {
        server_.Get(R"(/t/(\d+)/(\d+)/(\d+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mutex_);
                paths_.push_back(req.path);
            }
            const TileKey key{std::stoi(req.matches[1]), std::stoll(req.matches[2]), std::stoll(req.matches[3])};
            const auto png = encode_png(world_tile(key));
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });
        server_.Get("/missing/.*", [](const httplib::Request&, httplib::Response& res) { res.status = 404; });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TileServer() {
        server_.stop();
        thread_.join();
    }
    std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::vector<std::string> paths() {
        std::lock_guard lock(mutex_);
        return paths_;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::mutex mutex_;
    std::vector<std::string> paths_;
};

// Transport double: tracks in-flight calls and can fail a number of times first.
class FakeTransport : public HttpTransport {
public:
    std::vector<std::uint8_t> get(const std::string& url, double) override {
        const int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(delay);
        --in_flight;
        ++calls;
        if (failures_left.fetch_sub(1) > 0) throw Error("simulated failure for " + url);
        return encode_png(RgbPatch(256, 256, Rgb{1, 2, 3}));
    }
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    std::atomic<int> calls{0};
    std::atomic<int> failures_left{0};
    std::chrono::milliseconds delay{0};
};

TileSourceConfig http_config(const std::string& url) {
    TileSourceConfig c;
    c.kind = TileSourceKind::http_template;
    c.url_template = url;
    return c;
}

}  // namespace

TEST_SUITE("tiles") {

TEST_CASE("template expansion and validation") {
    CHECK(expand_template("https://host/t/{z}/{x}/{y}.png", TileKey{20, 619531, 412345}) ==
          "https://host/t/20/619531/412345.png");
    CHECK_THROWS_AS(http_config("https://host/{z}/{x}.png").validate(), UsageError);
    CHECK_THROWS_AS(http_config("https://host/{z}/{x}/{y}/{y}.png").validate(), UsageError);
    auto c = http_config("https://host/{z}/{x}/{y}.png");
    c.max_concurrent = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    CHECK(http_config("a/{z}/{x}/{y}").source_hash() != http_config("b/{z}/{x}/{y}").source_hash());
}

TEST_CASE("zoom selection picks the coarsest level at or below the target") {
    const int z = select_zoom(35.0, 0.10);
    CHECK(ground_resolution(35.0, z) <= 0.10);
    CHECK(ground_resolution(35.0, z - 1) > 0.10);
    CHECK(select_zoom(0.0, ground_resolution(0.0, 12)) == 12);
}

TEST_CASE("exact zoom at a tile centre returns the central window") {
    const int z = 18;
    const TileKey key{z, 150000, 100000};
    const auto centre = global_pixel_to_latlon(key.x * 256 + 128.0, key.y * 256 + 128.0, z);
    PatternTileSource source;
    const auto patch = fetch_patch(source, {centre.lat, centre.lon, 100, ground_resolution(centre.lat, z)});
    CHECK(patch == crop(world_tile(key), 78, 78, 100, 100));
    CHECK(source.fetches == 1);
}

TEST_CASE("mosaic across tiles then resample matches the world oracle") {
    PatternTileSource source;
    const FetchRequest req{35.1234, 33.3456, 200, 0.10};
    const auto patch = fetch_patch(source, req);
    const int z = select_zoom(req.lat, req.target_m_per_px);
    const double res = ground_resolution(req.lat, z);
    const int src = static_cast<int>(std::lround(200 * 0.10 / res));
    const auto c = latlon_to_global_pixel(req.lat, req.lon, z);
    const auto x0 = static_cast<std::int64_t>(std::floor(c.x - src / 2.0 + 0.5));
    const auto y0 = static_cast<std::int64_t>(std::floor(c.y - src / 2.0 + 0.5));
    RgbPatch window(src, src);
    for (int r = 0; r < src; ++r) {
        for (int col = 0; col < src; ++col) window.set(r, col, world_pixel(x0 + col, y0 + r));
    }
    CHECK(patch == resize_bilinear(window, 200, 200));
    CHECK(source.fetches > 1);
}

TEST_CASE("local directory source and missing tiles") {
    TempDir dir("tiles");
    const TileKey key{3, 2, 5};
    write_png(dir / "3/2/5.png", world_tile(key));
    LocalDirTileSource source(dir.path());
    CHECK(source.fetch(key) == world_tile(key));
    try {
        source.fetch(TileKey{3, 2, 6});
        FAIL("expected a missing tile");
    } catch (const TileError& e) {
        CHECK(e.key() == TileKey{3, 2, 6});
    }
}

TEST_CASE("http source fetches, caches and serves repeats without requests") {
    TileServer server;
    TempDir cache("cache");
    auto config = http_config(server.base() + "/t/{z}/{x}/{y}.png");
    config.cache_dir = cache.path();
    const FetchRequest req{35.0, 33.0, 64, 0.5};
    auto first_source = make_tile_source(config);
    const auto first = fetch_patch(*first_source, req, 256, 4);
    const auto requests = server.paths().size();
    CHECK(requests > 0);
    CHECK(server.paths().front().rfind("/t/", 0) == 0);

    // A fresh source over the same cache makes no requests.
    auto inner = std::make_unique<HttpTileSource>(config, std::make_shared<HttplibTransport>());
    auto* http = inner.get();
    CachedTileSource cached(std::move(inner), config.cache_dir, config.source_hash());
    const auto second = fetch_patch(cached, req, 256, 4);
    CHECK(second == first);
    CHECK(http->request_count() == 0);
    CHECK(cached.hits() == requests);
    CHECK(server.paths().size() == requests);
    const TileKey k{17, 1, 2};
    CHECK(cached.cache_path(k) == cache.path() / config.source_hash() / "17" / "1" / "2.png");
}

TEST_CASE("http errors carry the tile key after retries") {
    TileServer server;
    HttpTileSource source(http_config(server.base() + "/missing/{z}/{x}/{y}"),
                          std::make_shared<HttplibTransport>(), RetryPolicy{3, 1ms});
    try {
        source.fetch(TileKey{4, 3, 2});
        FAIL("expected failure");
    } catch (const TileError& e) {
        CHECK(e.key() == TileKey{4, 3, 2});
        CHECK(std::string(e.what()).find("404") != std::string::npos);
    }
    CHECK(source.request_count() == 3);
}

TEST_CASE("retries recover from transient failures") {
    auto transport = std::make_shared<FakeTransport>();
    transport->failures_left = 2;
    HttpTileSource source(http_config("http://x/{z}/{x}/{y}"), transport, RetryPolicy{3, 1ms});
    CHECK(source.fetch(TileKey{1, 0, 0}).at(0, 0) == Rgb{1, 2, 3});
    CHECK(transport->calls == 3);
}

TEST_CASE("in-flight requests never exceed max_concurrent") {
    auto transport = std::make_shared<FakeTransport>();
    transport->delay = 15ms;
    auto config = http_config("http://x/{z}/{x}/{y}");
    config.max_concurrent = 2;
    HttpTileSource source(config, transport);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] { source.fetch(TileKey{5, t, 0}); });
    }
    for (auto& t : threads) t.join();
    CHECK(transport->calls == 8);
    CHECK(transport->peak <= 2);
    CHECK(transport->peak >= 1);
}

}
