#include "tipscan/mercator.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tipscan/error.hpp"

namespace tipscan {

bool TileKey::valid() const noexcept {
    if (zoom < 0 || zoom > 30) return false;
    const std::int64_t n = std::int64_t{1} << zoom;
    return x >= 0 && y >= 0 && x < n && y < n;
}

void check_mercator_range(double lat, double lon) {
    if (!(std::abs(lat) < kMaxMercatorLat)) {
        throw Error("latitude " + std::to_string(lat) + " outside the Web Mercator range");
    }
    if (!(lon >= -180.0 && lon <= 180.0)) {
        throw Error("longitude " + std::to_string(lon) + " outside [-180, 180]");
    }
}

namespace {
double world_pixels(int zoom, int tile_size) {
    if (zoom < 0 || zoom > 30) throw Error("zoom " + std::to_string(zoom) + " out of range");
    if (tile_size <= 0) throw Error("tile size must be positive");
    return static_cast<double>(tile_size) * std::ldexp(1.0, zoom);
}
}  // namespace

double ground_resolution(double lat, int zoom, int tile_size) {
    check_mercator_range(lat);
    return 2.0 * std::numbers::pi * kEarthRadiusM * std::cos(lat * std::numbers::pi / 180.0) /
           world_pixels(zoom, tile_size);
}

GlobalPixel latlon_to_global_pixel(double lat, double lon, int zoom, int tile_size) {
    check_mercator_range(lat, lon);
    const double world = world_pixels(zoom, tile_size);
    const double y = std::log(std::tan(std::numbers::pi / 4.0 + lat * std::numbers::pi / 360.0));
    return {(lon + 180.0) / 360.0 * world, (1.0 - y / std::numbers::pi) / 2.0 * world};
}

LatLon global_pixel_to_latlon(double px, double py, int zoom, int tile_size) {
    const double world = world_pixels(zoom, tile_size);
    const double lon = px / world * 360.0 - 180.0;
    const double merc = std::numbers::pi * (1.0 - 2.0 * py / world);
    const double lat = (2.0 * std::atan(std::exp(merc)) - std::numbers::pi / 2.0) * 180.0 /
                       std::numbers::pi;
    return {lat, lon};
}

TileKey tile_containing(GlobalPixel pixel, int zoom, int tile_size) {
    return {zoom, static_cast<std::int64_t>(std::floor(pixel.x / tile_size)),
            static_cast<std::int64_t>(std::floor(pixel.y / tile_size))};
}

}  // namespace tipscan
