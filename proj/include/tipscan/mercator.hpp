#pragma once

#include <cstdint>

namespace tipscan {

inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr double kMaxMercatorLat = 85.05113;
inline constexpr int kDefaultTileSize = 256;

struct GlobalPixel {
    double x = 0.0;
    double y = 0.0;
};

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

struct TileKey {
    int zoom = 0;
    std::int64_t x = 0;
    std::int64_t y = 0;

    bool valid() const noexcept;
    bool operator==(const TileKey&) const = default;
};

/// Throws Error unless |lat| < kMaxMercatorLat and lon in [-180, 180].
void check_mercator_range(double lat, double lon = 0.0);

/// Metres per pixel: 2*pi*R*cos(lat) / (tile_size * 2^zoom).
double ground_resolution(double lat, int zoom, int tile_size = kDefaultTileSize);

/// Spherical (EPSG:3857) pixel coordinates in a world of tile_size*2^zoom pixels.
GlobalPixel latlon_to_global_pixel(double lat, double lon, int zoom,
                                   int tile_size = kDefaultTileSize);

LatLon global_pixel_to_latlon(double px, double py, int zoom, int tile_size = kDefaultTileSize);

TileKey tile_containing(GlobalPixel pixel, int zoom, int tile_size = kDefaultTileSize);

/// Metres along a meridian per degree of latitude on the sphere.
inline constexpr double kMetersPerDegree = kEarthRadiusM * 3.14159265358979323846 / 180.0;

}  // namespace tipscan
