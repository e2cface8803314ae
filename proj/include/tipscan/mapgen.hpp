#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tipscan/network.hpp"
#include "tipscan/patch.hpp"
#include "tipscan/tiles.hpp"

namespace tipscan {

struct BoundingBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    /// Throws Error when degenerate or outside the Mercator range.
    void validate() const;
};

/// "minlat,minlon,maxlat,maxlon".
BoundingBox parse_bbox(const std::string& text);

/// ceil(area_km2 * 1e6 / patch_side_m^2).
std::uint64_t estimate_workload(double area_km2, double patch_side_m);

/// Spherical surface area of the box in km^2.
double bbox_area_km2(const BoundingBox& bbox);

struct GridCell {
    std::size_t index = 0;
    int row = 0;
    int col = 0;
    double center_lat = 0.0;
    double center_lon = 0.0;
    double half_dlat = 0.0;
    double half_dlon = 0.0;
};

/// Row-major cells, north to south then west to east, centred on the box and
/// covering it. Latitude spacing is patch_side_m on the meridian; longitude
/// spacing is widened by 1/cos(row latitude).
std::vector<GridCell> grid_region(const BoundingBox& bbox, double patch_side_m);

struct MapCell {
    double center_lat = 0.0;
    double center_lon = 0.0;
    double side_m = 0.0;
    std::optional<PatchLabel> label;  // empty when the cell failed
    double confidence = 0.0;
    std::string error;
};

struct ScanOptions {
    BoundingBox bbox;
    double patch_side_m = 20.0;
    double m_per_px = 0.10;
    int workers = 1;
    int tile_size = kDefaultTileSize;
    int max_concurrent = 4;
    // Append-only progress journal; empty disables resume.
    std::filesystem::path journal;
    // Identity of the imagery; part of the journal's config hash.
    std::string source_id;
    // Stop after this many newly classified cells (interruption hook).
    std::optional<std::size_t> stop_after;
};

struct ScanResult {
    bool complete = false;
    std::size_t cells_total = 0;
    std::size_t cells_resumed = 0;  // taken from the journal
    std::vector<MapCell> cells;     // grid order; only meaningful when complete
    nlohmann::json document;        // FeatureCollection when complete
};

/// Classifies every grid cell with the model. Fetch failures become features
/// with an `error` property. With a journal, completed cells are appended as
/// they finish and reused on the next run when the config hash matches.
ScanResult scan(const NetworkSpec& spec, const ModelParams& model, TileSource& source,
                const ScanOptions& options);

/// GeoJSON FeatureCollection of the cells plus a `summary` foreign member.
nlohmann::json garbage_map_document(const std::vector<GridCell>& grid,
                                    const std::vector<MapCell>& cells,
                                    const BoundingBox& bbox);

/// Hash of everything that determines a scan's output.
std::string scan_config_hash(const NetworkSpec& spec, const ModelParams& model,
                             const ScanOptions& options);

}  // namespace tipscan
