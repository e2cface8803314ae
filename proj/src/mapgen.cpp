#include "tipscan/mapgen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "tipscan/error.hpp"
#include "tipscan/model_io.hpp"
#include "tipscan/parallel.hpp"
#include "tipscan/rng.hpp"
#include "tipscan/training.hpp"

namespace tipscan {

using nlohmann::json;

void BoundingBox::validate() const {
    if (!(min_lat < max_lat && min_lon < max_lon)) {
        throw Error("bounding box must satisfy min < max on both axes");
    }
    check_mercator_range(min_lat, min_lon);
    check_mercator_range(max_lat, max_lon);
}

BoundingBox parse_bbox(const std::string& text) {
    BoundingBox b;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf%c", &b.min_lat, &b.min_lon, &b.max_lat,
                    &b.max_lon, &tail) != 4) {
        throw UsageError("bbox must be 'minlat,minlon,maxlat,maxlon', got '" + text + "'");
    }
    return b;
}

std::uint64_t estimate_workload(double area_km2, double patch_side_m) {
    if (!(area_km2 > 0.0) || !(patch_side_m > 0.0)) {
        throw Error("area and patch side must be positive");
    }
    const double patches = area_km2 * 1e6 / (patch_side_m * patch_side_m);
    // Tolerate representation error on exact multiples.
    return static_cast<std::uint64_t>(std::ceil(patches * (1.0 - 1e-12)));
}

double bbox_area_km2(const BoundingBox& b) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double r_km = kEarthRadiusM / 1000.0;
    return r_km * r_km * (b.max_lon - b.min_lon) * deg *
           (std::sin(b.max_lat * deg) - std::sin(b.min_lat * deg));
}

std::vector<GridCell> grid_region(const BoundingBox& bbox, double patch_side_m) {
    bbox.validate();
    if (!(patch_side_m > 0.0)) throw Error("patch side must be positive");
    const double dlat = patch_side_m / kMetersPerDegree;
    const double height = bbox.max_lat - bbox.min_lat;
    const double width = bbox.max_lon - bbox.min_lon;
    const int rows = std::max(1, static_cast<int>(std::ceil(height / dlat - 1e-4)));
    const double mid_lat = (bbox.min_lat + bbox.max_lat) / 2.0;
    const double mid_lon = (bbox.min_lon + bbox.max_lon) / 2.0;
    std::vector<GridCell> cells;
    for (int r = 0; r < rows; ++r) {
        const double lat = mid_lat + ((rows - 1) / 2.0 - r) * dlat;
        const double dlon = dlat / std::cos(lat * std::numbers::pi / 180.0);
        const int cols = std::max(1, static_cast<int>(std::ceil(width / dlon - 1e-4)));
        for (int c = 0; c < cols; ++c) {
            GridCell cell;
            cell.index = cells.size();
            cell.row = r;
            cell.col = c;
            cell.center_lat = lat;
            cell.center_lon = mid_lon + (c - (cols - 1) / 2.0) * dlon;
            cell.half_dlat = dlat / 2.0;
            cell.half_dlon = dlon / 2.0;
            cells.push_back(cell);
        }
    }
    return cells;
}

json garbage_map_document(const std::vector<GridCell>& grid, const std::vector<MapCell>& cells,
                          const BoundingBox& bbox) {
    if (grid.size() != cells.size()) throw Error("grid and cell results differ in length");
    json features = json::array();
    std::size_t garbage = 0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& g = grid[i];
        const auto& cell = cells[i];
        const double w = g.center_lon - g.half_dlon;
        const double e = g.center_lon + g.half_dlon;
        const double s = g.center_lat - g.half_dlat;
        const double n = g.center_lat + g.half_dlat;
        // Exterior ring counterclockwise, first vertex repeated.
        json ring = json::array({json::array({w, s}), json::array({e, s}), json::array({e, n}),
                                 json::array({w, n}), json::array({w, s})});
        json props = {{"cell", i}, {"center", json::array({g.center_lon, g.center_lat})},
                      {"side_m", cell.side_m}};
        if (cell.label) {
            props["label"] = to_string(*cell.label);
            props["confidence"] = cell.confidence;
            if (*cell.label == PatchLabel::garbage) ++garbage;
        } else {
            props["label"] = nullptr;
            props["confidence"] = nullptr;
            props["error"] = cell.error;
            ++failed;
        }
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                            {"properties", props}});
    }
    const auto total = grid.size();
    return {{"type", "FeatureCollection"},
            {"bbox", json::array({bbox.min_lon, bbox.min_lat, bbox.max_lon, bbox.max_lat})},
            {"features", features},
            {"summary",
             {{"cells_total", total},
              {"cells_garbage", garbage},
              {"cells_error", failed},
              {"garbage_fraction",
               total == 0 ? 0.0 : static_cast<double>(garbage) / static_cast<double>(total)}}}};
}

std::string scan_config_hash(const NetworkSpec& spec, const ModelParams& model,
                             const ScanOptions& options) {
    const auto bytes = serialize_model(spec, model);
    std::ostringstream key;
    key.precision(17);
    key << fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()))
        << '|' << options.bbox.min_lat << ',' << options.bbox.min_lon << ','
        << options.bbox.max_lat << ',' << options.bbox.max_lon << '|' << options.patch_side_m
        << '|' << options.m_per_px << '|' << options.tile_size << '|' << options.source_id;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(key.str())));
    return buf;
}

namespace {

constexpr std::string_view kJournalMagic = "tipscan-journal-v1";

std::string escape_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '\t' || c == '\n' || c == '\r') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

std::string journal_line(std::size_t index, const MapCell& cell) {
    char conf[40];
    std::snprintf(conf, sizeof conf, "%.17g", cell.confidence);
    std::string line = std::to_string(index) + '\t' +
                       (cell.label ? std::string(to_string(*cell.label)) : std::string("-")) +
                       '\t' + conf + '\t' + escape_field(cell.error) + '\n';
    return line;
}

// Reads completed cells. A torn final line (no newline) is ignored.
std::vector<std::optional<MapCell>> read_journal(const std::filesystem::path& path,
                                                 const std::string& hash, std::size_t cells,
                                                 double side_m, const std::vector<GridCell>& grid) {
    std::vector<std::optional<MapCell>> done(cells);
    std::ifstream in(path, std::ios::binary);
    if (!in) return done;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::istringstream lines(content);
    std::string line;
    if (!std::getline(lines, line)) return done;
    if (line != std::string(kJournalMagic) + " " + hash) {
        throw Error("journal " + path.string() +
                    " was written for a different scan configuration; remove it to start over");
    }
    std::size_t consumed = line.size() + 1;
    while (std::getline(lines, line)) {
        consumed += line.size() + 1;
        if (consumed > content.size()) break;  // torn final line
        std::istringstream fields(line);
        std::string index_text, label_text, conf_text;
        if (!std::getline(fields, index_text, '\t') || !std::getline(fields, label_text, '\t') ||
            !std::getline(fields, conf_text, '\t')) {
            continue;
        }
        std::string error;
        std::getline(fields, error);
        std::size_t index = 0;
        try {
            index = std::stoul(index_text);
        } catch (const std::exception&) {
            continue;
        }
        if (index >= cells) continue;
        MapCell cell;
        cell.center_lat = grid[index].center_lat;
        cell.center_lon = grid[index].center_lon;
        cell.side_m = side_m;
        if (label_text != "-") {
            const auto label = parse_label(label_text);
            if (!label) continue;
            cell.label = *label;
            cell.confidence = std::strtod(conf_text.c_str(), nullptr);
        } else {
            cell.error = error;
        }
        done[index] = std::move(cell);
    }
    return done;
}

}  // namespace

ScanResult scan(const NetworkSpec& spec, const ModelParams& model, TileSource& source,
                const ScanOptions& options) {
    if (!(options.m_per_px > 0.0)) throw Error("m_per_px must be positive");
    const auto grid = grid_region(options.bbox, options.patch_side_m);
    const int side_pixels = static_cast<int>(std::lround(options.patch_side_m / options.m_per_px));
    if (side_pixels < 1) throw Error("patch side is below one pixel at this resolution");

    ScanResult result;
    result.cells_total = grid.size();
    std::vector<std::optional<MapCell>> done(grid.size());
    std::ofstream journal;
    std::mutex journal_mutex;
    if (!options.journal.empty()) {
        const auto hash = scan_config_hash(spec, model, options);
        done = read_journal(options.journal, hash, grid.size(), options.patch_side_m, grid);
        const bool fresh = !std::filesystem::exists(options.journal) ||
                           std::filesystem::file_size(options.journal) == 0;
        if (options.journal.has_parent_path()) {
            std::filesystem::create_directories(options.journal.parent_path());
        }
        if (!fresh) {
            // Drop a torn tail so appended lines start on a fresh line.
            std::ifstream in(options.journal, std::ios::binary);
            std::string content((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
            const auto last_newline = content.rfind('\n');
            if (last_newline + 1 != content.size()) {
                std::filesystem::resize_file(options.journal,
                                             last_newline == std::string::npos ? 0 : last_newline + 1);
            }
        }
        journal.open(options.journal, std::ios::binary | std::ios::app);
        if (!journal) throw Error("cannot open journal " + options.journal.string());
        if (std::filesystem::file_size(options.journal) == 0) {
            journal << kJournalMagic << ' ' << hash << '\n' << std::flush;
        }
    }
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (done[i]) {
            ++result.cells_resumed;
        } else {
            pending.push_back(i);
        }
    }
    if (options.stop_after && *options.stop_after < pending.size()) {
        pending.resize(*options.stop_after);
    }

    parallel_for(pending.size(), options.workers, [&](std::size_t k) {
        const auto& g = grid[pending[k]];
        MapCell cell;
        cell.center_lat = g.center_lat;
        cell.center_lon = g.center_lon;
        cell.side_m = options.patch_side_m;
        try {
            const auto patch = fetch_patch(
                source, FetchRequest{g.center_lat, g.center_lon, side_pixels, options.m_per_px},
                options.tile_size, options.max_concurrent);
            const auto pred = predict(spec, model, patch);
            cell.label = pred.label;
            cell.confidence = pred.confidence;
        } catch (const Error& e) {
            cell.label.reset();
            cell.error = e.what();
        }
        if (journal.is_open()) {
            std::lock_guard lock(journal_mutex);
            journal << journal_line(g.index, cell) << std::flush;
        }
        done[g.index] = std::move(cell);
    });

    result.complete = std::all_of(done.begin(), done.end(), [](const auto& c) { return c.has_value(); });
    if (!result.complete) return result;
    for (auto& c : done) result.cells.push_back(std::move(*c));
    result.document = garbage_map_document(grid, result.cells, options.bbox);
    return result;
}

}  // namespace tipscan
