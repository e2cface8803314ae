#include "tipscan/manifest.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "tipscan/error.hpp"
#include "tipscan/image_io.hpp"

namespace tipscan {

std::string_view to_string(SplitTag split) {
    switch (split) {
        case SplitTag::train: return "train";
        case SplitTag::test: return "test";
        case SplitTag::unassigned: break;
    }
    return "unassigned";
}

DatasetManifest DatasetManifest::with_records(std::vector<PatchRecord> subset) const {
    DatasetManifest out;
    out.records = std::move(subset);
    out.patch_width = patch_width;
    out.patch_height = patch_height;
    out.meters_per_pixel = meters_per_pixel;
    out.root = root;
    return out;
}

namespace {

std::optional<SplitTag> parse_split(std::string_view text) {
    if (text == "train") return SplitTag::train;
    if (text == "test") return SplitTag::test;
    if (text == "unassigned" || text.empty()) return SplitTag::unassigned;
    return std::nullopt;
}

// RFC 4180 subset: quoted fields with doubled quotes, no embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"") == std::string_view::npos) {
        return std::string(value);
    }
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

double parse_double(std::string_view text, std::size_t row, std::string_view column) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw Error("manifest row " + std::to_string(row) + ": invalid " + std::string(column) +
                    " '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

void validate_records(const std::vector<PatchRecord>& records) {
    std::unordered_set<std::string_view> ids;
    for (const auto& r : records) {
        if (r.id.empty()) {
            throw Error("record with empty id");
        }
        if (!ids.insert(r.id).second) {
            throw Error("duplicate record id '" + r.id + "'");
        }
        if (!(r.lat >= -90.0 && r.lat <= 90.0) || !(r.lon >= -180.0 && r.lon <= 180.0)) {
            throw Error("record '" + r.id + "': coordinates out of range");
        }
        if (r.augmentation_tag == "original" && r.provenance_id != r.id) {
            throw Error("record '" + r.id + "': original record must be its own provenance root");
        }
        if (r.provenance_id.empty()) {
            throw Error("record '" + r.id + "': empty provenance_id");
        }
    }
}

DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("manifest not found: " + path.string());
    }
    if (!(options.meters_per_pixel > 0.0)) {
        throw Error("meters_per_pixel must be positive");
    }
    DatasetManifest manifest;
    manifest.root = path.parent_path();
    manifest.meters_per_pixel = options.meters_per_pixel;

    std::string line;
    if (!std::getline(in, line)) {
        throw Error("manifest " + path.string() + " is empty (missing header)");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line != kManifestHeader) {
        throw Error("manifest header mismatch: expected '" + std::string(kManifestHeader) + "'");
    }

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 8) {
            throw Error("manifest row " + std::to_string(row) + ": expected 8 fields, got " +
                        std::to_string(fields.size()));
        }
        PatchRecord rec;
        rec.id = fields[0];
        rec.file_path = fields[1];
        const auto label = parse_label(fields[2]);
        if (!label) {
            throw Error("manifest row " + std::to_string(row) + ": unknown label '" + fields[2] +
                        "'");
        }
        rec.label = *label;
        rec.lat = parse_double(fields[3], row, "lat");
        rec.lon = parse_double(fields[4], row, "lon");
        rec.provenance_id = fields[5];
        rec.augmentation_tag = fields[6];
        const auto split = parse_split(fields[7]);
        if (!split) {
            throw Error("manifest row " + std::to_string(row) + ": unknown split '" + fields[7] +
                        "'");
        }
        rec.split = *split;
        if (rec.id.empty() || rec.file_path.empty()) {
            throw Error("manifest row " + std::to_string(row) + ": empty id or file_path");
        }
        manifest.records.push_back(std::move(rec));
    }
    validate_records(manifest.records);

    manifest.patch_width = options.patch_width.value_or(0);
    manifest.patch_height = options.patch_height.value_or(0);
    if (!options.verify_files) {
        if (manifest.patch_width == 0) manifest.patch_width = kCanonicalPatchSide;
        if (manifest.patch_height == 0) manifest.patch_height = kCanonicalPatchSide;
        return manifest;
    }
    for (const auto& rec : manifest.records) {
        const auto file = manifest.root / rec.file_path;
        if (!std::filesystem::exists(file)) {
            throw Error("record '" + rec.id + "': missing patch file " + file.string());
        }
        RgbPatch patch = [&] {
            try {
                return read_png(file);
            } catch (const Error& e) {
                throw Error("record '" + rec.id + "': undecodable patch file: " + e.what());
            }
        }();
        if (manifest.patch_width == 0) manifest.patch_width = patch.width();
        if (manifest.patch_height == 0) manifest.patch_height = patch.height();
        if (patch.width() != manifest.patch_width || patch.height() != manifest.patch_height) {
            throw Error("record '" + rec.id + "': dimension mismatch, file is " +
                        std::to_string(patch.width()) + "x" + std::to_string(patch.height()) +
                        ", expected " + std::to_string(manifest.patch_width) + "x" +
                        std::to_string(manifest.patch_height));
        }
    }
    if (manifest.patch_width == 0) manifest.patch_width = kCanonicalPatchSide;
    if (manifest.patch_height == 0) manifest.patch_height = kCanonicalPatchSide;
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    validate_records(manifest.records);
    std::ostringstream out;
    out << kManifestHeader << '\n';
    char coord[64];
    for (const auto& r : manifest.records) {
        out << csv_field(r.id) << ',' << csv_field(r.file_path) << ',' << to_string(r.label)
            << ',';
        std::snprintf(coord, sizeof coord, "%.6f,%.6f", r.lat, r.lon);
        out << coord << ',' << csv_field(r.provenance_id) << ',' << csv_field(r.augmentation_tag)
            << ',' << to_string(r.split) << '\n';
    }
    const std::string text = out.str();
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                      text.size()));
}

RgbPatch load_patch(const DatasetManifest& manifest, const PatchRecord& record) {
    try {
        return read_png(manifest.root / record.file_path);
    } catch (const Error& e) {
        throw Error("record '" + record.id + "': " + e.what());
    }
}

void store_patch(const std::filesystem::path& root, const PatchRecord& record,
                 const RgbPatch& patch) {
    write_png(root / record.file_path, patch);
}

BalanceReport validate_balance(const DatasetManifest& manifest) {
    BalanceReport report;
    for (const auto& r : manifest.records) {
        if (r.label == PatchLabel::garbage) {
            ++report.count_positive;
        } else {
            ++report.count_negative;
        }
    }
    report.balanced = report.count_positive == report.count_negative;
    return report;
}

}  // namespace tipscan
