#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tipscan/patch.hpp"

namespace tipscan {

enum class SplitTag { unassigned, train, test };

std::string_view to_string(SplitTag split);

struct PatchRecord {
    std::string id;
    std::string file_path;  // relative to the manifest directory
    PatchLabel label = PatchLabel::not_garbage;
    double lat = 0.0;
    double lon = 0.0;
    std::string provenance_id;
    std::string augmentation_tag = "original";
    SplitTag split = SplitTag::unassigned;

    bool operator==(const PatchRecord&) const = default;
};

inline constexpr double kDefaultMetersPerPixel = 0.10;
inline constexpr int kCanonicalPatchSide = 200;
inline constexpr std::string_view kManifestHeader =
    "id,file_path,label,lat,lon,provenance_id,augmentation_tag,split";

struct DatasetManifest {
    std::vector<PatchRecord> records;
    int patch_width = kCanonicalPatchSide;
    int patch_height = kCanonicalPatchSide;
    double meters_per_pixel = kDefaultMetersPerPixel;
    // Directory that record file paths are relative to.
    std::filesystem::path root;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    /// Same geometry and root, different records.
    DatasetManifest with_records(std::vector<PatchRecord> subset) const;
};

struct LoadOptions {
    // Unset dimensions are taken from the first record's file.
    std::optional<int> patch_width;
    std::optional<int> patch_height;
    double meters_per_pixel = kDefaultMetersPerPixel;
    bool verify_files = true;
};

/// Parses and validates a manifest CSV. Throws Error naming the row or record id.
DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes the CSV only; patch files are written by whoever produced them.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Checks the structural record invariants (unique ids, coordinate ranges,
/// original records are their own provenance root).
void validate_records(const std::vector<PatchRecord>& records);

RgbPatch load_patch(const DatasetManifest& manifest, const PatchRecord& record);

/// Writes `patch` to root/record.file_path.
void store_patch(const std::filesystem::path& root, const PatchRecord& record,
                 const RgbPatch& patch);

struct BalanceReport {
    std::size_t count_positive = 0;
    std::size_t count_negative = 0;
    bool balanced = true;

    bool operator==(const BalanceReport&) const = default;
};

BalanceReport validate_balance(const DatasetManifest& manifest);

}  // namespace tipscan
