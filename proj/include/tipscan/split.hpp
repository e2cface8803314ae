#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tipscan/manifest.hpp"

namespace tipscan {

struct SplitOptions {
    // When false every record is its own group (naive record-level splitting,
    // which lets augmented copies of one root land on both sides).
    bool group_by_provenance = true;
};

/// Per-record side: true = train. Groups are assigned whole.
std::vector<bool> stratified_assignment(const std::vector<PatchRecord>& records,
                                        double train_fraction, std::uint64_t seed,
                                        const SplitOptions& options = {});

/// Stratified train/holdout split with largest-remainder rounding of per-class
/// group counts. Train records are tagged `train`, holdout records `test`.
/// Both outputs keep input order.
std::pair<DatasetManifest, DatasetManifest> stratified_split(const DatasetManifest& manifest,
                                                             double train_fraction,
                                                             std::uint64_t seed,
                                                             const SplitOptions& options = {});

/// Per-record fold index in [0, k).
std::vector<int> kfold_assignment(const std::vector<PatchRecord>& records, int k,
                                  std::uint64_t seed, const SplitOptions& options = {});

/// k stratified, pairwise-disjoint folds covering the input. Per-class group
/// counts across folds differ by at most one.
std::vector<DatasetManifest> kfold_partition(const DatasetManifest& manifest, int k,
                                             std::uint64_t seed,
                                             const SplitOptions& options = {});

}  // namespace tipscan
