#include "tipscan/split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <unordered_map>

#include "tipscan/error.hpp"
#include "tipscan/rng.hpp"

namespace tipscan {

namespace {

// Record indices of each group, groups in first-appearance order, bucketed by class.
using ClassGroups = std::array<std::vector<std::vector<std::size_t>>, kNumClasses>;

ClassGroups group_by_class(const std::vector<PatchRecord>& records, const SplitOptions& options) {
    ClassGroups out;
    std::unordered_map<std::string_view, std::pair<int, std::size_t>> where;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const int cls = class_index(r.label);
        if (!options.group_by_provenance) {
            out[cls].push_back({i});
            continue;
        }
        auto it = where.find(r.provenance_id);
        if (it == where.end()) {
            where.emplace(r.provenance_id, std::pair{cls, out[cls].size()});
            out[cls].push_back({i});
        } else {
            if (it->second.first != cls) {
                throw Error("provenance group '" + r.provenance_id + "' mixes labels");
            }
            out[cls][it->second.second].push_back(i);
        }
    }
    return out;
}

std::uint64_t class_seed(std::uint64_t seed, std::string_view purpose, int cls) {
    return derive_seed(seed, std::string(purpose) + "/" + std::to_string(cls));
}

}  // namespace

std::vector<bool> stratified_assignment(const std::vector<PatchRecord>& records,
                                        double train_fraction, std::uint64_t seed,
                                        const SplitOptions& options) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error("train fraction must lie in (0, 1), got " + std::to_string(train_fraction));
    }
    const auto groups = group_by_class(records, options);
    for (int c = 0; c < kNumClasses; ++c) {
        if (groups[c].empty()) {
            throw Error("class " + std::string(to_string(static_cast<PatchLabel>(c))) +
                        " has no records");
        }
    }

    // Largest-remainder (Hamilton) allocation of the rounded total across classes.
    std::array<double, kNumClasses> quota{};
    std::array<std::size_t, kNumClasses> take{};
    double quota_sum = 0.0;
    std::size_t allocated = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        quota[c] = train_fraction * static_cast<double>(groups[c].size());
        quota_sum += quota[c];
        // The epsilon absorbs representation error such as 0.7 * 50 = 34.99999...
        take[c] = static_cast<std::size_t>(std::floor(quota[c] + 1e-9));
        allocated += take[c];
    }
    const auto target = static_cast<std::size_t>(std::floor(quota_sum + 0.5 + 1e-9));
    std::array<int, kNumClasses> by_remainder{};
    for (int c = 0; c < kNumClasses; ++c) by_remainder[c] = c;
    std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](int a, int b) {
        return quota[a] - static_cast<double>(take[a]) > quota[b] - static_cast<double>(take[b]);
    });
    for (int i = 0; allocated < target && i < kNumClasses; ++i) {
        const int c = by_remainder[i];
        if (take[c] < groups[c].size()) {
            ++take[c];
            ++allocated;
        }
    }
    for (int c = 0; c < kNumClasses; ++c) {
        // A singleton class cannot be on both sides; only a class that could have
        // been split is required to contribute training data.
        if (take[c] == 0 && groups[c].size() > 1) {
            throw Error("class " + std::string(to_string(static_cast<PatchLabel>(c))) +
                        " would receive 0 training records at fraction " +
                        std::to_string(train_fraction));
        }
    }

    std::vector<bool> train(records.size(), false);
    for (int c = 0; c < kNumClasses; ++c) {
        const auto order = seeded_permutation(groups[c].size(), class_seed(seed, "split", c));
        for (std::size_t i = 0; i < take[c]; ++i) {
            for (std::size_t rec : groups[c][order[i]]) train[rec] = true;
        }
    }
    return train;
}

std::pair<DatasetManifest, DatasetManifest> stratified_split(const DatasetManifest& manifest,
                                                             double train_fraction,
                                                             std::uint64_t seed,
                                                             const SplitOptions& options) {
    const auto side = stratified_assignment(manifest.records, train_fraction, seed, options);
    std::vector<PatchRecord> train;
    std::vector<PatchRecord> holdout;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        PatchRecord rec = manifest.records[i];
        rec.split = side[i] ? SplitTag::train : SplitTag::test;
        (side[i] ? train : holdout).push_back(std::move(rec));
    }
    return {manifest.with_records(std::move(train)), manifest.with_records(std::move(holdout))};
}

std::vector<int> kfold_assignment(const std::vector<PatchRecord>& records, int k,
                                  std::uint64_t seed, const SplitOptions& options) {
    if (k < 2) {
        throw Error("k-fold partition needs k >= 2, got " + std::to_string(k));
    }
    const auto groups = group_by_class(records, options);
    for (int c = 0; c < kNumClasses; ++c) {
        if (groups[c].size() < static_cast<std::size_t>(k)) {
            throw Error("class " + std::string(to_string(static_cast<PatchLabel>(c))) + " has " +
                        std::to_string(groups[c].size()) + " groups, fewer than k = " +
                        std::to_string(k));
        }
    }
    std::vector<int> fold(records.size(), -1);
    // Round-robin dealing continues across classes so total fold sizes also balance.
    std::size_t dealt = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto order = seeded_permutation(groups[c].size(), class_seed(seed, "kfold", c));
        for (std::size_t g : order) {
            const int f = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
            for (std::size_t rec : groups[c][g]) fold[rec] = f;
        }
    }
    return fold;
}

std::vector<DatasetManifest> kfold_partition(const DatasetManifest& manifest, int k,
                                             std::uint64_t seed, const SplitOptions& options) {
    const auto fold = kfold_assignment(manifest.records, k, seed, options);
    std::vector<std::vector<PatchRecord>> buckets(k);
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        buckets[fold[i]].push_back(manifest.records[i]);
    }
    std::vector<DatasetManifest> out;
    out.reserve(k);
    for (auto& b : buckets) out.push_back(manifest.with_records(std::move(b)));
    return out;
}

}  // namespace tipscan
