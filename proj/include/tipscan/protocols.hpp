#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tipscan/metrics.hpp"
#include "tipscan/split.hpp"
#include "tipscan/training.hpp"

namespace tipscan {

struct EvalOptions {
    SplitOptions split;
    // Concurrent fold trainings. Results do not depend on it.
    int jobs = 1;
    // test_eval: accept a test set that shares provenance with the training set.
    bool allow_overlap = false;
};

/// k-fold cross-validation pooled into one confusion matrix. Fold i trains
/// with seed config.seed + i; partition uses config.seed.
MetricsReport cross_validate(const NetworkSpec& spec, const DatasetManifest& dataset, int k,
                             const TrainConfig& config, const EvalOptions& options = {});

/// Same, on already prepared inputs (`records` supply labels and provenance).
MetricsReport cross_validate(const NetworkSpec& spec, const TrainingData& data,
                             const std::vector<PatchRecord>& records, int k,
                             const TrainConfig& config, const EvalOptions& options = {});

/// Train on the stratified train side, score the holdout side.
MetricsReport split_eval(const NetworkSpec& spec, const DatasetManifest& dataset,
                         double train_fraction, const TrainConfig& config,
                         const EvalOptions& options = {});

/// Scores a trained model. When `training_set` is given, any shared
/// provenance_id raises LeakageError unless options.allow_overlap.
MetricsReport test_eval(const NetworkSpec& spec, const ModelParams& model,
                        const DatasetManifest& test_set,
                        const DatasetManifest* training_set = nullptr,
                        const EvalOptions& options = {});

/// Throws LeakageError naming the first test record provenance also present in training.
void check_disjoint(const DatasetManifest& training_set, const DatasetManifest& test_set);

struct ComparisonRow {
    std::string model;
    std::optional<MetricsReport> report;  // empty when training diverged
    std::string failure;
};

/// Cross-validates every spec on identical folds. Rows sorted by MCC
/// descending, failed rows last, ties in input order.
std::vector<ComparisonRow> compare_models(const std::vector<NetworkSpec>& specs,
                                          const DatasetManifest& dataset, int k,
                                          const TrainConfig& config,
                                          const EvalOptions& options = {});

}  // namespace tipscan
