#include "tipscan/protocols.hpp"

#include <algorithm>
#include <unordered_set>

#include "tipscan/error.hpp"
#include "tipscan/parallel.hpp"

namespace tipscan {

namespace {

std::vector<PatchLabel> predicted_labels(const std::vector<Prediction>& preds) {
    std::vector<PatchLabel> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(p.label);
    return out;
}

}  // namespace

MetricsReport cross_validate(const NetworkSpec& spec, const TrainingData& data,
                             const std::vector<PatchRecord>& records, int k,
                             const TrainConfig& config, const EvalOptions& options) {
    if (records.size() != data.size()) {
        throw Error("record count does not match prepared inputs");
    }
    const auto fold = kfold_assignment(records, k, config.seed, options.split);
    std::vector<ConfusionMatrix> per_fold(k);
    parallel_for(static_cast<std::size_t>(k), options.jobs, [&](std::size_t f) {
        std::vector<std::size_t> train_idx;
        std::vector<std::size_t> held_idx;
        for (std::size_t i = 0; i < records.size(); ++i) {
            (fold[i] == static_cast<int>(f) ? held_idx : train_idx).push_back(i);
        }
        TrainConfig fold_config = config;
        fold_config.seed = config.seed + f;
        const auto trained = train_on(spec, data, train_idx, fold_config);
        const auto preds = predict_batch(spec, trained.model, data, held_idx);
        std::vector<PatchLabel> truth;
        for (auto i : held_idx) truth.push_back(records[i].label);
        per_fold[f] = confusion(predicted_labels(preds), truth);
    });
    ConfusionMatrix pooled;
    for (const auto& cm : per_fold) pooled += cm;
    return metrics(pooled);
}

MetricsReport cross_validate(const NetworkSpec& spec, const DatasetManifest& dataset, int k,
                             const TrainConfig& config, const EvalOptions& options) {
    config.validate();
    // Fail on an impossible partition before paying for decoding.
    kfold_assignment(dataset.records, k, config.seed, options.split);
    const auto data = prepare_inputs(dataset, config.input_side, options.jobs);
    return cross_validate(spec, data, dataset.records, k, config, options);
}

MetricsReport split_eval(const NetworkSpec& spec, const DatasetManifest& dataset,
                         double train_fraction, const TrainConfig& config,
                         const EvalOptions& options) {
    config.validate();
    const auto side = stratified_assignment(dataset.records, train_fraction, config.seed,
                                            options.split);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> held_idx;
    for (std::size_t i = 0; i < side.size(); ++i) (side[i] ? train_idx : held_idx).push_back(i);
    if (held_idx.empty()) throw Error("split leaves no holdout records");
    const auto data = prepare_inputs(dataset, config.input_side, options.jobs);
    const auto trained = train_on(spec, data, train_idx, config);
    const auto preds = predict_batch(spec, trained.model, data, held_idx);
    std::vector<PatchLabel> truth;
    for (auto i : held_idx) truth.push_back(dataset.records[i].label);
    return metrics(confusion(predicted_labels(preds), truth));
}

void check_disjoint(const DatasetManifest& training_set, const DatasetManifest& test_set) {
    std::unordered_set<std::string_view> seen;
    for (const auto& r : training_set.records) seen.insert(r.provenance_id);
    for (const auto& r : test_set.records) {
        if (seen.contains(r.provenance_id)) {
            throw LeakageError("data leakage: provenance '" + r.provenance_id +
                                   "' appears in both training and test sets",
                               r.provenance_id);
        }
    }
}

MetricsReport test_eval(const NetworkSpec& spec, const ModelParams& model,
                        const DatasetManifest& test_set, const DatasetManifest* training_set,
                        const EvalOptions& options) {
    if (test_set.empty()) throw Error("test set is empty");
    if (training_set && !options.allow_overlap) check_disjoint(*training_set, test_set);
    const auto data = prepare_inputs(test_set, spec.input.h, options.jobs);
    std::vector<std::size_t> all(test_set.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto preds = predict_batch(spec, model, data, all);
    std::vector<PatchLabel> truth;
    for (const auto& r : test_set.records) truth.push_back(r.label);
    return metrics(confusion(predicted_labels(preds), truth));
}

std::vector<ComparisonRow> compare_models(const std::vector<NetworkSpec>& specs,
                                          const DatasetManifest& dataset, int k,
                                          const TrainConfig& config, const EvalOptions& options) {
    if (specs.empty()) throw Error("no models to compare");
    config.validate();
    kfold_assignment(dataset.records, k, config.seed, options.split);
    const auto data = prepare_inputs(dataset, config.input_side, options.jobs);
    std::vector<ComparisonRow> rows;
    for (const auto& spec : specs) {
        ComparisonRow row;
        row.model = spec.name;
        try {
            row.report = cross_validate(spec, data, dataset.records, k, config, options);
        } catch (const DivergenceError& e) {
            row.failure = e.what();
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.report.has_value() != b.report.has_value()) return a.report.has_value();
        if (!a.report) return false;
        return a.report->mcc > b.report->mcc;
    });
    return rows;
}

}  // namespace tipscan
