#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tipscan/patch.hpp"

namespace tipscan {

/// Binary confusion counts; garbage is the positive class.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const PatchLabel> predictions, std::span<const PatchLabel> truth);

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double fscore = 0.0;
    double mcc = 0.0;
    ConfusionMatrix matrix;
};

/// accuracy, precision, recall, F-score and Matthews correlation. A ratio
/// whose denominator is zero is reported as 0.
MetricsReport metrics(const ConfusionMatrix& cm);

/// Accuracy and MCC of one validation method.
struct MethodScore {
    std::string method;
    double accuracy = 0.0;  // fraction in [0, 1]
    double mcc = 0.0;
    std::optional<MetricsReport> report;
};

/// Values a published table printed for the averaged column, for comparison.
struct PrintedAverages {
    std::optional<double> accuracy_percent;
    std::optional<double> mcc;
};

struct Discrepancy {
    std::string field;      // "accuracy" or "mcc"
    std::string printed;    // as displayed, 2 decimals
    std::string computed;   // as displayed, 2 decimals
};

struct AveragedReport {
    std::vector<MethodScore> methods;  // crossfold, split, test
    double averaged_accuracy = 0.0;
    double averaged_mcc = 0.0;
    std::vector<Discrepancy> discrepancies;
};

AveragedReport averaged_report(const MetricsReport& crossfold, const MetricsReport& split,
                               const MetricsReport& test, const PrintedAverages& printed = {});

/// Arithmetic means of the three scores. Any printed average whose 2-decimal
/// display differs from the computed one is listed as a discrepancy.
AveragedReport averaged_report(const MethodScore& crossfold, const MethodScore& split,
                               const MethodScore& test, const PrintedAverages& printed = {});

/// "91.03" for 0.910333.
std::string format_percent(double fraction);
/// "0.84" for 0.8367.
std::string format_mcc(double mcc);

}  // namespace tipscan
