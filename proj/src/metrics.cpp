#include "tipscan/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "tipscan/error.hpp"

namespace tipscan {

ConfusionMatrix confusion(std::span<const PatchLabel> predictions,
                          std::span<const PatchLabel> truth) {
    if (predictions.size() != truth.size()) {
        throw Error("prediction count " + std::to_string(predictions.size()) +
                    " differs from truth count " + std::to_string(truth.size()));
    }
    if (predictions.empty()) throw Error("confusion matrix of an empty list");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pred_pos = predictions[i] == PatchLabel::garbage;
        const bool true_pos = truth[i] == PatchLabel::garbage;
        if (pred_pos) {
            ++(true_pos ? cm.tp : cm.fp);
        } else {
            ++(true_pos ? cm.fn : cm.tn);
        }
    }
    return cm;
}

namespace {
double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error("metrics of an empty confusion matrix");
    const auto tp = static_cast<double>(cm.tp);
    const auto tn = static_cast<double>(cm.tn);
    const auto fp = static_cast<double>(cm.fp);
    const auto fn = static_cast<double>(cm.fn);
    MetricsReport r;
    r.matrix = cm;
    r.accuracy = (tp + tn) / static_cast<double>(cm.total());
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.fscore = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    r.mcc = den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
    return r;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return buf;
}

std::string format_mcc(double mcc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", mcc);
    return buf;
}

AveragedReport averaged_report(const MethodScore& crossfold, const MethodScore& split,
                               const MethodScore& test, const PrintedAverages& printed) {
    AveragedReport out;
    out.methods = {crossfold, split, test};
    out.averaged_accuracy = (crossfold.accuracy + split.accuracy + test.accuracy) / 3.0;
    out.averaged_mcc = (crossfold.mcc + split.mcc + test.mcc) / 3.0;
    if (printed.accuracy_percent) {
        const auto shown = format_percent(*printed.accuracy_percent / 100.0);
        const auto computed = format_percent(out.averaged_accuracy);
        if (shown != computed) out.discrepancies.push_back({"accuracy", shown, computed});
    }
    if (printed.mcc) {
        const auto shown = format_mcc(*printed.mcc);
        const auto computed = format_mcc(out.averaged_mcc);
        if (shown != computed) out.discrepancies.push_back({"mcc", shown, computed});
    }
    return out;
}

AveragedReport averaged_report(const MetricsReport& crossfold, const MetricsReport& split,
                               const MetricsReport& test, const PrintedAverages& printed) {
    return averaged_report(MethodScore{"crossfold", crossfold.accuracy, crossfold.mcc, crossfold},
                           MethodScore{"split", split.accuracy, split.mcc, split},
                           MethodScore{"test", test.accuracy, test.mcc, test}, printed);
}

}  // namespace tipscan
