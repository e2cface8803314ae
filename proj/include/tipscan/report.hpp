#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tipscan/metrics.hpp"
#include "tipscan/protocols.hpp"

namespace tipscan {

enum class ReportFormat { json, md, csv };

std::optional<ReportFormat> parse_format(std::string_view text);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const AveragedReport& report);
nlohmann::json to_json(const std::vector<ComparisonRow>& rows);

/// Inverse of to_json(MetricsReport). Recomputes every ratio from the stored
/// matrix when one is present; otherwise takes accuracy and mcc as given.
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Top-level JSON document: {"tool_version": ..., "kind": kind, "report": body}.
nlohmann::json envelope(std::string_view kind, nlohmann::json body);

/// Single method, in the per-dataset layout (Dataset, #samples, metrics).
std::string render(const MetricsReport& report, ReportFormat format, std::string_view label,
                   std::size_t samples);

/// One row per validation method plus an averaged column.
std::string render(const AveragedReport& report, ReportFormat format, std::string_view label,
                   std::size_t samples);

/// Model | Accuracy | F-Score | MCC, "N/A" for failed rows.
std::string render(const std::vector<ComparisonRow>& rows, ReportFormat format);

/// Pads cells so columns align.
std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows);

}  // namespace tipscan
