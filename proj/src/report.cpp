#include "tipscan/report.hpp"

#include <algorithm>
#include <sstream>

#include "tipscan/error.hpp"
#include "tipscan/version.hpp"

namespace tipscan {

using nlohmann::json;

std::optional<ReportFormat> parse_format(std::string_view text) {
    if (text == "json") return ReportFormat::json;
    if (text == "md") return ReportFormat::md;
    if (text == "csv") return ReportFormat::csv;
    return std::nullopt;
}

json to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
}

json to_json(const MetricsReport& r) {
    return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
            {"fscore", r.fscore},     {"mcc", r.mcc},             {"matrix", to_json(r.matrix)}};
}

json to_json(const AveragedReport& r) {
    json methods = json::array();
    for (const auto& m : r.methods) {
        json entry = {{"method", m.method}, {"accuracy", m.accuracy}, {"mcc", m.mcc}};
        if (m.report) entry["report"] = to_json(*m.report);
        methods.push_back(std::move(entry));
    }
    json discrepancies = json::array();
    for (const auto& d : r.discrepancies) {
        discrepancies.push_back(
            {{"field", d.field}, {"printed", d.printed}, {"computed", d.computed}});
    }
    return {{"methods", methods},
            {"averaged_accuracy", r.averaged_accuracy},
            {"averaged_mcc", r.averaged_mcc},
            {"display", {{"accuracy", format_percent(r.averaged_accuracy)},
                         {"mcc", format_mcc(r.averaged_mcc)}}},
            {"discrepancy", !r.discrepancies.empty()},
            {"discrepancies", discrepancies}};
}

json to_json(const std::vector<ComparisonRow>& rows) {
    json out = json::array();
    for (const auto& row : rows) {
        json j = {{"model", row.model}};
        if (row.report) {
            j["accuracy"] = row.report->accuracy;
            j["fscore"] = row.report->fscore;
            j["mcc"] = row.report->mcc;
            j["report"] = to_json(*row.report);
        } else {
            j["accuracy"] = nullptr;
            j["fscore"] = nullptr;
            j["mcc"] = nullptr;
            j["failure"] = row.failure;
        }
        out.push_back(std::move(j));
    }
    return out;
}

MetricsReport metrics_from_json(const json& j) {
    try {
        if (j.contains("matrix")) {
            const auto& m = j.at("matrix");
            ConfusionMatrix cm{m.at("tp").get<std::uint64_t>(), m.at("tn").get<std::uint64_t>(),
                               m.at("fp").get<std::uint64_t>(), m.at("fn").get<std::uint64_t>()};
            return metrics(cm);
        }
        MetricsReport r;
        r.accuracy = j.at("accuracy").get<double>();
        r.mcc = j.at("mcc").get<double>();
        r.precision = j.value("precision", 0.0);
        r.recall = j.value("recall", 0.0);
        r.fscore = j.value("fscore", 0.0);
        return r;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed metrics report: ") + e.what());
    }
}

json envelope(std::string_view kind, json body) {
    return {{"tool_version", kToolVersion}, {"kind", kind}, {"report", std::move(body)}};
}

std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        out << '|';
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            out << ' ' << cell << std::string(width[c] - cell.size(), ' ') << " |";
        }
        out << '\n';
    };
    line(header);
    out << '|';
    for (auto w : width) out << std::string(w + 2, '-') << '|';
    out << '\n';
    for (const auto& row : rows) line(row);
    return out.str();
}

namespace {

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
        out << '\n';
    };
    line(header);
    for (const auto& row : rows) line(row);
    return out.str();
}

std::string table(ReportFormat format, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
    return format == ReportFormat::csv ? csv_table(header, rows) : markdown_table(header, rows);
}

}  // namespace

std::string render(const MetricsReport& r, ReportFormat format, std::string_view label,
                   std::size_t samples) {
    if (format == ReportFormat::json) {
        json body = to_json(r);
        body["dataset"] = label;
        body["samples"] = samples;
        return envelope("metrics", body).dump(2) + "\n";
    }
    return table(format, {"Dataset", "#samples", "Accuracy", "Precision", "Recall", "F-Score", "MCC"},
                 {{std::string(label), std::to_string(samples), format_percent(r.accuracy),
                   format_percent(r.precision), format_percent(r.recall), format_percent(r.fscore),
                   format_mcc(r.mcc)}});
}

std::string render(const AveragedReport& r, ReportFormat format, std::string_view label,
                   std::size_t samples) {
    if (format == ReportFormat::json) {
        json body = to_json(r);
        body["dataset"] = label;
        body["samples"] = samples;
        return envelope("averaged", body).dump(2) + "\n";
    }
    std::vector<std::string> header = {"Dataset", "#samples"};
    std::vector<std::string> row = {std::string(label), std::to_string(samples)};
    for (const auto& m : r.methods) {
        header.push_back(m.method + " Acc");
        header.push_back(m.method + " MCC");
        row.push_back(format_percent(m.accuracy));
        row.push_back(format_mcc(m.mcc));
    }
    header.push_back("Averaged Acc");
    header.push_back("Averaged MCC");
    row.push_back(format_percent(r.averaged_accuracy));
    row.push_back(format_mcc(r.averaged_mcc));
    std::string out = table(format, header, {row});
    if (format == ReportFormat::md) {
        for (const auto& d : r.discrepancies) {
            out += "\nNote: printed averaged " + d.field + " " + d.printed +
                   " differs from the computed mean " + d.computed + ".\n";
        }
    }
    return out;
}

std::string render(const std::vector<ComparisonRow>& rows, ReportFormat format) {
    if (format == ReportFormat::json) {
        return envelope("comparison", to_json(rows)).dump(2) + "\n";
    }
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        if (row.report) {
            cells.push_back({row.model, format_percent(row.report->accuracy),
                             format_percent(row.report->fscore), format_mcc(row.report->mcc)});
        } else {
            cells.push_back({row.model, "N/A", "N/A", "N/A"});
        }
    }
    return table(format, {"Model", "Accuracy", "F-Score", "MCC"}, cells);
}

}  // namespace tipscan
