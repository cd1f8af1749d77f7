#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskpipe/metrics.hpp"

namespace riskpipe {

// Acc renders as an integer percent in the combined-result tables and
// with two decimals in the per-encoder tables; F1 always carries two
// decimals. Undefined metrics render "-".
enum class AccPrecision { IntegerPercent, TwoDecimals };

struct MethodResults {
    std::string method;
    std::map<TaskKind, MetricsResult> per_task;
    std::optional<MetricsResult> combined;
};

struct RenderedReport {
    std::string text_table;
    std::string csv;  // machine-readable twin, full precision
};

std::string format_acc_cell(double acc, AccPrecision precision);
std::string format_f1_cell(const std::optional<double>& f1_value);

RenderedReport render_report(const std::vector<MethodResults>& results, const std::string& title,
                             AccPrecision acc_precision);

// Writes <output_dir>/<experiment_id>__<split>.report.txt and .csv.
void write_report(const RenderedReport& report, const std::filesystem::path& output_dir,
                  const std::string& experiment_id, const std::string& split_name);

struct ReportCsvRow {
    std::string method;
    std::string task;  // "ER", "PR", "ED" or "combined"
    MetricsResult metrics;
};

std::vector<ReportCsvRow> parse_report_csv(const std::string& csv_text);

}  // namespace riskpipe
