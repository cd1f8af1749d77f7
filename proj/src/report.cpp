#include "riskpipe/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "riskpipe/errors.hpp"

namespace riskpipe {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string format_acc_cell(double acc, AccPrecision precision) {
    char buf[32];
    if (precision == AccPrecision::IntegerPercent)
        std::snprintf(buf, sizeof(buf), "%ld", std::lround(acc * 100.0));
    else
        std::snprintf(buf, sizeof(buf), "%.2f", acc * 100.0);
    return buf;
}

std::string format_f1_cell(const std::optional<double>& f1_value) {
    if (!f1_value) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *f1_value * 100.0);
    return buf;
}

RenderedReport render_report(const std::vector<MethodResults>& results, const std::string& title,
                             AccPrecision acc_precision) {
    std::vector<std::string> headers = {"Method"};
    for (TaskKind task : kAllTasks) {
        headers.push_back(to_string(task) + " Acc");
        headers.push_back(to_string(task) + " F1");
    }
    headers.push_back("Combined Acc");
    headers.push_back("Combined F1");

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : results) {
        std::vector<std::string> row = {r.method};
        for (TaskKind task : kAllTasks) {
            auto it = r.per_task.find(task);
            if (it == r.per_task.end()) {
                row.push_back("-");
                row.push_back("-");
            } else {
                row.push_back(format_acc_cell(it->second.acc, acc_precision));
                row.push_back(format_f1_cell(it->second.f1));
            }
        }
        if (r.combined) {
            row.push_back(format_acc_cell(r.combined->acc, acc_precision));
            row.push_back(format_f1_cell(r.combined->f1));
        } else {
            row.push_back("-");
            row.push_back("-");
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
    }

    auto emit_row = [&](const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) line += " | ";
            line += cells[c];
            line.append(widths[c] - cells[c].size(), ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        return line + "\n";
    };

    RenderedReport out;
    out.text_table = title + "\n";
    out.text_table += emit_row(headers);
    std::size_t rule_len = 0;
    for (std::size_t c = 0; c < widths.size(); ++c) rule_len += widths[c] + (c > 0 ? 3 : 0);
    out.text_table += std::string(rule_len, '-') + "\n";
    for (const auto& row : rows) out.text_table += emit_row(row);

    out.csv = "method,task,n,tp,tn,fp,fn,acc,f1\n";
    auto emit_csv = [&](const std::string& method, const std::string& task,
                        const MetricsResult& m) {
        out.csv += method + "," + task + "," + std::to_string(m.n) + "," +
                   std::to_string(m.counts.tp) + "," + std::to_string(m.counts.tn) + "," +
                   std::to_string(m.counts.fp) + "," + std::to_string(m.counts.fn) + "," +
                   format_double(m.acc) + "," + (m.f1 ? format_double(*m.f1) : "") + "\n";
    };
    for (const auto& r : results) {
        for (TaskKind task : kAllTasks) {
            auto it = r.per_task.find(task);
            if (it != r.per_task.end()) emit_csv(r.method, to_string(task), it->second);
        }
        if (r.combined) emit_csv(r.method, "combined", *r.combined);
    }
    return out;
}

void write_report(const RenderedReport& report, const std::filesystem::path& output_dir,
                  const std::string& experiment_id, const std::string& split_name) {
    std::filesystem::create_directories(output_dir);
    const std::string stem = experiment_id + "__" + split_name + ".report";
    std::ofstream txt(output_dir / (stem + ".txt"), std::ios::binary | std::ios::trunc);
    std::ofstream csv(output_dir / (stem + ".csv"), std::ios::binary | std::ios::trunc);
    if (!txt || !csv) throw Error("cannot write report files under " + output_dir.string());
    txt << report.text_table;
    csv << report.csv;
}

std::vector<ReportCsvRow> parse_report_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line) || line != "method,task,n,tp,tn,fp,fn,acc,f1")
        throw ValidationError("bad report csv header");

    std::vector<ReportCsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() == 8) cells.push_back("");  // trailing empty f1
        if (cells.size() != 9) throw ValidationError("bad report csv row: " + line);
        ReportCsvRow r;
        r.method = cells[0];
        r.task = cells[1];
        r.metrics.n = std::stol(cells[2]);
        r.metrics.counts.tp = std::stol(cells[3]);
        r.metrics.counts.tn = std::stol(cells[4]);
        r.metrics.counts.fp = std::stol(cells[5]);
        r.metrics.counts.fn = std::stol(cells[6]);
        r.metrics.acc = std::stod(cells[7]);
        if (!cells[8].empty()) r.metrics.f1 = std::stod(cells[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace riskpipe
