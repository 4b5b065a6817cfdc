#include "matclip/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "matclip/errors.hpp"
#include "matclip/io.hpp"

namespace matclip {

namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::string buf = "method,top1_percent,top5_percent,samples\n";
    for (const auto& r : rows) {
        buf += r.method + "," + fmt2(r.top1_percent) + "," + fmt2(r.top5_percent) + "," +
               std::to_string(r.samples) + "\n";
    }
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "method,top1_percent,top5_percent,samples")
        throw SchemaError(path + ": not a metrics CSV");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) throw SchemaError(path + ": malformed row '" + line + "'");
        MetricsRow row;
        row.method = fields[0];
        try {
            row.top1_percent = std::stod(fields[1]);
            row.top5_percent = std::stod(fields[2]);
            row.samples = static_cast<std::size_t>(std::stoull(fields[3]));
        } catch (const std::exception&) {
            throw SchemaError(path + ": malformed row '" + line + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string metrics_markdown(
    const std::vector<std::pair<std::string, std::vector<MetricsRow>>>& conditions) {
    // union of methods, first-seen order
    std::vector<std::string> methods;
    for (const auto& [label, rows] : conditions) {
        for (const auto& r : rows) {
            bool known = false;
            for (const auto& m : methods) known |= (m == r.method);
            if (!known) methods.push_back(r.method);
        }
    }

    std::string out = "| Method |";
    std::string rule = "|---|";
    for (const auto& [label, rows] : conditions) {
        out += " " + label + " T-1 [%] | " + label + " T-5 [%] |";
        rule += "---:|---:|";
    }
    out += "\n" + rule + "\n";

    for (const auto& method : methods) {
        out += "| " + method + " |";
        for (const auto& [label, rows] : conditions) {
            const MetricsRow* found = nullptr;
            for (const auto& r : rows)
                if (r.method == method) found = &r;
            if (found)
                out += " " + fmt2(found->top1_percent) + " | " + fmt2(found->top5_percent) + " |";
            else
                out += " - | - |";
        }
        out += "\n";
    }
    return out;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::string buf = "label,top1_percent\n";
    for (const auto& r : rows) buf += r.label + "," + fmt2(r.top1_percent) + "\n";
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
    std::string out = "| Model Name | Val. Acc. [%] |\n|---|---:|\n";
    for (const auto& r : rows) out += "| " + r.label + " | " + fmt2(r.top1_percent) + " |\n";
    return out;
}

void write_history_csv(const std::string& path,
                       const std::vector<std::pair<std::uint32_t, float>>& history) {
    std::string buf = "step,loss\n";
    char num[48];
    for (const auto& [step, loss] : history) {
        std::snprintf(num, sizeof(num), "%u,%.9g\n", step, static_cast<double>(loss));
        buf += num;
    }
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

}  // namespace matclip
