#pragma once

#include <string>
#include <utility>
#include <vector>

#include "matclip/retrieval.hpp"

namespace matclip {

// Metrics CSV: header "method,top1_percent,top5_percent,samples".
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// One column pair (T-1, T-5) per labeled condition, methods as rows.
std::string metrics_markdown(
    const std::vector<std::pair<std::string, std::vector<MetricsRow>>>& conditions);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

// History CSV: header "step,loss".
void write_history_csv(const std::string& path,
                       const std::vector<std::pair<std::uint32_t, float>>& history);

}  // namespace matclip
