#pragma once

#include <string>
#include <utility>
#include <vector>

#include "matclip/dataset.hpp"
#include "matclip/encoder.hpp"
#include "matclip/trainer.hpp"

namespace matclip {

// Immutable exhaustive cosine index over unit-norm embeddings.
struct MaterialIndex {
    std::vector<std::string> ids;
    Mat<float> matrix;  // N x D_emb
};

struct RankEntry {
    std::string id;
    float score;
};

struct MetricsRow {
    std::string method;
    double top1_percent = 0.0;
    double top5_percent = 0.0;
    std::size_t samples = 0;
};

enum class BaselineMode { kV1Max, kV2Mean };

MaterialIndex build_index(const std::vector<std::pair<std::string, std::vector<float>>>& pairs);

// Exhaustive descending-score ranking; ties broken by ascending material id.
// Returns min(k, N) entries.
std::vector<RankEntry> rank(const MaterialIndex& index, const std::vector<float>& query, int k);

double topk_accuracy(const std::vector<std::vector<RankEntry>>& rankings,
                     const std::vector<std::string>& truths, int k);

// v1: max cosine over the view rows; v2: mean cosine.
float baseline_score(const std::vector<float>& part_desc, const MaterialViewSet& viewset,
                     BaselineMode mode);

// Ranks every part of the chosen split against all materials in the dataset.
MetricsRow evaluate_matclip(const EncoderParams& params, const Dataset& dataset, Split split);
MetricsRow evaluate_baseline(BaselineMode mode, const Dataset& dataset, Split split);

struct AblationRow {
    std::string label;
    double top1_percent = 0.0;
};

// Retrains on view grids restricted to the leading (shape_count, env_count)
// cells and reports test Top-1 per subset.
std::vector<AblationRow> ablate(const TrainConfig& train_config, const ModelConfig& model_config,
                                const Dataset& dataset,
                                const std::vector<std::pair<int, int>>& subsets);

std::string ablation_label(const Dataset& dataset, int shape_count, int env_count);

}  // namespace matclip
