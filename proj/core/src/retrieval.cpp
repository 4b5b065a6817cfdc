#include "matclip/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "matclip/errors.hpp"

namespace matclip {

namespace {

constexpr double kUnitNormTol = 1e-5;

void check_unit(const float* v, int n, const std::string& what) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) ss += static_cast<double>(v[i]) * v[i];
    if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTol)
        throw NonUnitNorm(what + " is not unit norm");
}

double cosine_ptr(const float* a, const float* b, int n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < n; ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na <= 1e-24 || nb <= 1e-24) throw ZeroVector("cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// shared tie rule: descending score, then ascending id
struct Scored {
    float score;
    int idx;
};

std::vector<RankEntry> sort_and_take(std::vector<Scored> scored,
                                     const std::vector<std::string>& ids, int k) {
    std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return ids[static_cast<std::size_t>(a.idx)] < ids[static_cast<std::size_t>(b.idx)];
    });
    const int take = std::min<int>(k, static_cast<int>(scored.size()));
    std::vector<RankEntry> out;
    out.reserve(static_cast<std::size_t>(take));
    for (int i = 0; i < take; ++i)
        out.push_back({ids[static_cast<std::size_t>(scored[static_cast<std::size_t>(i)].idx)],
                       scored[static_cast<std::size_t>(i)].score});
    return out;
}

}  // namespace

MaterialIndex build_index(const std::vector<std::pair<std::string, std::vector<float>>>& pairs) {
    if (pairs.empty()) throw DimensionMismatch("cannot build an empty index");
    const int dim = static_cast<int>(pairs.front().second.size());
    MaterialIndex index;
    index.matrix = Mat<float>(static_cast<int>(pairs.size()), dim);
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [id, emb] = pairs[i];
        if (!seen.insert(id).second) throw DuplicateId("duplicate material id: " + id);
        if (static_cast<int>(emb.size()) != dim)
            throw DimensionMismatch("embedding dimension mismatch for " + id);
        check_unit(emb.data(), dim, "embedding " + id);
        index.ids.push_back(id);
        std::copy(emb.begin(), emb.end(), index.matrix.row(static_cast<int>(i)));
    }
    return index;
}

std::vector<RankEntry> rank(const MaterialIndex& index, const std::vector<float>& query, int k) {
    if (k < 1) throw InvalidConfig("k must be >= 1");
    if (static_cast<int>(query.size()) != index.matrix.cols)
        throw DimensionMismatch("query dimension does not match index");
    check_unit(query.data(), index.matrix.cols, "query");

    // canonical sequential f64 accumulation so a linear-scan oracle can
    // reproduce scores bit-for-bit
    std::vector<Scored> scored(static_cast<std::size_t>(index.matrix.rows));
    for (int i = 0; i < index.matrix.rows; ++i) {
        const float* row = index.matrix.row(i);
        double s = 0.0;
        for (int j = 0; j < index.matrix.cols; ++j)
            s += static_cast<double>(row[j]) * query[static_cast<std::size_t>(j)];
        scored[static_cast<std::size_t>(i)] = {static_cast<float>(s), i};
    }
    return sort_and_take(std::move(scored), index.ids, k);
}

double topk_accuracy(const std::vector<std::vector<RankEntry>>& rankings,
                     const std::vector<std::string>& truths, int k) {
    if (rankings.size() != truths.size() || rankings.empty())
        throw DimensionMismatch("rankings and truths must have equal nonzero length");
    std::size_t hits = 0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        const auto& list = rankings[q];
        const int take = std::min<int>(k, static_cast<int>(list.size()));
        for (int i = 0; i < take; ++i) {
            if (list[static_cast<std::size_t>(i)].id == truths[q]) {
                ++hits;
                break;
            }
        }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

float baseline_score(const std::vector<float>& part_desc, const MaterialViewSet& viewset,
                     BaselineMode mode) {
    if (static_cast<int>(part_desc.size()) != viewset.views.cols)
        throw DimensionMismatch("part descriptor does not match view feature dimension");
    if (viewset.views.rows < 1) throw DimensionMismatch("view set has no rows");

    double best = -2.0, sum = 0.0;
    for (int v = 0; v < viewset.views.rows; ++v) {
        const double c = cosine_ptr(part_desc.data(), viewset.views.row(v), viewset.views.cols);
        best = std::max(best, c);
        sum += c;
    }
    return static_cast<float>(mode == BaselineMode::kV1Max
                                  ? best
                                  : sum / static_cast<double>(viewset.views.rows));
}

namespace {

MetricsRow tally(const std::string& method, const std::vector<std::vector<RankEntry>>& rankings,
                 const std::vector<std::string>& truths) {
    MetricsRow row;
    row.method = method;
    row.samples = truths.size();
    row.top1_percent = topk_accuracy(rankings, truths, 1);
    row.top5_percent = topk_accuracy(rankings, truths, 5);
    return row;
}

std::vector<const PartSample*> split_parts(const Dataset& dataset, Split split) {
    std::vector<const PartSample*> parts;
    for (const auto& p : dataset.parts)
        if (p.split == split) parts.push_back(&p);
    if (parts.empty()) throw SchemaError("requested split contains no parts");
    return parts;
}

}  // namespace

MetricsRow evaluate_matclip(const EncoderParams& params, const Dataset& dataset, Split split) {
    std::vector<std::pair<std::string, std::vector<float>>> pairs;
    pairs.reserve(dataset.materials.size());
    for (const auto& mat : dataset.materials)
        pairs.emplace_back(mat.material_id, material_forward(params, mat));
    const MaterialIndex index = build_index(pairs);

    std::vector<std::vector<RankEntry>> rankings;
    std::vector<std::string> truths;
    for (const PartSample* part : split_parts(dataset, split)) {
        rankings.push_back(rank(index, part_forward(params, part->descriptor), 5));
        truths.push_back(part->truth_material_id);
    }
    return tally("matclip", rankings, truths);
}

MetricsRow evaluate_baseline(BaselineMode mode, const Dataset& dataset, Split split) {
    std::vector<std::string> ids;
    ids.reserve(dataset.materials.size());
    for (const auto& mat : dataset.materials) ids.push_back(mat.material_id);

    std::vector<std::vector<RankEntry>> rankings;
    std::vector<std::string> truths;
    for (const PartSample* part : split_parts(dataset, split)) {
        std::vector<Scored> scored(dataset.materials.size());
        for (std::size_t m = 0; m < dataset.materials.size(); ++m)
            scored[m] = {baseline_score(part->descriptor, dataset.materials[m], mode),
                         static_cast<int>(m)};
        rankings.push_back(sort_and_take(std::move(scored), ids, 5));
        truths.push_back(part->truth_material_id);
    }
    return tally(mode == BaselineMode::kV1Max ? "v1" : "v2", rankings, truths);
}

std::string ablation_label(const Dataset& dataset, int shape_count, int env_count) {
    if (shape_count == dataset.n_shapes && env_count == dataset.n_env) return "Full Model";
    auto plural = [](int n, const char* one, const char* many) {
        return n == 1 ? std::string(one) : std::to_string(n) + " " + many;
    };
    const std::string shapes = shape_count == dataset.n_shapes
                                   ? "All Shapes"
                                   : plural(shape_count, "1 Shape", "Shapes");
    const std::string envs = env_count == dataset.n_env
                                 ? "All Environment Maps"
                                 : plural(env_count, "1 Environment Map", "Environment Maps");
    return shapes + ", " + envs;
}

std::vector<AblationRow> ablate(const TrainConfig& train_config, const ModelConfig& model_config,
                                const Dataset& dataset,
                                const std::vector<std::pair<int, int>>& subsets) {
    std::vector<AblationRow> rows;
    for (const auto& [shape_count, env_count] : subsets) {
        const Dataset restricted = restrict_views(dataset, shape_count, env_count);
        ModelConfig cfg = model_config;
        cfg.n_views = shape_count * env_count;
        const EncoderParams init = init_params(cfg, train_config.seed);
        const TrainResult result = train(train_config, restricted, init);
        const MetricsRow metrics = evaluate_matclip(result.state.params, restricted, Split::kTest);
        rows.push_back({ablation_label(dataset, shape_count, env_count), metrics.top1_percent});
    }
    return rows;
}

}  // namespace matclip
