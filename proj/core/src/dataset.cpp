#include "matclip/dataset.hpp"

#include "matclip/errors.hpp"

namespace matclip {

const MaterialViewSet& Dataset::material(const std::string& id) const {
    auto it = material_index.find(id);
    if (it == material_index.end())
        throw SchemaError("unknown material id: " + id);
    return materials[static_cast<std::size_t>(it->second)];
}

void Dataset::rebuild_index() {
    material_index.clear();
    for (std::size_t i = 0; i < materials.size(); ++i) {
        auto [it, inserted] = material_index.emplace(materials[i].material_id, static_cast<int>(i));
        if (!inserted)
            throw DuplicateId("duplicate material id: " + materials[i].material_id);
    }
}

Split SplitAssignment::at(const std::string& object_id) const {
    auto it = by_object.find(object_id);
    if (it == by_object.end())
        throw SchemaError("object not present in split assignment: " + object_id);
    return it->second;
}

void apply_split(Dataset& dataset, const SplitAssignment& split) {
    for (auto& part : dataset.parts) part.split = split.at(part.object_id);
}

Dataset restrict_views(const Dataset& dataset, int shape_count, int env_count) {
    if (shape_count < 1 || shape_count > dataset.n_shapes ||
        env_count < 1 || env_count > dataset.n_env)
        throw DimensionMismatch("view subset exceeds manifest grid");

    Dataset out = dataset;
    out.n_env = env_count;
    out.n_shapes = shape_count;
    for (auto& mat : out.materials) {
        Mat<float> sub(env_count * shape_count, dataset.d_in);
        int row = 0;
        for (int e = 0; e < env_count; ++e) {
            for (int s = 0; s < shape_count; ++s) {
                const float* src = mat.views.row(e * dataset.n_shapes + s);
                std::copy(src, src + dataset.d_in, sub.row(row++));
            }
        }
        mat.views = std::move(sub);
        mat.n_env = env_count;
        mat.n_shapes = shape_count;
    }
    return out;
}

}  // namespace matclip
