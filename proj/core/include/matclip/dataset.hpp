#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "matclip/tensor.hpp"

namespace matclip {

enum class Split { kTrain, kTest };

// One material's per-(environment, shape) view features, environment-major.
struct MaterialViewSet {
    std::string material_id;
    Mat<float> views;  // V x D_in, V = n_env * n_shapes
    int n_env = 0;
    int n_shapes = 0;
};

// One masked part instance.
struct PartSample {
    std::string sample_id;
    std::string object_id;
    std::vector<float> descriptor;  // D_in
    std::string truth_material_id;
    Split split = Split::kTrain;
};

struct Dataset {
    int n_env = 0;
    int n_shapes = 0;
    int d_in = 0;
    std::vector<MaterialViewSet> materials;
    std::vector<PartSample> parts;
    std::unordered_map<std::string, int> material_index;  // id -> materials[]

    const MaterialViewSet& material(const std::string& id) const;
    void rebuild_index();
};

// All samples of one object share a side.
struct SplitAssignment {
    std::unordered_map<std::string, Split> by_object;

    Split at(const std::string& object_id) const;
};

// Stamps each part's split tag from the object-level assignment.
void apply_split(Dataset& dataset, const SplitAssignment& split);

// Copy of the dataset with material views restricted to the leading
// shape_count x env_count cells. Parts are untouched.
Dataset restrict_views(const Dataset& dataset, int shape_count, int env_count);

}  // namespace matclip
