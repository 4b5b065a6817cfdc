#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matclip/dataset.hpp"
#include "matclip/rng.hpp"
#include "matclip/tensor.hpp"

namespace testutil {

// Fresh directory under the system temp root; removed lazily by the OS.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    auto path = std::filesystem::temp_directory_path() /
                ("matclip_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
    std::filesystem::create_directories(path);
    return path;
}

// normalized error: relative for large values, absolute below 1
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline std::vector<float> random_unit_vec(matclip::Rng& rng, int n) {
    std::vector<float> v(static_cast<std::size_t>(n));
    double ss = 0.0;
    for (auto& x : v) {
        x = static_cast<float>(rng.normal());
        ss += static_cast<double>(x) * x;
    }
    const double norm = std::sqrt(ss);
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
}

inline matclip::Mat<float> random_unit_rows(matclip::Rng& rng, int rows, int cols) {
    matclip::Mat<float> m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        auto v = random_unit_vec(rng, cols);
        std::copy(v.begin(), v.end(), m.row(r));
    }
    return m;
}

inline matclip::MaterialViewSet random_viewset(matclip::Rng& rng, const std::string& id,
                                               int n_env, int n_shapes, int d_in) {
    matclip::MaterialViewSet vs;
    vs.material_id = id;
    vs.n_env = n_env;
    vs.n_shapes = n_shapes;
    vs.views = random_unit_rows(rng, n_env * n_shapes, d_in);
    return vs;
}

inline matclip::PartSample random_part(matclip::Rng& rng, const std::string& id,
                                       const std::string& material_id, int d_in) {
    matclip::PartSample part;
    part.sample_id = id;
    part.object_id = "obj_" + id;
    part.truth_material_id = material_id;
    part.descriptor = random_unit_vec(rng, d_in);
    return part;
}

}  // namespace testutil
