#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matclip/dataset.hpp"

namespace matclip {

// Deterministic stand-in for the 42-condition rendering matrix. Materials
// live as latents z_m; each (environment, shape) cell applies a fixed random
// affine map so the same material looks different per cell, and parts are
// observed through a separate part-domain affine map plus per-object
// nuisance, so raw cross-domain cosine carries almost no signal while a
// trained pair of encoders can align the two domains. Each cell's map only
// reads a random cell_visibility fraction of the latent coordinates, so a
// single viewing condition underdetermines the material and pooling the full
// grid genuinely helps.
struct SynthConfig {
    int n_materials = 64;
    int n_objects = 128;
    int parts_per_object = 4;
    int n_env = 7;
    int n_shapes = 6;
    int d_lat = 16;
    int d_in = 32;
    float view_noise_sigma = 0.05f;
    float part_nuisance_sigma = 0.3f;
    float cell_bias_sigma = 0.3f;
    float cell_visibility = 0.5f;  // latent fraction visible per cell
    std::uint64_t seed = 0;
    bool identity_maps = false;  // debug: identity affine maps, requires d_lat == d_in

    void validate() const;
};

struct DatasetManifest {
    SynthConfig config;
    std::string root;  // directory holding the manifest
    struct MaterialEntry {
        std::string id;
        std::string views_path;  // relative to root
    };
    struct PartEntry {
        std::string id;
        std::string object_id;
        std::string material_id;
        std::string descriptor_path;  // relative to root
    };
    std::vector<MaterialEntry> materials;
    std::vector<PartEntry> parts;
    std::optional<std::string> split_path;
};

struct LoadedDataset {
    DatasetManifest manifest;
    Dataset dataset;
};

// Writes view/descriptor files plus manifest.json under out_dir; byte-identical
// for identical (config, out_dir content layout).
DatasetManifest generate(const SynthConfig& config, const std::string& out_dir);

// Parses manifest.json and loads every referenced array, validating shape and
// finiteness. Errors name the offending material or part.
LoadedDataset load_manifest(const std::string& manifest_path);

void save_split(const SplitAssignment& split, const std::string& path);
SplitAssignment load_split(const std::string& path);

}  // namespace matclip
