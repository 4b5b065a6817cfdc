#include "matclip/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "matclip/errors.hpp"
#include "matclip/io.hpp"
#include "matclip/rng.hpp"

namespace matclip {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
    if (n_materials < 1 || n_objects < 1 || parts_per_object < 1 || n_env < 1 ||
        n_shapes < 1 || d_lat < 1 || d_in < 1)
        throw InvalidConfig("all synth counts must be >= 1");
    if (view_noise_sigma < 0.0f || part_nuisance_sigma < 0.0f || cell_bias_sigma < 0.0f)
        throw InvalidConfig("sigmas must be >= 0");
    if (cell_visibility <= 0.0f || cell_visibility > 1.0f)
        throw InvalidConfig("cell_visibility must lie in (0, 1]");
    if (identity_maps && d_lat != d_in)
        throw InvalidConfig("identity_maps requires d_lat == d_in");
}

namespace {

std::string pad_id(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
    return buf;
}

void fill_normal(Rng& rng, float* data, std::size_t n, double sigma) {
    for (std::size_t i = 0; i < n; ++i)
        data[i] = static_cast<float>(sigma * rng.normal());
}

// row <- normalize(row) in double, stored back as f32
void normalize_row(float* row, int n) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) ss += static_cast<double>(row[i]) * row[i];
    const double norm = std::sqrt(ss);
    if (norm <= 1e-12) throw ZeroVector("generated a zero feature vector");
    for (int i = 0; i < n; ++i) row[i] = static_cast<float>(row[i] / norm);
}

json config_to_json(const SynthConfig& c) {
    return json{{"n_materials", c.n_materials},
                {"n_objects", c.n_objects},
                {"parts_per_object", c.parts_per_object},
                {"n_env", c.n_env},
                {"n_shapes", c.n_shapes},
                {"d_lat", c.d_lat},
                {"d_in", c.d_in},
                {"view_noise_sigma", c.view_noise_sigma},
                {"part_nuisance_sigma", c.part_nuisance_sigma},
                {"cell_bias_sigma", c.cell_bias_sigma},
                {"cell_visibility", c.cell_visibility},
                {"seed", c.seed},
                {"identity_maps", c.identity_maps}};
}

SynthConfig config_from_json(const json& j) {
    SynthConfig c;
    c.n_materials = j.at("n_materials").get<int>();
    c.n_objects = j.at("n_objects").get<int>();
    c.parts_per_object = j.at("parts_per_object").get<int>();
    c.n_env = j.at("n_env").get<int>();
    c.n_shapes = j.at("n_shapes").get<int>();
    c.d_lat = j.at("d_lat").get<int>();
    c.d_in = j.at("d_in").get<int>();
    c.view_noise_sigma = j.at("view_noise_sigma").get<float>();
    c.part_nuisance_sigma = j.at("part_nuisance_sigma").get<float>();
    c.cell_bias_sigma = j.at("cell_bias_sigma").get<float>();
    c.cell_visibility = j.value("cell_visibility", 1.0f);
    c.seed = j.at("seed").get<std::uint64_t>();
    c.identity_maps = j.value("identity_maps", false);
    return c;
}

}  // namespace

DatasetManifest generate(const SynthConfig& config, const std::string& out_dir) {
    config.validate();
    const int n_cells = config.n_env * config.n_shapes;
    const int dl = config.d_lat;
    const int di = config.d_in;

    fs::create_directories(fs::path(out_dir) / "views");
    fs::create_directories(fs::path(out_dir) / "parts");

    Rng rng(config.seed);

    // material latents
    Mat<float> latents(config.n_materials, dl);
    fill_normal(rng, latents.data.data(), latents.data.size(), 1.0);

    // per-cell material-domain affine maps, shared across materials; each
    // cell reads only a random subset of the latent coordinates
    const int visible = std::max(
        1, static_cast<int>(std::lround(config.cell_visibility * static_cast<double>(dl))));
    std::vector<Mat<float>> cell_map(static_cast<std::size_t>(n_cells));
    Mat<float> cell_bias(n_cells, di);
    const double map_sigma = 1.0 / std::sqrt(static_cast<double>(visible));
    for (int c = 0; c < n_cells; ++c) {
        auto& m = cell_map[static_cast<std::size_t>(c)];
        m = Mat<float>(di, dl);
        if (config.identity_maps) {
            for (int i = 0; i < di; ++i) m(i, i % dl) = 1.0f;
        } else {
            fill_normal(rng, m.data.data(), m.data.size(), map_sigma);
            std::vector<int> coords(static_cast<std::size_t>(dl));
            for (int k = 0; k < dl; ++k) coords[static_cast<std::size_t>(k)] = k;
            for (std::size_t k = coords.size(); k > 1; --k)
                std::swap(coords[k - 1], coords[rng.next_below(k)]);
            for (int k = visible; k < dl; ++k)
                for (int i = 0; i < di; ++i) m(i, coords[static_cast<std::size_t>(k)]) = 0.0f;
            fill_normal(rng, cell_bias.row(c), static_cast<std::size_t>(di),
                        config.cell_bias_sigma);
        }
    }

    // single part-domain affine map with per-cell offsets; parts see the full
    // latent (the rendered part is the material itself, not a partial probe)
    Mat<float> part_map(di, dl);
    Mat<float> part_cell_bias(n_cells, di);
    if (config.identity_maps) {
        for (int i = 0; i < di; ++i) part_map(i, i % dl) = 1.0f;
    } else {
        fill_normal(rng, part_map.data.data(), part_map.data.size(),
                    1.0 / std::sqrt(static_cast<double>(dl)));
        fill_normal(rng, part_cell_bias.data.data(), part_cell_bias.data.size(),
                    config.cell_bias_sigma);
    }

    // per-object nuisance directions
    Mat<float> nuisance(config.n_objects, di);
    fill_normal(rng, nuisance.data.data(), nuisance.data.size(), 1.0);

    DatasetManifest manifest;
    manifest.config = config;
    manifest.root = out_dir;

    for (int m = 0; m < config.n_materials; ++m) {
        Mat<float> views(n_cells, di);
        for (int c = 0; c < n_cells; ++c) {
            float* row = views.row(c);
            const Mat<float>& map = cell_map[static_cast<std::size_t>(c)];
            for (int i = 0; i < di; ++i)
                row[i] = dot(map.row(i), latents.row(m), dl) + cell_bias(c, i);
            for (int i = 0; i < di; ++i)
                row[i] += static_cast<float>(config.view_noise_sigma * rng.normal());
            normalize_row(row, di);
        }
        const std::string id = pad_id("mat_", m, 4);
        const std::string rel = "views/" + id + ".mceb";
        write_mceb((fs::path(out_dir) / rel).string(), views);
        manifest.materials.push_back({id, rel});
    }

    int part_counter = 0;
    for (int o = 0; o < config.n_objects; ++o) {
        const std::string object_id = pad_id("obj_", o, 4);
        for (int k = 0; k < config.parts_per_object; ++k) {
            const int m = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(config.n_materials)));
            const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_cells)));
            Mat<float> desc(1, di);
            float* row = desc.row(0);
            for (int i = 0; i < di; ++i)
                row[i] = dot(part_map.row(i), latents.row(m), dl) + part_cell_bias(c, i) +
                         config.part_nuisance_sigma * nuisance(o, i);
            for (int i = 0; i < di; ++i)
                row[i] += static_cast<float>(config.view_noise_sigma * rng.normal());
            normalize_row(row, di);

            const std::string id = pad_id("part_", part_counter++, 6);
            const std::string rel = "parts/" + id + ".mceb";
            write_mceb((fs::path(out_dir) / rel).string(), desc);
            manifest.parts.push_back({id, object_id, pad_id("mat_", m, 4), rel});
        }
    }

    json j;
    j["schema_version"] = 1;
    j["config"] = config_to_json(config);
    j["materials"] = json::array();
    for (const auto& m : manifest.materials)
        j["materials"].push_back({{"id", m.id}, {"views", m.views_path}});
    j["parts"] = json::array();
    for (const auto& p : manifest.parts)
        j["parts"].push_back({{"id", p.id},
                              {"object", p.object_id},
                              {"material", p.material_id},
                              {"descriptor", p.descriptor_path}});

    AtomicFile file((fs::path(out_dir) / "manifest.json").string());
    detail::write_file(file.temp_path(), j.dump(2) + "\n");
    file.commit();
    return manifest;
}

LoadedDataset load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError(manifest_path + ": " + e.what());
    }

    LoadedDataset out;
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw VersionMismatch(manifest_path + ": unsupported manifest schema version");
        out.manifest.config = config_from_json(j.at("config"));
        out.manifest.config.validate();
        out.manifest.root = fs::path(manifest_path).parent_path().string();
        for (const auto& m : j.at("materials"))
            out.manifest.materials.push_back(
                {m.at("id").get<std::string>(), m.at("views").get<std::string>()});
        for (const auto& p : j.at("parts"))
            out.manifest.parts.push_back({p.at("id").get<std::string>(),
                                          p.at("object").get<std::string>(),
                                          p.at("material").get<std::string>(),
                                          p.at("descriptor").get<std::string>()});
        if (j.contains("split") && !j.at("split").is_null())
            out.manifest.split_path = j.at("split").get<std::string>();
    } catch (const json::exception& e) {
        throw SchemaError(manifest_path + ": " + e.what());
    }

    const SynthConfig& cfg = out.manifest.config;
    const int n_cells = cfg.n_env * cfg.n_shapes;
    Dataset& ds = out.dataset;
    ds.n_env = cfg.n_env;
    ds.n_shapes = cfg.n_shapes;
    ds.d_in = cfg.d_in;

    auto check_finite = [&](const Mat<float>& m, const std::string& what) {
        for (float v : m.data)
            if (!std::isfinite(v)) throw ShapeMismatch(what + ": non-finite value");
    };

    for (const auto& entry : out.manifest.materials) {
        const std::string path = (fs::path(out.manifest.root) / entry.views_path).string();
        Mat<float> views;
        try {
            views = read_mceb(path);
        } catch (const Error& e) {
            throw IoError("material " + entry.id + ": " + e.what());
        }
        if (views.rows != n_cells || views.cols != cfg.d_in)
            throw ShapeMismatch("material " + entry.id + ": expected " +
                                std::to_string(n_cells) + "x" + std::to_string(cfg.d_in) +
                                " view matrix");
        check_finite(views, "material " + entry.id);
        ds.materials.push_back({entry.id, std::move(views), cfg.n_env, cfg.n_shapes});
    }
    ds.rebuild_index();

    for (const auto& entry : out.manifest.parts) {
        const std::string path = (fs::path(out.manifest.root) / entry.descriptor_path).string();
        Mat<float> desc;
        try {
            desc = read_mceb(path);
        } catch (const Error& e) {
            throw IoError("part " + entry.id + ": " + e.what());
        }
        if (desc.rows != 1 || desc.cols != cfg.d_in)
            throw ShapeMismatch("part " + entry.id + ": expected 1x" +
                                std::to_string(cfg.d_in) + " descriptor");
        check_finite(desc, "part " + entry.id);
        if (ds.material_index.find(entry.material_id) == ds.material_index.end())
            throw SchemaError("part " + entry.id + " references unknown material " +
                              entry.material_id);
        PartSample part;
        part.sample_id = entry.id;
        part.object_id = entry.object_id;
        part.truth_material_id = entry.material_id;
        part.descriptor.assign(desc.row(0), desc.row(0) + desc.cols);
        ds.parts.push_back(std::move(part));
    }
    return out;
}

void save_split(const SplitAssignment& split, const std::string& path) {
    json objects = json::object();
    // sorted emission keeps the file byte-stable
    std::vector<std::pair<std::string, Split>> entries(split.by_object.begin(),
                                                       split.by_object.end());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [id, s] : entries)
        objects[id] = (s == Split::kTest) ? "test" : "train";
    json j{{"schema_version", 1}, {"objects", objects}};

    AtomicFile file(path);
    detail::write_file(file.temp_path(), j.dump(2) + "\n");
    file.commit();
}

SplitAssignment load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    SplitAssignment split;
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw VersionMismatch(path + ": unsupported split schema version");
        for (const auto& [id, v] : j.at("objects").items()) {
            const std::string s = v.get<std::string>();
            if (s != "train" && s != "test")
                throw SchemaError(path + ": bad split tag '" + s + "'");
            split.by_object[id] = (s == "test") ? Split::kTest : Split::kTrain;
        }
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return split;
}

}  // namespace matclip
