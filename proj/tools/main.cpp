// matclip command line: synthetic data generation, descriptor extraction,
// training, retrieval evaluation, ablations, and subspace queries.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matclip/descriptor.hpp"
#include "matclip/encoder.hpp"
#include "matclip/errors.hpp"
#include "matclip/image.hpp"
#include "matclip/io.hpp"
#include "matclip/maskcrop.hpp"
#include "matclip/report.hpp"
#include "matclip/retrieval.hpp"
#include "matclip/subspace.hpp"
#include "matclip/synthdata.hpp"
#include "matclip/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    matclip::ModelConfig model;
    matclip::TrainConfig train;
};

// optional JSON config: {"model": {...}, "train": {...}}; flags override
RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw matclip::IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
        if (j.contains("model")) {
            const auto& m = j["model"];
            cfg.model.d_model = m.value("d_model", cfg.model.d_model);
            cfg.model.d_ff = m.value("d_ff", cfg.model.d_ff);
            cfg.model.n_heads = m.value("n_heads", cfg.model.n_heads);
            cfg.model.n_layers = m.value("n_layers", cfg.model.n_layers);
            cfg.model.d_emb = m.value("d_emb", cfg.model.d_emb);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.steps = t.value("steps", cfg.train.steps);
            cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
            cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
            cfg.train.eps = t.value("eps", cfg.train.eps);
            cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
        }
    } catch (const json::exception& e) {
        throw matclip::SchemaError(path + ": " + e.what());
    }
    return cfg;
}

matclip::Dataset load_data(const std::string& manifest, const std::string& split_path) {
    auto loaded = matclip::load_manifest(manifest);
    std::string split = split_path;
    if (split.empty() && loaded.manifest.split_path)
        split = (fs::path(loaded.manifest.root) / *loaded.manifest.split_path).string();
    if (!split.empty())
        matclip::apply_split(loaded.dataset, matclip::load_split(split));
    return std::move(loaded.dataset);
}

int run_gen(const matclip::SynthConfig& cfg, const std::string& out_dir) {
    matclip::generate(cfg, out_dir);
    std::cout << "wrote " << (fs::path(out_dir) / "manifest.json").string() << "\n";
    return 0;
}

int run_descriptors(const std::string& images_dir, const std::string& masks_dir,
                    const std::string& out_path) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (entry.path().extension() == ".ppm") names.push_back(entry.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw matclip::IoError("no .ppm images under " + images_dir);

    matclip::Mat<float> rows(static_cast<int>(names.size()), matclip::kHistogramBins);
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto image = matclip::read_ppm((fs::path(images_dir) / (names[i] + ".ppm")).string());
        const auto mask =
            matclip::read_pgm_mask((fs::path(masks_dir) / (names[i] + ".pgm")).string());
        const auto hist = matclip::color_histogram(image, mask);
        std::copy(hist.begin(), hist.end(), rows.row(static_cast<int>(i)));
    }
    matclip::write_mceb(out_path, rows);
    matclip::write_ids(out_path + ".ids", names);
    std::cout << "wrote " << names.size() << " histograms to " << out_path << "\n";
    return 0;
}

int run_crop(const std::string& mask_path, const std::string& image_path,
             const std::string& out_path) {
    const auto mask = matclip::read_pgm_mask(mask_path);
    const auto image = matclip::read_ppm(image_path);
    if (mask.width != image.width || mask.height != image.height)
        throw matclip::DimensionMismatch("mask and image dimensions differ");
    const auto rect = matclip::largest_inscribed_rectangle(mask);
    matclip::write_ppm(matclip::crop(image, rect), out_path);
    std::cout << "crop " << rect.x << "," << rect.y << " " << rect.w << "x" << rect.h << " -> "
              << out_path << "\n";
    return 0;
}

int run_split(const std::string& manifest, double test_fraction, std::uint64_t seed,
              const std::string& out_path) {
    const auto loaded = matclip::load_manifest(manifest);
    const auto split = matclip::split_by_object(loaded.dataset, test_fraction, seed);
    matclip::save_split(split, out_path);
    std::size_t n_test = 0;
    for (const auto& [id, s] : split.by_object) n_test += (s == matclip::Split::kTest);
    std::cout << "split " << split.by_object.size() << " objects, " << n_test << " test -> "
              << out_path << "\n";
    return 0;
}

int run_train(const std::string& manifest, const std::string& split_path,
              const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
              const std::string& resume, std::optional<int> steps_flag) {
    matclip::Dataset data = load_data(manifest, split_path);
    RunConfig cfg = load_run_config(config_path);
    cfg.train.seed = seed;
    if (steps_flag) cfg.train.steps = *steps_flag;
    cfg.model.d_in = data.d_in;
    cfg.model.n_views = data.n_env * data.n_shapes;

    fs::create_directories(out_dir);
    matclip::TrainResult result;
    if (!resume.empty()) {
        result = matclip::train_continue(cfg.train, data, matclip::load_trainer_state(resume));
    } else {
        result = matclip::train(cfg.train, data, matclip::init_params(cfg.model, seed));
    }
    matclip::save_trainer_state(result.state, (fs::path(out_dir) / "checkpoint.mcpt").string());
    matclip::write_history_csv((fs::path(out_dir) / "history.csv").string(), result.history);
    const float last = result.history.empty() ? 0.0f : result.history.back().second;
    std::cout << "trained " << result.state.opt.step << " steps, final loss " << last << " -> "
              << (fs::path(out_dir) / "checkpoint.mcpt").string() << "\n";
    return 0;
}

int run_eval(const std::string& manifest, const std::string& split_path,
             const std::string& checkpoint, const std::string& mode, int k,
             const std::string& out_dir) {
    matclip::Dataset data = load_data(manifest, split_path);
    fs::create_directories(out_dir);

    std::vector<matclip::MetricsRow> rows;
    std::optional<matclip::EncoderParams> params;
    if (mode == "matclip" || mode == "all") {
        if (checkpoint.empty())
            throw matclip::InvalidConfig("--checkpoint is required for matclip evaluation");
        params = matclip::load_checkpoint(checkpoint);
        rows.push_back(matclip::evaluate_matclip(*params, data, matclip::Split::kTest));
    }
    if (mode == "v1" || mode == "all")
        rows.push_back(
            matclip::evaluate_baseline(matclip::BaselineMode::kV1Max, data, matclip::Split::kTest));
    if (mode == "v2" || mode == "all")
        rows.push_back(
            matclip::evaluate_baseline(matclip::BaselineMode::kV2Mean, data, matclip::Split::kTest));
    if (rows.empty()) throw matclip::InvalidConfig("unknown eval mode: " + mode);

    matclip::write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), rows);
    const std::string md = matclip::metrics_markdown({{"Main Evaluation", rows}});
    matclip::AtomicFile md_file((fs::path(out_dir) / "metrics.md").string());
    matclip::detail::write_file(md_file.temp_path(), md);
    md_file.commit();

    // optional per-part ranked lists
    if (k > 0 && params) {
        std::vector<std::pair<std::string, std::vector<float>>> pairs;
        for (const auto& mat : data.materials)
            pairs.emplace_back(mat.material_id, matclip::material_forward(*params, mat));
        const auto index = matclip::build_index(pairs);
        std::string buf = "sample_id,rank,material_id,score\n";
        for (const auto& part : data.parts) {
            if (part.split != matclip::Split::kTest) continue;
            const auto ranked =
                matclip::rank(index, matclip::part_forward(*params, part.descriptor), k);
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                char line[160];
                std::snprintf(line, sizeof(line), "%s,%zu,%s,%.6f\n", part.sample_id.c_str(),
                              r + 1, ranked[r].id.c_str(), static_cast<double>(ranked[r].score));
                buf += line;
            }
        }
        matclip::AtomicFile rank_file((fs::path(out_dir) / "rankings.csv").string());
        matclip::detail::write_file(rank_file.temp_path(), buf);
        rank_file.commit();
    }

    std::cout << md;
    return 0;
}

int run_ablate(const std::string& manifest, const std::string& split_path,
               const std::string& config_path, std::uint64_t seed,
               const std::vector<std::string>& subset_specs, const std::string& out_dir) {
    matclip::Dataset data = load_data(manifest, split_path);
    RunConfig cfg = load_run_config(config_path);
    cfg.train.seed = seed;
    cfg.model.d_in = data.d_in;

    std::vector<std::pair<int, int>> subsets;
    for (const auto& spec : subset_specs) {
        const auto x = spec.find('x');
        if (x == std::string::npos)
            throw matclip::InvalidConfig("subset must look like SHAPESxENVS, got " + spec);
        try {
            subsets.emplace_back(std::stoi(spec.substr(0, x)), std::stoi(spec.substr(x + 1)));
        } catch (const std::exception&) {
            throw matclip::InvalidConfig("subset must look like SHAPESxENVS, got " + spec);
        }
    }
    if (subsets.empty()) {
        subsets.emplace_back(data.n_shapes, data.n_env);
        subsets.emplace_back(1, 1);
    }

    const auto rows = matclip::ablate(cfg.train, cfg.model, data, subsets);
    fs::create_directories(out_dir);
    matclip::write_ablation_csv((fs::path(out_dir) / "ablation.csv").string(), rows);
    const std::string md = matclip::ablation_markdown(rows);
    matclip::AtomicFile md_file((fs::path(out_dir) / "ablation.md").string());
    matclip::detail::write_file(md_file.temp_path(), md);
    md_file.commit();
    std::cout << md;
    return 0;
}

int run_subspace_build(const std::string& points_path, const std::string& ids_path,
                       const std::string& out_prefix) {
    const auto points = matclip::read_mceb(points_path);
    const auto ids = matclip::read_ids(ids_path);
    const auto tree = matclip::KdTree::build(ids, points);  // validates
    matclip::write_mceb(out_prefix + ".mceb", tree.points());
    matclip::write_ids(out_prefix + ".ids", tree.ids());
    std::cout << "indexed " << tree.size() << " points of dim " << tree.dim() << "\n";
    return 0;
}

int run_subspace_query(const std::string& tree_prefix, const std::string& query_path,
                       std::optional<double> radius) {
    const auto tree = matclip::KdTree::build(matclip::read_ids(tree_prefix + ".ids"),
                                             matclip::read_mceb(tree_prefix + ".mceb"));
    const auto queries = matclip::read_mceb(query_path);
    if (queries.cols != tree.dim())
        throw matclip::DimensionMismatch("query dimension does not match tree");
    for (int r = 0; r < queries.rows; ++r) {
        std::vector<float> q(queries.row(r), queries.row(r) + queries.cols);
        const auto hit = tree.nearest(q);
        std::cout << hit.id << " " << hit.distance;
        if (radius) std::cout << " " << (hit.distance <= *radius ? "inside" : "outside");
        std::cout << "\n";
    }
    return 0;
}

int run_subspace_thin(const std::string& points_path, const std::string& ids_path, double radius,
                      const std::string& out_prefix) {
    const auto points = matclip::read_mceb(points_path);
    const auto ids = matclip::read_ids(ids_path);
    if (static_cast<int>(ids.size()) != points.rows)
        throw matclip::DimensionMismatch("id count does not match point count");
    const auto kept = matclip::thin(points, radius);

    matclip::Mat<float> out(static_cast<int>(kept.size()), points.cols);
    std::vector<std::string> out_ids;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        std::copy(points.row(kept[i]), points.row(kept[i]) + points.cols,
                  out.row(static_cast<int>(i)));
        out_ids.push_back(ids[static_cast<std::size_t>(kept[i])]);
    }
    matclip::write_mceb(out_prefix + ".mceb", out);
    matclip::write_ids(out_prefix + ".ids", out_ids);
    std::cout << "kept " << kept.size() << " of " << points.rows << " points\n";
    return 0;
}

int run_report(const std::vector<std::string>& csv_paths, const std::string& out_path) {
    std::vector<std::pair<std::string, std::vector<matclip::MetricsRow>>> conditions;
    for (const auto& path : csv_paths)
        conditions.emplace_back(fs::path(path).stem().string(), matclip::read_metrics_csv(path));
    const std::string md = matclip::metrics_markdown(conditions);
    matclip::AtomicFile file(out_path);
    matclip::detail::write_file(file.temp_path(), md);
    file.commit();
    std::cout << md;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"matclip: shape- and lighting-insensitive material retrieval"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    matclip::SynthConfig synth_cfg;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", synth_cfg.seed, "rng seed")->required();
    gen->add_option("--materials", synth_cfg.n_materials, "material count");
    gen->add_option("--objects", synth_cfg.n_objects, "object count");
    gen->add_option("--parts-per-object", synth_cfg.parts_per_object, "parts per object");
    gen->add_option("--envs", synth_cfg.n_env, "environment maps");
    gen->add_option("--shapes", synth_cfg.n_shapes, "base shapes");
    gen->add_option("--d-lat", synth_cfg.d_lat, "latent dimension");
    gen->add_option("--d-in", synth_cfg.d_in, "feature dimension");
    gen->add_option("--view-noise", synth_cfg.view_noise_sigma, "per-view noise sigma");
    gen->add_option("--part-nuisance", synth_cfg.part_nuisance_sigma, "per-object nuisance sigma");
    gen->add_option("--cell-bias", synth_cfg.cell_bias_sigma, "per-cell offset sigma");
    gen->add_option("--cell-visibility", synth_cfg.cell_visibility,
                    "latent fraction visible per cell");
    gen->add_flag("--identity-maps", synth_cfg.identity_maps, "debug: identity affine maps");

    // descriptors
    auto* desc = app.add_subcommand("descriptors", "masked color histograms for an image set");
    std::string desc_images, desc_masks, desc_out;
    desc->add_option("--images", desc_images, "directory of .ppm images")->required();
    desc->add_option("--masks", desc_masks, "directory of .pgm masks")->required();
    desc->add_option("--out", desc_out, "output .mceb path")->required();

    // crop
    auto* crop_cmd = app.add_subcommand("crop", "crop an image to the largest mask rectangle");
    std::string crop_mask, crop_image, crop_out;
    crop_cmd->add_option("--mask", crop_mask, "binary mask (.pgm)")->required();
    crop_cmd->add_option("--image", crop_image, "image (.ppm)")->required();
    crop_cmd->add_option("--out", crop_out, "output image (.ppm)")->required();

    // split
    auto* split_cmd = app.add_subcommand("split", "object-level train/test split");
    std::string split_data, split_out;
    double split_fraction = 0.25;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--data", split_data, "manifest.json")->required();
    split_cmd->add_option("--test-fraction", split_fraction, "test object fraction");
    split_cmd->add_option("--seed", split_seed, "rng seed")->required();
    split_cmd->add_option("--out", split_out, "output split.json")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "contrastive training");
    std::string train_data, train_split, train_config, train_out, train_resume;
    std::uint64_t train_seed = 0;
    std::optional<int> train_steps;
    train_cmd->add_option("--data", train_data, "manifest.json")->required();
    train_cmd->add_option("--split", train_split, "split.json");
    train_cmd->add_option("--config", train_config, "run config json");
    train_cmd->add_option("--seed", train_seed, "rng seed")->required();
    train_cmd->add_option("--steps", train_steps, "override step count");
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--resume", train_resume, "trainer-state checkpoint to continue");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Top-1/Top-5 retrieval metrics");
    std::string eval_data, eval_split, eval_ckpt, eval_out;
    std::string eval_mode = "all";
    int eval_k = 0;
    eval_cmd->add_option("--data", eval_data, "manifest.json")->required();
    eval_cmd->add_option("--split", eval_split, "split.json");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint (.mcpt)");
    eval_cmd->add_option("--mode", eval_mode, "matclip|v1|v2|all")
        ->check(CLI::IsMember({"matclip", "v1", "v2", "all"}));
    eval_cmd->add_option("--k", eval_k, "emit per-part top-k rankings");
    eval_cmd->add_option("--out", eval_out, "output directory")->required();

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "retrain on restricted view grids");
    std::string ab_data, ab_split, ab_config, ab_out;
    std::uint64_t ab_seed = 0;
    std::vector<std::string> ab_subsets;
    ablate_cmd->add_option("--data", ab_data, "manifest.json")->required();
    ablate_cmd->add_option("--split", ab_split, "split.json");
    ablate_cmd->add_option("--config", ab_config, "run config json");
    ablate_cmd->add_option("--seed", ab_seed, "rng seed")->required();
    ablate_cmd->add_option("--subset", ab_subsets, "view subset SHAPESxENVS (repeatable)");
    ablate_cmd->add_option("--out", ab_out, "output directory")->required();

    // subspace
    auto* subspace_cmd = app.add_subcommand("subspace", "descriptor subspace membership");
    subspace_cmd->require_subcommand(1);
    auto* sb_build = subspace_cmd->add_subcommand("build", "validate and store a point set");
    std::string sbb_points, sbb_ids, sbb_out;
    sb_build->add_option("--points", sbb_points, "points .mceb")->required();
    sb_build->add_option("--ids", sbb_ids, "ids file")->required();
    sb_build->add_option("--out", sbb_out, "output prefix")->required();
    auto* sb_query = subspace_cmd->add_subcommand("query", "nearest sample per query row");
    std::string sbq_tree, sbq_query;
    std::optional<double> sbq_radius;
    sb_query->add_option("--tree", sbq_tree, "tree prefix from build")->required();
    sb_query->add_option("--query", sbq_query, "query .mceb")->required();
    sb_query->add_option("--radius", sbq_radius, "membership radius");
    auto* sb_thin = subspace_cmd->add_subcommand("thin", "greedy radius thinning");
    std::string sbt_points, sbt_ids, sbt_out;
    double sbt_radius = 0.0;
    sb_thin->add_option("--points", sbt_points, "points .mceb")->required();
    sb_thin->add_option("--ids", sbt_ids, "ids file")->required();
    sb_thin->add_option("--radius", sbt_radius, "thinning radius")->required();
    sb_thin->add_option("--out", sbt_out, "output prefix")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "merge metrics CSVs into one markdown table");
    std::vector<std::string> report_csvs;
    std::string report_out;
    report_cmd->add_option("--out", report_out, "output markdown path")->required();
    report_cmd->add_option("csvs", report_csvs, "metrics CSV files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // help on stdout, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) return run_gen(synth_cfg, gen_out);
        if (*desc) return run_descriptors(desc_images, desc_masks, desc_out);
        if (*crop_cmd) return run_crop(crop_mask, crop_image, crop_out);
        if (*split_cmd) return run_split(split_data, split_fraction, split_seed, split_out);
        if (*train_cmd)
            return run_train(train_data, train_split, train_config, train_seed, train_out,
                             train_resume, train_steps);
        if (*eval_cmd)
            return run_eval(eval_data, eval_split, eval_ckpt, eval_mode, eval_k, eval_out);
        if (*ablate_cmd)
            return run_ablate(ab_data, ab_split, ab_config, ab_seed, ab_subsets, ab_out);
        if (*subspace_cmd) {
            if (*sb_build) return run_subspace_build(sbb_points, sbb_ids, sbb_out);
            if (*sb_query) return run_subspace_query(sbq_tree, sbq_query, sbq_radius);
            if (*sb_thin) return run_subspace_thin(sbt_points, sbt_ids, sbt_radius, sbt_out);
        }
        if (*report_cmd) return run_report(report_csvs, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
