#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "matclip/errors.hpp"
#include "matclip/io.hpp"
#include "matclip/synthdata.hpp"

using namespace matclip;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("synthdata");

namespace {

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_materials = 3;
    cfg.n_objects = 2;
    cfg.parts_per_object = 2;
    cfg.seed = seed;
    return cfg;
}

std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("default grid yields 42 view rows per material") {
    const auto dir = testutil::temp_dir("synth42");
    const auto manifest = generate(small_config(1), dir.string());
    CHECK(manifest.materials.size() == 3);
    const auto loaded = load_manifest((dir / "manifest.json").string());
    for (const auto& mat : loaded.dataset.materials) {
        CHECK(mat.views.rows == 42);
        CHECK(mat.n_env == 7);
        CHECK(mat.n_shapes == 6);
    }
}

TEST_CASE("same seed regenerates byte-identical files") {
    const auto a = testutil::temp_dir("synth_det_a");
    const auto b = testutil::temp_dir("synth_det_b");
    generate(small_config(9), a.string());
    generate(small_config(9), b.string());

    CHECK(file_bytes(a / "manifest.json") == file_bytes(b / "manifest.json"));
    CHECK(file_bytes(a / "views" / "mat_0000.mceb") == file_bytes(b / "views" / "mat_0000.mceb"));
    CHECK(file_bytes(a / "parts" / "part_000003.mceb") ==
          file_bytes(b / "parts" / "part_000003.mceb"));

    const auto c = testutil::temp_dir("synth_det_c");
    generate(small_config(10), c.string());
    CHECK(file_bytes(a / "views" / "mat_0000.mceb") != file_bytes(c / "views" / "mat_0000.mceb"));
}

TEST_CASE("identity maps with zero view noise collapse views to the latent") {
    SynthConfig cfg = small_config(4);
    cfg.identity_maps = true;
    cfg.view_noise_sigma = 0.0f;
    cfg.d_lat = 16;
    cfg.d_in = 16;
    cfg.n_env = 2;
    cfg.n_shapes = 3;
    const auto dir = testutil::temp_dir("synth_ident");
    generate(cfg, dir.string());
    const auto loaded = load_manifest((dir / "manifest.json").string());
    for (const auto& mat : loaded.dataset.materials) {
        // every view row equals l2_normalize(z_m), so all rows are identical
        for (int r = 1; r < mat.views.rows; ++r)
            for (int c = 0; c < mat.views.cols; ++c)
                CHECK(mat.views(r, c) == mat.views(0, c));
        double ss = 0.0;
        for (int c = 0; c < mat.views.cols; ++c)
            ss += static_cast<double>(mat.views(0, c)) * mat.views(0, c);
        CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("identity maps require matching dimensions") {
    SynthConfig cfg = small_config(4);
    cfg.identity_maps = true;
    cfg.d_lat = 8;
    cfg.d_in = 16;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("generate -> load round-trip preserves every record") {
    SynthConfig cfg = small_config(12);
    cfg.n_env = 3;
    cfg.n_shapes = 2;
    const auto dir = testutil::temp_dir("synth_rt");
    const auto written = generate(cfg, dir.string());
    const auto loaded = load_manifest((dir / "manifest.json").string());

    CHECK(loaded.manifest.materials.size() == written.materials.size());
    CHECK(loaded.manifest.parts.size() == written.parts.size());
    CHECK(loaded.dataset.parts.size() ==
          static_cast<std::size_t>(cfg.n_objects * cfg.parts_per_object));
    for (std::size_t i = 0; i < written.parts.size(); ++i) {
        CHECK(loaded.manifest.parts[i].id == written.parts[i].id);
        CHECK(loaded.manifest.parts[i].object_id == written.parts[i].object_id);
        CHECK(loaded.manifest.parts[i].material_id == written.parts[i].material_id);
    }
    CHECK(loaded.dataset.n_env == 3);
    CHECK(loaded.dataset.n_shapes == 2);

    // every emitted vector is unit norm
    for (const auto& mat : loaded.dataset.materials) {
        for (int r = 0; r < mat.views.rows; ++r) {
            double ss = 0.0;
            for (int c = 0; c < mat.views.cols; ++c)
                ss += static_cast<double>(mat.views(r, c)) * mat.views(r, c);
            CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    for (const auto& part : loaded.dataset.parts) {
        double ss = 0.0;
        for (float v : part.descriptor) ss += static_cast<double>(v) * v;
        CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("missing view file is reported with the material id") {
    const auto dir = testutil::temp_dir("synth_missing");
    generate(small_config(5), dir.string());
    fs::remove(dir / "views" / "mat_0001.mceb");
    try {
        load_manifest((dir / "manifest.json").string());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("mat_0001") != std::string::npos);
    }
}

TEST_CASE("hand-built one-material manifest enforces the view grid") {
    const auto dir = testutil::temp_dir("synth_hand");
    SynthConfig cfg;
    cfg.n_materials = 1;
    cfg.n_objects = 1;
    cfg.parts_per_object = 1;
    cfg.n_env = 2;
    cfg.n_shapes = 2;
    cfg.d_in = 4;
    cfg.d_lat = 4;

    Rng rng(6);
    write_mceb((dir / "views.mceb").string(), testutil::random_unit_rows(rng, 4, 4));
    write_mceb((dir / "part.mceb").string(), testutil::random_unit_rows(rng, 1, 4));

    auto write_manifest = [&](int view_rows) {
        write_mceb((dir / "views.mceb").string(), testutil::random_unit_rows(rng, view_rows, 4));
        std::ofstream out(dir / "manifest.json");
        out << R"({"schema_version":1,"config":{"n_materials":1,"n_objects":1,)"
            << R"("parts_per_object":1,"n_env":2,"n_shapes":2,"d_lat":4,"d_in":4,)"
            << R"("view_noise_sigma":0.0,"part_nuisance_sigma":0.0,"cell_bias_sigma":0.0,)"
            << R"("seed":0},)"
            << R"("materials":[{"id":"mat_x","views":"views.mceb"}],)"
            << R"("parts":[{"id":"p0","object":"obj_x","material":"mat_x",)"
            << R"("descriptor":"part.mceb"}]})";
    };

    write_manifest(4);
    const auto loaded = load_manifest((dir / "manifest.json").string());
    CHECK(loaded.dataset.materials.size() == 1);
    CHECK(loaded.dataset.materials[0].views.rows == 4);

    write_manifest(3);  // violates V = n_env * n_shapes
    CHECK_THROWS_AS(load_manifest((dir / "manifest.json").string()), ShapeMismatch);
}

TEST_CASE("split file round-trip") {
    const auto dir = testutil::temp_dir("splitio");
    SplitAssignment split;
    split.by_object["obj_a"] = Split::kTrain;
    split.by_object["obj_b"] = Split::kTest;
    const std::string path = (dir / "split.json").string();
    save_split(split, path);
    const SplitAssignment back = load_split(path);
    CHECK(back.by_object.size() == 2);
    CHECK(back.at("obj_a") == Split::kTrain);
    CHECK(back.at("obj_b") == Split::kTest);
}

TEST_SUITE_END();
