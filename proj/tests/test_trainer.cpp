#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "common.hpp"
#include "matclip/errors.hpp"
#include "matclip/synthdata.hpp"
#include "matclip/trainer.hpp"

using namespace matclip;

TEST_SUITE_BEGIN("trainer");

namespace {

SynthConfig tiny_synth(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_materials = 24;
    cfg.n_objects = 40;
    cfg.parts_per_object = 3;
    cfg.n_env = 2;
    cfg.n_shapes = 2;
    cfg.d_lat = 8;
    cfg.d_in = 16;
    cfg.seed = seed;
    return cfg;
}

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.d_in = 16;
    cfg.d_model = 32;
    cfg.d_ff = 64;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.d_emb = 16;
    cfg.n_views = 4;
    return cfg;
}

Dataset make_dataset(std::uint64_t seed, double test_fraction) {
    const auto dir = testutil::temp_dir("trainer_ds");
    generate(tiny_synth(seed), dir.string());
    Dataset ds = load_manifest((dir / "manifest.json").string()).dataset;
    apply_split(ds, split_by_object(ds, test_fraction, seed));
    return ds;
}

}  // namespace

TEST_CASE("adam matches a scalar reference implementation for 10 steps") {
    // single scalar parameter theta with grad 2*theta; everything else zero
    ModelConfig cfg;
    cfg.d_in = cfg.d_model = cfg.d_ff = cfg.n_heads = cfg.n_layers = cfg.d_emb = cfg.n_views = 1;

    EncoderParamsT<double> params = make_params<double>(cfg);
    EncoderParamsT<double> grads = make_params<double>(cfg);
    AdamStateT<double> state = make_adam_state<double>(cfg);
    params.logit_scale = 1.0;

    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    // independent scalar reference
    double theta = 1.0, m = 0.0, v = 0.0;
    for (int step = 1; step <= 10; ++step) {
        const double g = 2.0 * theta;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double mhat = m / (1.0 - std::pow(b1, step));
        const double vhat = v / (1.0 - std::pow(b2, step));
        theta -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    for (int step = 0; step < 10; ++step) {
        grads.logit_scale = 2.0 * params.logit_scale;
        adam_step(params, grads, state, lr, b1, b2, eps, 0.0);
    }
    CHECK(std::abs(params.logit_scale - theta) < 1e-7);
}

TEST_CASE("split_by_object fixtures") {
    Dataset ds = make_dataset(3, 0.0);

    SUBCASE("fraction 0 puts everything in train") {
        const auto split = split_by_object(ds, 0.0, 5);
        for (const auto& [id, s] : split.by_object) CHECK(s == Split::kTrain);
    }

    SUBCASE("same seed twice gives an identical assignment") {
        const auto a = split_by_object(ds, 0.4, 5);
        const auto b = split_by_object(ds, 0.4, 5);
        CHECK(a.by_object.size() == b.by_object.size());
        for (const auto& [id, s] : a.by_object) CHECK(b.at(id) == s);
    }

    SUBCASE("fraction 0.5 over 40 objects puts exactly 20 in test") {
        const auto split = split_by_object(ds, 0.5, 9);
        std::size_t n_test = 0;
        for (const auto& [id, s] : split.by_object) n_test += (s == Split::kTest);
        CHECK(n_test == 20);
        CHECK(split.by_object.size() == 40);
    }

    SUBCASE("every object is assigned exactly once and parts inherit it") {
        const auto split = split_by_object(ds, 0.3, 11);
        apply_split(ds, split);
        for (const auto& part : ds.parts) CHECK(part.split == split.at(part.object_id));
    }

    SUBCASE("empty manifest is rejected") {
        Dataset empty;
        CHECK_THROWS_AS(split_by_object(empty, 0.5, 0), SchemaError);
    }
}

TEST_CASE("sample_batch contracts") {
    Dataset ds = make_dataset(7, 0.25);

    SUBCASE("batch of one") {
        Rng rng(1);
        const auto batch = sample_batch(ds, Split::kTrain, 1, rng);
        CHECK(batch.parts.size() == 1);
        CHECK(batch.materials.size() == 1);
    }

    SUBCASE("truth materials are pairwise distinct and pairs line up") {
        Rng rng(2);
        const auto batch = sample_batch(ds, Split::kTrain, 16, rng);
        std::set<std::string> seen;
        for (std::size_t i = 0; i < batch.parts.size(); ++i) {
            const auto& part = ds.parts[static_cast<std::size_t>(batch.parts[i])];
            const auto& mat = ds.materials[static_cast<std::size_t>(batch.materials[i])];
            CHECK(part.truth_material_id == mat.material_id);
            CHECK(seen.insert(part.truth_material_id).second);
            CHECK(part.split == Split::kTrain);
        }
    }

    SUBCASE("identical rng state replays the identical batch") {
        Rng a(3), b(3);
        const auto ba = sample_batch(ds, Split::kTrain, 8, a);
        const auto bb = sample_batch(ds, Split::kTrain, 8, b);
        CHECK(ba.parts == bb.parts);
        CHECK(ba.materials == bb.materials);
        CHECK(a.state() == b.state());
    }

    SUBCASE("asking for more distinct materials than exist fails") {
        Rng rng(4);
        CHECK_THROWS_AS(sample_batch(ds, Split::kTrain, 25, rng),
                        InsufficientDistinctMaterials);
    }
}

TEST_CASE("train with zero steps returns the init bit-exactly") {
    Dataset ds = make_dataset(13, 0.25);
    TrainConfig cfg;
    cfg.steps = 0;
    cfg.seed = 1;
    const EncoderParams init = init_params(tiny_model(), 77);
    const auto result = train(cfg, ds, init);
    CHECK(params_bitwise_equal(result.state.params, init));
    CHECK(result.history.empty());
}

TEST_CASE("training is bit-exactly reproducible") {
    Dataset ds = make_dataset(17, 0.25);
    TrainConfig cfg;
    cfg.steps = 8;
    cfg.batch_size = 8;
    cfg.seed = 5;
    const EncoderParams init = init_params(tiny_model(), 21);
    const auto a = train(cfg, ds, init);
    const auto b = train(cfg, ds, init);
    CHECK(params_bitwise_equal(a.state.params, b.state.params));
    CHECK(a.state.rng_state == b.state.rng_state);
    CHECK(a.state.opt.step == b.state.opt.step);
    CHECK(a.history == b.history);
}

TEST_CASE("loss trends down over training") {
    // mean over the last quarter must undercut the first quarter, 3 seeds
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Dataset ds = make_dataset(19 + seed, 0.25);
        TrainConfig cfg;
        cfg.steps = 200;
        cfg.batch_size = 12;
        cfg.learning_rate = 1e-3f;
        cfg.seed = seed;
        const auto result = train(cfg, ds, init_params(tiny_model(), seed));
        double head = 0.0, tail = 0.0;
        for (int i = 0; i < 50; ++i) {
            head += result.history[static_cast<std::size_t>(i)].second;
            tail += result.history[result.history.size() - 1 - static_cast<std::size_t>(i)].second;
        }
        CHECK(tail < head);
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    const auto dir = testutil::temp_dir("ckpt");
    const EncoderParams params = init_params(tiny_model(), 33);
    const std::string path = (dir / "model.mcpt").string();
    save_checkpoint(params, path);
    const EncoderParams back = load_checkpoint(path);
    CHECK(params_bitwise_equal(params, back));
}

TEST_CASE("corrupt checkpoints never load partially") {
    const auto dir = testutil::temp_dir("ckpt_bad");
    const EncoderParams params = init_params(tiny_model(), 33);
    const std::string path = (dir / "model.mcpt").string();
    save_checkpoint(params, path);

    SUBCASE("bad magic") {
        std::ofstream out(dir / "junk.mcpt", std::ios::binary);
        out << "JUNKxxxxxxxxxxxxxxxx";
        out.close();
        CHECK_THROWS_AS(load_checkpoint((dir / "junk.mcpt").string()), BadMagic);
    }

    SUBCASE("truncation") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(dir / "short.mcpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_checkpoint((dir / "short.mcpt").string()), Error);
    }

    SUBCASE("version mismatch") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        bytes[4] = 99;  // version field
        std::ofstream out(dir / "vers.mcpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(load_checkpoint((dir / "vers.mcpt").string()), VersionMismatch);
    }
}

TEST_CASE("resume reproduces the uninterrupted run bit-exactly") {
    Dataset ds = make_dataset(23, 0.25);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.seed = 9;
    const EncoderParams init = init_params(tiny_model(), 55);

    cfg.steps = 30;
    const auto full = train(cfg, ds, init);

    cfg.steps = 12;
    const auto first = train(cfg, ds, init);
    const auto dir = testutil::temp_dir("resume");
    const std::string path = (dir / "mid.mcpt").string();
    save_trainer_state(first.state, path);

    const TrainerState restored = load_trainer_state(path);
    CHECK(restored.rng_state == first.state.rng_state);
    CHECK(restored.opt.step == 12);

    cfg.steps = 30;
    const auto second = train_continue(cfg, ds, restored);
    CHECK(params_bitwise_equal(second.state.params, full.state.params));
    CHECK(second.state.rng_state == full.state.rng_state);

    auto joined = first.history;
    joined.insert(joined.end(), second.history.begin(), second.history.end());
    CHECK(joined == full.history);

    // a params-only checkpoint cannot resume
    const std::string bare = (dir / "bare.mcpt").string();
    save_checkpoint(first.state.params, bare);
    CHECK_THROWS_AS(load_trainer_state(bare), SchemaError);
}

TEST_SUITE_END();
