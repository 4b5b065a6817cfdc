#include <doctest.h>

#include <cmath>
#include <numeric>

#include "common.hpp"
#include "matclip/encoder.hpp"
#include "matclip/errors.hpp"
#include "matclip/trainer.hpp"

using namespace matclip;

TEST_SUITE_BEGIN("encoder");

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.d_in = 8;
    cfg.d_model = 16;
    cfg.d_ff = 64;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.d_emb = 8;
    cfg.n_views = 4;  // 2 envs x 2 shapes
    return cfg;
}

struct Batch {
    std::vector<MaterialViewSet> viewsets;
    std::vector<PartSample> parts;
    std::vector<const MaterialViewSet*> mat_ptrs;
    std::vector<const PartSample*> part_ptrs;
};

Batch random_batch(Rng& rng, const ModelConfig& cfg, int b) {
    Batch batch;
    batch.viewsets.reserve(static_cast<std::size_t>(b));
    batch.parts.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        batch.viewsets.push_back(
            testutil::random_viewset(rng, "m" + std::to_string(i), 2, cfg.n_views / 2, cfg.d_in));
        batch.parts.push_back(
            testutil::random_part(rng, "p" + std::to_string(i), "m" + std::to_string(i), cfg.d_in));
    }
    for (int i = 0; i < b; ++i) {
        batch.mat_ptrs.push_back(&batch.viewsets[static_cast<std::size_t>(i)]);
        batch.part_ptrs.push_back(&batch.parts[static_cast<std::size_t>(i)]);
    }
    return batch;
}

double norm_of(const std::vector<float>& v) {
    double ss = 0.0;
    for (float x : v) ss += static_cast<double>(x) * x;
    return std::sqrt(ss);
}

}  // namespace

TEST_CASE("init_params is deterministic and seed-sensitive") {
    const ModelConfig cfg = small_config();
    const EncoderParams a = init_params(cfg, 42);
    const EncoderParams b = init_params(cfg, 42);
    const EncoderParams c = init_params(cfg, 43);
    CHECK(params_bitwise_equal(a, b));
    CHECK_FALSE(params_bitwise_equal(a, c));
}

TEST_CASE("logit scale initializes to the 0.07 temperature convention") {
    const EncoderParams p = init_params(small_config(), 1);
    CHECK(std::exp(p.logit_scale) == doctest::Approx(14.2857).epsilon(1e-3));
}

TEST_CASE("d_model must divide by n_heads") {
    ModelConfig cfg = small_config();
    cfg.d_model = 17;
    CHECK_THROWS_AS(init_params(cfg, 0), InvalidConfig);
}

TEST_CASE("forward outputs are unit norm for random params and inputs") {
    const ModelConfig cfg = small_config();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(700 + seed);
        const EncoderParams p = init_params(cfg, seed);
        const auto vs = testutil::random_viewset(rng, "m", 2, 2, cfg.d_in);
        CHECK(norm_of(material_forward(p, vs)) == doctest::Approx(1.0).epsilon(1e-5));
        const auto part = testutil::random_part(rng, "p", "m", cfg.d_in);
        CHECK(norm_of(part_forward(p, part.descriptor)) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("zeroed weights reduce both encoders to their output bias") {
    const ModelConfig cfg = small_config();
    EncoderParams p = make_params<float>(cfg);
    Rng rng(800);
    for (std::size_t i = 0; i < p.b_out.size(); ++i)
        p.b_out[i] = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < p.part_b2.size(); ++i)
        p.part_b2[i] = p.b_out[i];

    double ss = 0.0;
    for (float v : p.b_out) ss += static_cast<double>(v) * v;
    const double norm = std::sqrt(ss);

    for (int trial = 0; trial < 3; ++trial) {
        const auto vs = testutil::random_viewset(rng, "m", 2, 2, cfg.d_in);
        const auto emb = material_forward(p, vs);
        for (std::size_t i = 0; i < emb.size(); ++i)
            CHECK(emb[i] == doctest::Approx(p.b_out[i] / norm).epsilon(1e-5));

        const auto part = testutil::random_part(rng, "q", "m", cfg.d_in);
        const auto pemb = part_forward(p, part.descriptor);
        for (std::size_t i = 0; i < pemb.size(); ++i)
            CHECK(pemb[i] == doctest::Approx(p.b_out[i] / norm).epsilon(1e-5));
    }
}

TEST_CASE("zero positional embeddings make material_forward permutation-invariant") {
    const ModelConfig cfg = small_config();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EncoderParams p = init_params(cfg, 900 + seed);
        p.pos.zero();
        Rng rng(901 + seed);
        auto vs = testutil::random_viewset(rng, "m", 2, 2, cfg.d_in);
        const auto base = material_forward(p, vs);

        std::vector<int> perm(static_cast<std::size_t>(cfg.n_views));
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.next_below(i)]);
        MaterialViewSet shuffled = vs;
        for (int r = 0; r < cfg.n_views; ++r)
            std::copy(vs.views.row(perm[static_cast<std::size_t>(r)]),
                      vs.views.row(perm[static_cast<std::size_t>(r)]) + cfg.d_in,
                      shuffled.views.row(r));

        const auto permuted = material_forward(p, shuffled);
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK(std::abs(base[i] - permuted[i]) < 1e-6);
    }
}

TEST_CASE("part encoder is not positive-scale invariant") {
    const ModelConfig cfg = small_config();
    const EncoderParams p = init_params(cfg, 1000);
    Rng rng(1001);
    const auto part = testutil::random_part(rng, "p", "m", cfg.d_in);
    std::vector<float> doubled = part.descriptor;
    for (auto& v : doubled) v *= 2.0f;

    const auto a = part_forward(p, part.descriptor);
    const auto b = part_forward(p, doubled);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        max_diff = std::max(max_diff, static_cast<double>(std::abs(a[i] - b[i])));
    CHECK(max_diff > 1e-4);
}

TEST_CASE("dimension mismatches are rejected") {
    const ModelConfig cfg = small_config();
    const EncoderParams p = init_params(cfg, 0);
    Rng rng(1);
    auto vs = testutil::random_viewset(rng, "m", 2, 2, cfg.d_in + 1);
    CHECK_THROWS_AS(material_forward(p, vs), DimensionMismatch);
    auto vs2 = testutil::random_viewset(rng, "m", 3, 2, cfg.d_in);
    CHECK_THROWS_AS(material_forward(p, vs2), DimensionMismatch);
    CHECK_THROWS_AS(part_forward(p, std::vector<float>(3, 0.5f)), DimensionMismatch);
}

TEST_CASE("single-pair batch gives zero loss and zero logit-scale gradient") {
    const ModelConfig cfg = small_config();
    const EncoderParams p = init_params(cfg, 1100);
    Rng rng(1101);
    Batch batch = random_batch(rng, cfg, 1);
    const auto result = batch_forward_backward(p, batch.mat_ptrs, batch.part_ptrs);
    CHECK(std::abs(result.loss) < 1e-6);
    CHECK(std::abs(result.grads.logit_scale) < 1e-9);
}

TEST_CASE("analytic gradients match central finite differences for every parameter") {
    const ModelConfig cfg = small_config();
    const double h = 1e-3;
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        Rng rng(1200 + seed);
        const EncoderParams p32 = init_params(cfg, 1300 + seed);
        EncoderParamsT<double> p = convert_params<double>(p32);
        Batch batch = random_batch(rng, cfg, 4);

        const auto result = batch_forward_backward(p, batch.mat_ptrs, batch.part_ptrs);

        std::vector<std::pair<double*, std::size_t>> tensors;
        for_each_tensor(p, [&](const std::string&, double* d, std::size_t n,
                               std::vector<std::uint32_t>) { tensors.emplace_back(d, n); });
        std::vector<std::pair<const double*, std::size_t>> grad_tensors;
        for_each_tensor(result.grads,
                        [&](const std::string&, const double* d, std::size_t n,
                            std::vector<std::uint32_t>) { grad_tensors.emplace_back(d, n); });

        double worst = 0.0;
        for (std::size_t k = 0; k < tensors.size(); ++k) {
            double* data = tensors[k].first;
            const double* grad = grad_tensors[k].first;
            for (std::size_t i = 0; i < tensors[k].second; ++i) {
                const double keep = data[i];
                data[i] = keep + h;
                const double up = batch_loss(p, batch.mat_ptrs, batch.part_ptrs);
                data[i] = keep - h;
                const double down = batch_loss(p, batch.mat_ptrs, batch.part_ptrs);
                data[i] = keep;
                worst = std::max(worst, testutil::rel_err(grad[i], (up - down) / (2 * h)));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("a small gradient step decreases the loss") {
    const ModelConfig cfg = small_config();
    EncoderParams p = init_params(cfg, 1400);
    Rng rng(1401);
    Batch batch = random_batch(rng, cfg, 4);

    const auto result = batch_forward_backward(p, batch.mat_ptrs, batch.part_ptrs);

    std::vector<std::pair<float*, std::size_t>> tensors;
    for_each_tensor(p, [&](const std::string&, float* d, std::size_t n,
                           std::vector<std::uint32_t>) { tensors.emplace_back(d, n); });
    std::vector<std::pair<const float*, std::size_t>> grads;
    for_each_tensor(result.grads, [&](const std::string&, const float* d, std::size_t n,
                                      std::vector<std::uint32_t>) { grads.emplace_back(d, n); });
    for (std::size_t k = 0; k < tensors.size(); ++k)
        for (std::size_t i = 0; i < tensors[k].second; ++i)
            tensors[k].first[i] -= 1e-3f * grads[k].first[i];

    const auto after = batch_forward_backward(p, batch.mat_ptrs, batch.part_ptrs);
    CHECK(after.loss < result.loss);
}

TEST_SUITE_END();
