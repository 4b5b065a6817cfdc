#include <benchmark/benchmark.h>

#include "matclip/encoder.hpp"
#include "matclip/rng.hpp"

using namespace matclip;

namespace {

MaterialViewSet make_viewset(Rng& rng, int n_env, int n_shapes, int d_in) {
    MaterialViewSet vs;
    vs.material_id = "bench";
    vs.n_env = n_env;
    vs.n_shapes = n_shapes;
    vs.views = Mat<float>(n_env * n_shapes, d_in);
    for (auto& v : vs.views.data) v = static_cast<float>(rng.normal() * 0.2);
    return vs;
}

void BM_MaterialForward42Views(benchmark::State& state) {
    ModelConfig cfg;  // defaults; full 7x6 view grid
    const EncoderParams params = init_params(cfg, 1);
    Rng rng(2);
    const MaterialViewSet vs = make_viewset(rng, 7, 6, cfg.d_in);
    for (auto _ : state) {
        benchmark::DoNotOptimize(material_forward(params, vs));
    }
}

void BM_PartForward(benchmark::State& state) {
    ModelConfig cfg;
    const EncoderParams params = init_params(cfg, 1);
    Rng rng(3);
    std::vector<float> desc(static_cast<std::size_t>(cfg.d_in));
    for (auto& v : desc) v = static_cast<float>(rng.normal() * 0.2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(part_forward(params, desc));
    }
}

void BM_BatchForwardBackward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    ModelConfig cfg;
    cfg.n_views = 6;
    const EncoderParams params = init_params(cfg, 1);
    Rng rng(4);
    std::vector<MaterialViewSet> viewsets;
    std::vector<PartSample> parts;
    for (int i = 0; i < batch; ++i) {
        viewsets.push_back(make_viewset(rng, 3, 2, cfg.d_in));
        PartSample part;
        part.descriptor.resize(static_cast<std::size_t>(cfg.d_in));
        for (auto& v : part.descriptor) v = static_cast<float>(rng.normal() * 0.2);
        parts.push_back(std::move(part));
    }
    std::vector<const MaterialViewSet*> mats;
    std::vector<const PartSample*> part_ptrs;
    for (int i = 0; i < batch; ++i) {
        mats.push_back(&viewsets[static_cast<std::size_t>(i)]);
        part_ptrs.push_back(&parts[static_cast<std::size_t>(i)]);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(batch_forward_backward(params, mats, part_ptrs));
    }
}

}  // namespace

BENCHMARK(BM_MaterialForward42Views);
BENCHMARK(BM_PartForward);
BENCHMARK(BM_BatchForwardBackward)->Arg(8)->Arg(32);
