#include <benchmark/benchmark.h>

#include "matclip/descriptor.hpp"
#include "matclip/maskcrop.hpp"
#include "matclip/rng.hpp"
#include "matclip/subspace.hpp"

using namespace matclip;

namespace {

Mask random_mask(Rng& rng, int w, int h, double density) {
    Mask m(w, h);
    for (auto& b : m.bits) b = rng.next_double() < density ? 1 : 0;
    m.bits[0] = 1;
    return m;
}

void BM_LargestInscribedRectangle(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    Rng rng(11);
    const Mask m = random_mask(rng, side, side, 0.85);
    for (auto _ : state) {
        benchmark::DoNotOptimize(largest_inscribed_rectangle(m));
    }
}

void BM_ColorHistogram(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    Rng rng(12);
    Image img(side, side);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.next_below(256));
    const Mask m = random_mask(rng, side, side, 0.6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(color_histogram(img, m));
    }
}

void BM_KdTreeNearest(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int d = 8;
    Rng rng(13);
    Mat<float> pts(n, d);
    for (auto& v : pts.data) v = static_cast<float>(rng.normal());
    std::vector<std::string> ids;
    char buf[16];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "pt_%06d", i);
        ids.emplace_back(buf);
    }
    const KdTree tree = KdTree::build(ids, pts);
    std::vector<float> q(static_cast<std::size_t>(d));
    for (auto _ : state) {
        for (auto& v : q) v = static_cast<float>(rng.normal());
        benchmark::DoNotOptimize(tree.nearest(q));
    }
}

}  // namespace

BENCHMARK(BM_LargestInscribedRectangle)->Arg(128)->Arg(512);
BENCHMARK(BM_ColorHistogram)->Arg(256)->Arg(512);
BENCHMARK(BM_KdTreeNearest)->Arg(1000)->Arg(100000);
