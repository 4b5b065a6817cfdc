#include <benchmark/benchmark.h>

#include <cmath>

#include "matclip/retrieval.hpp"
#include "matclip/rng.hpp"

using namespace matclip;

namespace {

std::vector<float> unit_vec(Rng& rng, int n) {
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

MaterialIndex make_index(int n, int d) {
    Rng rng(7);
    std::vector<std::pair<std::string, std::vector<float>>> pairs;
    char buf[16];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "mat_%05d", i);
        pairs.emplace_back(buf, unit_vec(rng, d));
    }
    return build_index(pairs);
}

// 1,600 materials is the chair-applicable library size the index must answer
// in well under 10 ms per query
void BM_RankTop5(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const MaterialIndex index = make_index(n, 32);
    Rng rng(8);
    const auto query = unit_vec(rng, 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rank(index, query, 5));
    }
}

void BM_BuildIndex1600(benchmark::State& state) {
    Rng rng(9);
    std::vector<std::pair<std::string, std::vector<float>>> pairs;
    char buf[16];
    for (int i = 0; i < 1600; ++i) {
        std::snprintf(buf, sizeof(buf), "mat_%05d", i);
        pairs.emplace_back(buf, unit_vec(rng, 32));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_index(pairs));
    }
}

}  // namespace

BENCHMARK(BM_RankTop5)->Arg(500)->Arg(1600)->Arg(5000);
BENCHMARK(BM_BuildIndex1600);
