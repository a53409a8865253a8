#include <benchmark/benchmark.h>

#include "gradapt/dataset.hpp"
#include "gradapt/transport.hpp"

using namespace gradapt;

namespace {

PointCloud moon_cloud(int n, std::uint64_t seed) {
    return cloud_from_domain(make_two_moons(n, 0.1, seed));
}

}  // namespace

static void BM_ExactWasserstein(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    PointCloud a = moon_cloud(n, 1);
    PointCloud b = moon_cloud(n, 2);
    for (auto _ : state) {
        ExactResult r = exact_wasserstein(a, b, 2.0);
        benchmark::DoNotOptimize(r.distance);
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_ExactWasserstein)->RangeMultiplier(2)->Range(32, 512)->Complexity();

static void BM_SinkhornWasserstein(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    PointCloud a = moon_cloud(n, 1);
    PointCloud b = moon_cloud(n, 2);
    const double reg = sinkhorn_default_reg(a, b, 2.0);
    for (auto _ : state) {
        SinkhornResult r = sinkhorn_wasserstein(a, b, 2.0, reg, 2000, 1e-6);
        benchmark::DoNotOptimize(r.distance);
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_SinkhornWasserstein)->RangeMultiplier(2)->Range(32, 256)->Complexity();

static void BM_GeodesicPath(benchmark::State& state) {
    Domain src = make_two_moons(100, 0.1, 1);
    Domain tgt = rotate_domain(make_two_moons(100, 0.1, 2), 90.0);
    for (auto _ : state) {
        DomainPath path = make_geodesic_path(src, tgt, 10, true, 2.0);
        benchmark::DoNotOptimize(path.domains.size());
    }
}
BENCHMARK(BM_GeodesicPath);
