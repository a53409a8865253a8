#include <benchmark/benchmark.h>

#include "gradapt/dataset.hpp"
#include "gradapt/model.hpp"
#include "gradapt/selftrain.hpp"

using namespace gradapt;

static void BM_TrainErm(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Domain d = make_two_moons(n, 0.1, 3);
    auto data = to_train_examples(d.eval_samples());
    Classifier init = Classifier::make_mlp({2, 32, 32, 1}, Activation::Relu, 7);
    TrainConfig cfg;
    cfg.epochs = 20;
    for (auto _ : state) {
        Classifier h = train_erm(init, data, LossSpec::logistic(), cfg);
        benchmark::DoNotOptimize(h.b);
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_TrainErm)->RangeMultiplier(2)->Range(50, 400)->Complexity();

static void BM_SelfTrainStep(benchmark::State& state) {
    Domain src = make_two_moons(100, 0.1, 3);
    Domain tgt = rotate_domain(make_two_moons(100, 0.1, 4), 10.0);
    TrainConfig cfg;
    cfg.epochs = 20;
    Classifier h0 = fit_source(Classifier::make_mlp({2, 32, 32, 1}, Activation::Relu, 7), src,
                               LossSpec::logistic(), cfg);
    for (auto _ : state) {
        Classifier h = self_train_step(h0, tgt.unlabeled(), LossSpec::logistic(), cfg);
        benchmark::DoNotOptimize(h.b);
    }
}
BENCHMARK(BM_SelfTrainStep);

static void BM_LipschitzBound(benchmark::State& state) {
    Classifier h = Classifier::make_mlp({2, 64, 64, 1}, Activation::Relu, 11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lipschitz_upper_bound(h));
    }
}
BENCHMARK(BM_LipschitzBound);
