#include "ninepatch/mlp.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace ninepatch;
using namespace ninepatch::mlp;

namespace {

Matrix random_batch(Eigen::Index rows, Eigen::Index cols) {
    Rng rng(3);
    Matrix x(rows, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    return x;
}

// One SGD step of the standard 900-512-512-2 network on a 128-patch batch.
void BM_TrainStep(benchmark::State& state) {
    MlpConfig c = MlpConfig::standard(900, 2);
    c.lr0 = 0.1;
    Mlp m = init(c);
    const Matrix x = random_batch(c.batch_size, 900);
    std::vector<int> y(static_cast<std::size_t>(c.batch_size));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
    for (auto _ : state) benchmark::DoNotOptimize(train_step(m, x, y, 0.01, 0.5));
    state.SetItemsProcessed(state.iterations() * c.batch_size);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_ForwardBatch(benchmark::State& state) {
    const Mlp m = init(MlpConfig::standard(900, 2));
    const Matrix x = random_batch(state.range(0), 900);
    for (auto _ : state) benchmark::DoNotOptimize(forward_batch(m, x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(9)->Arg(900)->Unit(benchmark::kMicrosecond);

void BM_DrawMasks(benchmark::State& state) {
    const MlpConfig c = MlpConfig::standard(900, 2);
    Rng rng(5);
    for (auto _ : state) benchmark::DoNotOptimize(draw_masks(c, c.batch_size, rng));
}
BENCHMARK(BM_DrawMasks)->Unit(benchmark::kMicrosecond);

void BM_GradientCheck(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(gradient_check());
}
BENCHMARK(BM_GradientCheck)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
