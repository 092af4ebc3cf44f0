#include "ninepatch/imageproc.hpp"
#include "ninepatch/patchgen.hpp"
#include "ninepatch/rng.hpp"

#include <benchmark/benchmark.h>

using namespace ninepatch;

namespace {

imageproc::GrayImage noise(int side) {
    Rng rng(1);
    imageproc::GrayImage img(side, side);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

void BM_Gaussian9(benchmark::State& state) {
    const auto img = noise(static_cast<int>(state.range(0)));
    const auto k = imageproc::gaussian_kernel(9, 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(imageproc::convolve(img, k));
}
BENCHMARK(BM_Gaussian9)->Arg(60)->Arg(250);

void BM_SobelMagnitude(benchmark::State& state) {
    const auto img = noise(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(imageproc::sobel_magnitude(img));
}
BENCHMARK(BM_SobelMagnitude)->Arg(60)->Arg(250);

void BM_Canny(benchmark::State& state) {
    const auto img = noise(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(imageproc::canny(img));
}
BENCHMARK(BM_Canny)->Arg(60)->Arg(250);

void BM_ResizeBilinear(benchmark::State& state) {
    const auto img = noise(250);
    for (auto _ : state) benchmark::DoNotOptimize(imageproc::resize_bilinear(img, 60, 60));
}
BENCHMARK(BM_ResizeBilinear);

void BM_NinePatch(benchmark::State& state) {
    const auto img = noise(60);
    for (auto _ : state) benchmark::DoNotOptimize(patchgen::grid_patches(img, {}));
}
BENCHMARK(BM_NinePatch);

void BM_EdgePatches(benchmark::State& state) {
    const auto img = noise(60);
    const auto blurred = imageproc::convolve(imageproc::sobel_magnitude(img), imageproc::gaussian_kernel(9, 2.0));
    const auto mask = imageproc::threshold_mask(blurred, 0.2);
    for (auto _ : state) benchmark::DoNotOptimize(patchgen::edge_patches(img, mask, 13));
}
BENCHMARK(BM_EdgePatches);

}  // namespace

BENCHMARK_MAIN();
