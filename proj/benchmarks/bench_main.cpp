#include <benchmark/benchmark.h>

#include "resbound/baselines.hpp"
#include "resbound/degrade.hpp"
#include "resbound/metrics.hpp"
#include "resbound/model.hpp"
#include "resbound/phantom.hpp"
#include "resbound/report.hpp"
#include "resbound/rng.hpp"
#include "resbound/train.hpp"
#include "resbound/volume.hpp"

using namespace resbound;

namespace {

Image random_image(uint64_t seed, int h, int w) {
  rng::Stream s(seed, 0xBE, 0);
  Image img(h, w);
  for (float& v : img.pix) v = float(s.uniform(0.0, 1.0));
  return img;
}

Volume random_volume(uint64_t seed, int d, int h, int w) {
  rng::Stream s(seed, 0xBF, 0);
  Volume v(d, h, w);
  for (float& x : v.voxels) x = float(s.uniform(0.0, 1.0));
  return v;
}

const Volume& bench_volume() {
  static const Volume v = random_volume(1, 8, 64, 64);
  return v;
}

const ModelParams& bench_params() {
  static const ModelParams p = init_params(3);
  return p;
}

}  // namespace

static void BM_phantom_case(benchmark::State& state) {
  PhantomSpec spec;
  spec.seed = 11;
  for (auto _ : state) {
    PhantomCase c = generate_phantom(spec);
    benchmark::DoNotOptimize(c.clean.voxels.data());
  }
}
BENCHMARK(BM_phantom_case)->Unit(benchmark::kMillisecond);

static void BM_degrade_volume(benchmark::State& state) {
  DegradeConfig cfg;
  const DegradationRecipe recipe = sample_recipe(cfg, 17);
  for (auto _ : state) {
    Volume out = apply_recipe(bench_volume(), recipe);
    benchmark::DoNotOptimize(out.voxels.data());
  }
}
BENCHMARK(BM_degrade_volume)->Unit(benchmark::kMillisecond);

static void BM_restore_slice(benchmark::State& state) {
  const SliceTriplet t = slice_triplet(bench_volume(), 4);
  for (auto _ : state) {
    RestorationOutput out = forward(t, bench_params());
    benchmark::DoNotOptimize(out.restored.pix.data());
  }
}
BENCHMARK(BM_restore_slice)->Unit(benchmark::kMillisecond);

static void BM_restore_volume(benchmark::State& state) {
  for (auto _ : state) {
    Volume out = restore_volume(bench_volume(), bench_params());
    benchmark::DoNotOptimize(out.voxels.data());
  }
}
BENCHMARK(BM_restore_volume)->Unit(benchmark::kMillisecond);

static void BM_gaussian_baseline(benchmark::State& state) {
  const Image img = random_image(5, 64, 64);
  for (auto _ : state) {
    Image out = gaussian_baseline(img, 1.0);
    benchmark::DoNotOptimize(out.pix.data());
  }
}
BENCHMARK(BM_gaussian_baseline);

static void BM_nlm_baseline(benchmark::State& state) {
  const Image img = random_image(6, 64, 64);
  const BaselineParams p;
  for (auto _ : state) {
    Image out = nlm_baseline(img, p);
    benchmark::DoNotOptimize(out.pix.data());
  }
}
BENCHMARK(BM_nlm_baseline)->Unit(benchmark::kMillisecond);

static void BM_ssim_masked(benchmark::State& state) {
  const Image a = random_image(7, 64, 64);
  const Image b = random_image(8, 64, 64);
  const std::vector<uint8_t> mask(a.size(), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim_masked(a, b, mask.data()));
  }
}
BENCHMARK(BM_ssim_masked);

static void BM_psnr(benchmark::State& state) {
  const Image a = random_image(9, 64, 64);
  const Image b = random_image(10, 64, 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(psnr_db(a, b));
  }
}
BENCHMARK(BM_psnr);

static void BM_sha256_1mib(benchmark::State& state) {
  std::vector<unsigned char> buf(1 << 20, 0x5A);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sha256_hex(buf.data(), buf.size()));
  }
  state.SetBytesProcessed(int64_t(state.iterations()) * int64_t(buf.size()));
}
BENCHMARK(BM_sha256_1mib);

BENCHMARK_MAIN();
