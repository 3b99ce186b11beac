#include <benchmark/benchmark.h>

#include <vector>

#include "ocl/kernels.hpp"
#include "ocl/losses.hpp"
#include "ocl/matrix.hpp"
#include "ocl/random.hpp"

namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  ocl::Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * 128, 1);
  const auto b = random_buffer(128 * 128, 2);
  std::vector<double> c(n * 128);
  for (auto _ : state) {
    ocl::kernels::serial::matmul(a.data(), b.data(), c.data(), n, 128, 128);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 128 * 128));
}

void BM_MatmulParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * 128, 1);
  const auto b = random_buffer(128 * 128, 2);
  std::vector<double> c(n * 128);
  for (auto _ : state) {
    ocl::kernels::parallel::matmul(a.data(), b.data(), c.data(), n, 128, 128);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 128 * 128));
}

void BM_MatmulTransposedSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * 128, 3);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    ocl::kernels::serial::matmul_transposed_b(a.data(), a.data(), c.data(), n, 128, n);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_MatmulTransposedParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * 128, 3);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    ocl::kernels::parallel::matmul_transposed_b(a.data(), a.data(), c.data(), n, 128, n);
    benchmark::DoNotOptimize(c.data());
  }
}

// Ordinal contrastive loss on one batch; the argument pair is (batch, threads).
void BM_OrdinalContrastive(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ocl::kernels::set_thread_count(static_cast<int>(state.range(1)));
  ocl::Rng rng(4);
  ocl::Matrix z(n, 128, random_buffer(n * 128, 5));
  z = ocl::l2_normalize_rows(z);
  std::vector<std::size_t> labels(n);
  for (auto& y : labels) y = static_cast<std::size_t>(rng.below(4));
  for (auto _ : state) {
    auto result = ocl::losses::ordinal_contrastive_loss(z, labels, 0.1);
    benchmark::DoNotOptimize(result.loss);
  }
  ocl::kernels::set_thread_count(0);
}

}  // namespace

BENCHMARK(BM_MatmulSerial)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_MatmulParallel)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_MatmulTransposedSerial)->Arg(512)->Arg(2048);
BENCHMARK(BM_MatmulTransposedParallel)->Arg(512)->Arg(2048);
BENCHMARK(BM_OrdinalContrastive)->Args({1024, 1})->Args({1024, 0})->Args({4096, 1})->Args({4096, 0});

BENCHMARK_MAIN();
