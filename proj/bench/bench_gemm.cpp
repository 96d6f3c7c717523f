// Serial reference vs OpenMP GEMM on the shapes the model actually uses.
#include <benchmark/benchmark.h>

#include <vector>

#include "structgen/kernels.hpp"
#include "structgen/random.hpp"

using namespace structgen;

namespace {

struct Operands {
  kernels::GemmArgs args;
  std::vector<double> a, b, c;
};

Operands make(std::size_t m, std::size_t n, std::size_t k, bool trans_b) {
  Operands o;
  o.args.m = m;
  o.args.n = n;
  o.args.k = k;
  o.args.trans_b = trans_b;
  Rng rng(11);
  o.a.resize(m * k);
  o.b.resize(k * n);
  o.c.assign(m * n, 0.0);
  for (auto& v : o.a) v = rng.uniform(-1, 1);
  for (auto& v : o.b) v = rng.uniform(-1, 1);
  return o;
}

template <void (*Kernel)(const kernels::GemmArgs&, std::span<const double>, std::span<const double>,
                         std::span<double>)>
void run(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  Operands o = make(m, n, k, state.range(3) != 0);
  for (auto _ : state) {
    Kernel(o.args, o.a, o.b, o.c);
    benchmark::DoNotOptimize(o.c.data());
    benchmark::ClobberMemory();
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * m * n * k, benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
  state.counters["threads"] = kernels::max_threads();
}

// {m, n, k, trans_b}: LSTM gates for a batch of 32 (hidden 500, input 400+500),
// the output projection onto a 20k vocabulary, a square case, and the
// transposed product used for attention scores.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({32, 2000, 900, 0});
  b->Args({32, 20000, 500, 0});
  b->Args({256, 256, 256, 0});
  b->Args({32, 100, 500, 1});
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(run<kernels::gemm_reference>)->Name("gemm_reference")->Apply(shapes);
BENCHMARK(run<kernels::gemm_parallel>)->Name("gemm_parallel")->Apply(shapes);

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
