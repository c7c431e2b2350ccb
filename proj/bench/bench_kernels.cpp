#include <benchmark/benchmark.h>
#include <omp.h>

#include "stance/kernels.hpp"
#include "stance/synth.hpp"

using namespace stance;

namespace {

// One generated benchmark shared by every case; built on first use.
struct Fixture {
  model::ModelParams params;
  std::vector<model::Example> examples;
  std::vector<model::EncodedInput> inputs;

  Fixture() {
    synth::SynthConfig sc;
    sc.train_records = 600;
    sc.valid_records = 50;
    sc.test_records = 50;
    const auto b = synth::generate(sc);
    const auto vocab = synth::benchmark_vocab(b);
    model::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.embedding_dim = sc.embedding_dim;
    mc.hidden = 32;
    mc.attention_dim = 32;
    mc.layers = 2;
    params = model::init_params(mc, synth::embedding_matrix(b.world, vocab, 1), 2);
    examples = model::make_examples(b.train, vocab, mc, true);
    for (const auto& ex : examples) inputs.push_back(ex.input);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::span<const model::Example> batch_of(const Fixture& f, std::int64_t n) {
  return std::span(f.examples).first(static_cast<std::size_t>(n));
}

void BM_GradientSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto batch = batch_of(f, state.range(0));
  std::vector<double> grad(f.params.size());
  kernels::GradientWorkspace ws;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_gradient_serial(f.params, batch, grad, 8, ws));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GradientParallel(benchmark::State& state) {
  const auto& f = fixture();
  const auto batch = batch_of(f, state.range(0));
  std::vector<double> grad(f.params.size());
  kernels::GradientWorkspace ws;
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::batch_gradient_parallel(f.params, batch, grad, 8, ws));
  omp_set_num_threads(kernels::max_threads());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto inputs = std::span(f.inputs).first(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::predict_serial(f.params, inputs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PredictParallel(benchmark::State& state) {
  const auto& f = fixture();
  const auto inputs = std::span(f.inputs).first(static_cast<std::size_t>(state.range(0)));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::predict_parallel(f.params, inputs));
  omp_set_num_threads(kernels::max_threads());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void thread_counts(benchmark::internal::Benchmark* b) {
  for (std::int64_t n : {32, 256})
    for (int t : {1, 2, 4}) b->Args({n, t});
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PredictSerial)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
