// OpenMP kernels against their serial references. Arg = worker count for the
// parallel variants.
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "fixtures.hpp"
#include "spft/executor.hpp"
#include "spft/selfplay.hpp"
#include "spft/synthesizer.hpp"

using namespace spft;
using namespace spft::testing;

namespace {

struct BatchFixture {
  DbCatalog catalog;
  std::vector<EvalItem> items;

  BatchFixture() {
    catalog.add("music", fixture_db("music.sqlite"));
    Database db = music_db();
    std::vector<SynthSample> samples = synthesize_dataset(music_pool(), music_schema(), db, 200, 7);
    // half the predictions are gold itself, half another sample's query
    for (std::size_t i = 0; i < samples.size(); ++i)
      items.push_back({samples[i], i % 2 ? samples[(i + 1) % samples.size()].sql : samples[i].sql});
  }
};

const BatchFixture& batch() {
  static const BatchFixture f;
  return f;
}

struct PairFixture {
  CandidateSpace space;
  SoftmaxPolicy main{0.1}, opponent{0.1};
  std::vector<PreferencePair> pairs;

  PairFixture() {
    Rng rng(3);
    const std::size_t questions = 2000, k = 8;
    for (std::size_t q = 0; q < questions; ++q) {
      std::string key = "q" + std::to_string(q);
      std::vector<std::string> c;
      for (std::size_t j = 0; j < k; ++j) c.push_back("SELECT " + std::to_string(j));
      space.add_question(key, c, c[0]);
      std::vector<double> zm(k), zo(k);
      for (double& x : zm) x = rng.normal();
      for (double& x : zo) x = rng.normal();
      main.set_logits(key, zm);
      opponent.set_logits(key, zo);
      for (int s = 0; s < 4; ++s) {
        const std::string& y = c[rng.uniform_index(k)];
        if (y == c[0]) pairs.push_back({key, y, y, 0, PairSource::OpponentCorrect});
        else pairs.push_back({key, c[0], y, 1, PairSource::GoldFallback});
      }
    }
  }
};

const PairFixture& pairs() {
  static const PairFixture f;
  return f;
}

void BM_ClassifyBatchSerial(benchmark::State& state) {
  const auto& f = batch();
  for (auto _ : state) benchmark::DoNotOptimize(serial::classify_batch(f.catalog, f.items));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.items.size()));
}

void BM_ClassifyBatchParallel(benchmark::State& state) {
  const auto& f = batch();
  for (auto _ : state) benchmark::DoNotOptimize(classify_batch(f.catalog, f.items, {}, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.items.size()));
}

void BM_ErrorDrivenGradSerial(benchmark::State& state) {
  const auto& f = pairs();
  for (auto _ : state) benchmark::DoNotOptimize(serial::error_driven_grad(f.main, f.opponent, f.space, f.pairs, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
}

void BM_ErrorDrivenGradParallel(benchmark::State& state) {
  const auto& f = pairs();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        error_driven_grad(f.main, f.opponent, f.space, f.pairs, 1.0, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
}

void BM_ErrorDrivenLossSerial(benchmark::State& state) {
  const auto& f = pairs();
  for (auto _ : state) benchmark::DoNotOptimize(serial::error_driven_loss(f.main, f.opponent, f.space, f.pairs, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
}

void BM_ErrorDrivenLossParallel(benchmark::State& state) {
  const auto& f = pairs();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        error_driven_loss(f.main, f.opponent, f.space, f.pairs, 1.0, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.pairs.size()));
}

}  // namespace

BENCHMARK(BM_ClassifyBatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyBatchParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErrorDrivenGradSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErrorDrivenGradParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErrorDrivenLossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErrorDrivenLossParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
