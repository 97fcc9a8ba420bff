#include <benchmark/benchmark.h>

#include <random>

#include "mova/hash.hpp"
#include "mova/lexicon.hpp"
#include "mova/metrics.hpp"
#include "mova/parse.hpp"
#include "mova/prompts.hpp"

using namespace mova;

namespace {

TokenPosition worked_example() {
  TokenPosition position;
  position.token = "1";
  position.top = {{"1", -0.36}, {"0", -1.20}, {"\"", -9.5}};
  return position;
}

std::string mft_block() {
  return "{\n"
         "    \"Care/Harm\": 0,\n"
         "    \"Fairness/Cheating\": 0,\n"
         "    \"Loyalty/Betrayal\": 0,\n"
         "    \"Authority/Subversion\": 0,\n"
         "    \"Sanctity/Degradation\": 1\n"
         "}";
}

void BM_ExtractLabelProbability(benchmark::State& state) {
  const auto position = worked_example();
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_label_probability(position, "1").u_m);
  }
}
BENCHMARK(BM_ExtractLabelProbability);

void BM_ParseLabelBlock(benchmark::State& state) {
  const auto& fw = FrameworkRegistry::get("mft");
  const auto raw = mft_block();
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_label_block(raw, fw).labels.values[4]);
  }
}
BENCHMARK(BM_ParseLabelBlock);

void BM_Auc(benchmark::State& state) {
  const long n = state.range(0);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> scores(n);
  std::vector<int> gold(n);
  for (long i = 0; i < n; ++i) {
    scores[i] = unit(rng);
    gold[i] = int(rng() % 2);
  }
  gold[0] = 1;
  gold[n - 1] = 0;
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, gold));
}
BENCHMARK(BM_Auc)->Arg(100)->Arg(1000)->Arg(10000);

void BM_WilcoxonExact(benchmark::State& state) {
  const long n = state.range(0);
  std::mt19937 rng(11);
  std::vector<double> x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = double(rng() % 50);
    y[i] = double(rng() % 50);
  }
  x[0] = y[0] + 1;  // never degenerate
  for (auto _ : state)
    benchmark::DoNotOptimize(wilcoxon_signed_rank(x, y, Alternative::greater).p_value);
}
BENCHMARK(BM_WilcoxonExact)->Arg(10)->Arg(20);

void BM_WilcoxonNormal(benchmark::State& state) {
  const long n = state.range(0);
  std::mt19937 rng(13);
  std::vector<double> x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = double(rng() % 50);
    y[i] = double(rng() % 50);
  }
  x[0] = y[0] + 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(wilcoxon_signed_rank(x, y, Alternative::greater).p_value);
}
BENCHMARK(BM_WilcoxonNormal)->Arg(100)->Arg(1000);

void BM_Featurize(benchmark::State& state) {
  Lexicon lexicon;
  std::vector<std::string> words;
  for (int i = 0; i < 300; ++i) words.push_back("word" + std::to_string(i));
  lexicon.add("Care/Harm", words);
  std::string text;
  for (int i = 0; i < 60; ++i) text += "word" + std::to_string(i * 7 % 400) + " ";
  for (auto _ : state)
    benchmark::DoNotOptimize(featurize(text, lexicon, "Care/Harm").size());
}
BENCHMARK(BM_Featurize);

void BM_RenderAllAtOnce(benchmark::State& state) {
  PromptLibrary lib(MOVA_TEST_TEMPLATES);
  const auto& fw = FrameworkRegistry::get("mft");
  const std::string text = "a benchmark input of ordinary length for rendering";
  for (auto _ : state) benchmark::DoNotOptimize(lib.all_at_once(fw, text).size());
}
BENCHMARK(BM_RenderAllAtOnce);

void BM_Sha256(benchmark::State& state) {
  const std::string payload(state.range(0), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(sha256_hex(payload));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 10)->Arg(1 << 16);

}  // namespace

BENCHMARK_MAIN();
