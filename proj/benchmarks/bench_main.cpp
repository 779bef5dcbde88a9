#include <benchmark/benchmark.h>

#include "cotools/bench.hpp"
#include "cotools/cotd.hpp"

using namespace cotools;

namespace {

const TransformerLm& tiny_lm() {
  static const TransformerLm lm(init_lm(LmConfig{}, 1));
  return lm;
}

Vec random_vec(std::size_t n, Rng& rng) {
  Vec v(n);
  for (double& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

const std::string kPrompt =
    "Q: Ann has 2468 coins. Then gets 136 more. How many coins are left?\nA: Let's think step by step.";

}  // namespace

static void BM_EndHidden(benchmark::State& state) {
  const std::string prompt = kPrompt.substr(0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tiny_lm().end_hidden(prompt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EndHidden)->Arg(16)->Arg(64);

// Incremental decoding: one token on top of a cached prefix.
static void BM_SessionStep(benchmark::State& state) {
  const auto ids = tiny_lm().vocab().tokenize(kPrompt);
  for (auto _ : state) {
    state.PauseTiming();
    auto s = tiny_lm().session();
    s->feed(ids);
    state.ResumeTiming();
    benchmark::DoNotOptimize(s->feed_one(ids[0]));
  }
}
BENCHMARK(BM_SessionStep);

static void BM_JudgeScore(benchmark::State& state) {
  Rng rng(2);
  const JudgeHead j = init_judge(64, 256, rng);
  const Vec h = random_vec(64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(judge_score(h, j));
}
BENCHMARK(BM_JudgeScore);

static void BM_EncodeQuery(benchmark::State& state) {
  Rng rng(3);
  const Retriever r = init_retriever(64, 256, rng);
  const Vec h = random_vec(64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(encode_query(h, r));
}
BENCHMARK(BM_EncodeQuery);

static void BM_ScoreAndRank(benchmark::State& state) {
  Rng rng(4);
  std::vector<std::pair<std::string, Vec>> tools;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    tools.emplace_back("t" + std::to_string(i), l2_normalize(random_vec(64, rng)));
  }
  const Vec q = l2_normalize(random_vec(64, rng));
  for (auto _ : state) benchmark::DoNotOptimize(score_and_rank(q, tools));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreAndRank)->Arg(84)->Arg(1024);

static void BM_RetrieverBackward(benchmark::State& state) {
  Rng rng(5);
  const Retriever r = init_retriever(64, 256, rng);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<Vec> qh, th;
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < n; ++i) {
    qh.push_back(random_vec(64, rng));
    th.push_back(random_vec(64, rng));
    gold.push_back(i);
  }
  RetrieverGrad g(r);
  for (auto _ : state) benchmark::DoNotOptimize(retriever_backward(qh, th, gold, r, g));
}
BENCHMARK(BM_RetrieverBackward)->Arg(16);

static void BM_LmTrainStep(benchmark::State& state) {
  const LmWeights w = init_lm(LmConfig{}, 6);
  LmWeights grad = zeros_like(w);
  const std::vector<std::vector<int>> seqs(4, tiny_lm().vocab().tokenize(kPrompt));
  for (auto _ : state) benchmark::DoNotOptimize(lm_loss_and_grad(w, seqs, &grad));
}
BENCHMARK(BM_LmTrainStep);

static void BM_ParseCall(benchmark::State& state) {
  ToolPool pool;
  for (const auto& t : arith4_tools()) pool.add(t);
  const ToolSpec& add = pool.get("add");
  for (auto _ : state) benchmark::DoNotOptimize(parse_call(R"(add(a="2468", b="136"))", add));
}
BENCHMARK(BM_ParseCall);
BENCHMARK_MAIN();
