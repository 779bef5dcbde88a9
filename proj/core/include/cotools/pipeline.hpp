#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cotools/bench.hpp"
#include "cotools/cotd.hpp"

namespace cotools {

// "random:<seed>" builds a fresh LM with the default config; anything else is
// a checkpoint path. hidden_scale, when set, replaces the stored gain.
std::unique_ptr<TransformerLm> load_language_model(const std::string& spec,
                                                   std::optional<double> hidden_scale = std::nullopt);

const std::vector<AnnotatedAnswer>& bench_split(const BenchSet& set, const std::string& split);

// Fresh heads drawn from cfg.seed; the CLI and the library agree on these.
JudgeHead initial_judge(std::size_t dim, const TrainConfig& cfg);
Retriever initial_retriever(std::size_t dim, const TrainConfig& cfg);

struct JudgeRun {
  JudgeTrainState state;
  BinaryMetrics dev;  // on `eval`, when it is non-empty
  double positive_weight = 1.0;
};

JudgeRun train_judge_on(const std::vector<AnnotatedAnswer>& train, const std::vector<AnnotatedAnswer>& eval,
                        const LanguageModel& lm, const PromptTemplates& templates, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

struct RetrievalEval {
  std::vector<double> topk;  // one entry per requested k
  std::vector<std::vector<std::string>> ranked;
  std::vector<std::string> golds;
};

// Ranks every item's gold tool against an index built over the whole pool.
RetrievalEval evaluate_retrieval(const Retriever& r, const RetrieverFeatures& f, const ToolPool& pool,
                                 const std::vector<std::size_t>& ks);

struct PipelineCase {
  std::string id;
  std::string answer;
  std::optional<double> pred;
  double gold = 0.0;
  std::size_t tool_calls = 0;
  bool truncated = false;
};

struct PipelineEval {
  double round_acc = 0.0;
  double approx_acc = 0.0;
  std::vector<PipelineCase> cases;
  std::vector<DecodeTrace> traces;
};

// Decodes every item and scores the final numeric answers. With c.judge null
// the LM answers on its own.
PipelineEval evaluate_pipeline(const std::vector<AnnotatedAnswer>& items, const CotoolsComponents& c,
                               const DecodeLimits& limits);

}  // namespace cotools
