#include "cotools/pipeline.hpp"

#include <charconv>

namespace cotools {

std::unique_ptr<TransformerLm> load_language_model(const std::string& spec, std::optional<double> hidden_scale) {
  static constexpr std::string_view kRandom = "random:";
  LmWeights w;
  if (spec.rfind(kRandom, 0) == 0) {
    std::uint64_t seed = 0;
    const char* b = spec.data() + kRandom.size();
    const char* e = spec.data() + spec.size();
    const auto res = std::from_chars(b, e, seed);
    if (res.ec != std::errc() || res.ptr != e) throw Error(Errc::ConfigError, "bad LM spec '" + spec + "'");
    LmConfig cfg;
    if (hidden_scale) cfg.hidden_scale = *hidden_scale;
    w = init_lm(cfg, seed);
  } else {
    w = load_lm(spec);
    if (hidden_scale) {
      w.cfg.hidden_scale = *hidden_scale;
      validate_lm_config(w.cfg);
    }
  }
  return std::make_unique<TransformerLm>(std::move(w));
}

const std::vector<AnnotatedAnswer>& bench_split(const BenchSet& set, const std::string& split) {
  if (split == "train") return set.train;
  if (split == "dev") return set.dev;
  if (split == "test") return set.test;
  throw Error(Errc::ConfigError, "unknown split '" + split + "'");
}

JudgeHead initial_judge(std::size_t dim, const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "judge.init"));
  return init_judge(dim, cfg.intermediate, rng);
}

Retriever initial_retriever(std::size_t dim, const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "retriever.init"));
  return init_retriever(dim, cfg.intermediate, rng);
}

JudgeRun train_judge_on(const std::vector<AnnotatedAnswer>& train, const std::vector<AnnotatedAnswer>& eval,
                        const LanguageModel& lm, const PromptTemplates& templates, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  const JudgeFeatures feats = judge_features(make_judge_examples(train, lm, templates), lm);
  JudgeRun run{start_judge_training(initial_judge(lm.dim(), cfg), cfg), {}, 1.0};
  run.positive_weight = judge_positive_weight(feats, cfg.pos_weight_cap);
  run_judge_training(run.state, feats, cfg, hooks);
  if (!eval.empty()) {
    const JudgeFeatures ef = judge_features(make_judge_examples(eval, lm, templates), lm);
    run.dev = judge_metrics(run.state.judge, ef, cfg.theta);
  }
  return run;
}

RetrievalEval evaluate_retrieval(const Retriever& r, const RetrieverFeatures& f, const ToolPool& pool,
                                 const std::vector<std::size_t>& ks) {
  const ToolIndex index = build_tool_index_from_hidden(pool, f.tool_hidden, r, "eval");
  std::vector<Vec> qs;
  qs.reserve(f.query_hidden.size());
  for (const auto& h : f.query_hidden) qs.push_back(encode_query(h, r));
  RetrievalEval out;
  out.ranked = rank_all(qs, index);
  out.golds = f.gold;
  out.topk = eval_topk(out.ranked, out.golds, ks);
  return out;
}

PipelineEval evaluate_pipeline(const std::vector<AnnotatedAnswer>& items, const CotoolsComponents& c,
                               const DecodeLimits& limits) {
  if (items.empty()) throw Error(Errc::EmptyTestSet, "no test items");
  PipelineEval out;
  std::vector<std::optional<double>> preds;
  std::vector<double> golds;
  for (const auto& a : items) {
    const auto gold = parse_number(a.gold_answer);
    if (!gold) throw Error(Errc::InvalidArgument, "non-numeric gold answer in " + a.id);
    DecodeTrace t = generate_with_tools(a.query, c, limits);
    PipelineCase pc{a.id, t.final_answer, parse_final_answer(t.final_answer), *gold, t.tool_calls, t.truncated};
    preds.push_back(pc.pred);
    golds.push_back(pc.gold);
    out.cases.push_back(std::move(pc));
    out.traces.push_back(std::move(t));
  }
  out.round_acc = eval_round_acc(preds, golds);
  out.approx_acc = eval_approx_acc(preds, golds);
  return out;
}

}  // namespace cotools
