#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotools/lm_train.hpp"
#include "cotools/toolpool.hpp"
#include "cotools/training.hpp"

namespace cotools {

inline constexpr std::string_view kGeneratorVersion = "gen.v1";

struct BenchSet {
  std::string name;
  std::uint64_t seed = 0;
  std::string params_json = "{}";  // generator arguments
  std::vector<AnnotatedAnswer> train, dev, test;
  ToolPool pool;
  std::vector<std::string> unseen_ids;  // tools that only test questions use

  bool is_unseen(std::string_view tool_id) const;
};

// Word problems over add/subtract/multiply/divide with four-digit operands.
BenchSet gen_arith4(std::size_t n_train, std::size_t n_dev, std::size_t n_test, std::uint64_t seed);
// All n problems go to train when n < 10, else an 80/10/10 split.
BenchSet gen_arith4(std::size_t n, std::uint64_t seed);

// Chains of exactly `hops` calls over the 13 numeric tools.
BenchSet gen_func13(std::size_t n_train, std::size_t n_dev, std::size_t n_test, std::size_t hops,
                    std::uint64_t seed);

struct KbOptions {
  std::size_t n_tools = 84;
  std::size_t n_unseen = 20;
  std::size_t n_train = 1000;
  std::size_t n_dev = 0;
  std::size_t n_test = 170;          // seen-tool test questions
  std::size_t n_test_unseen = 100;   // spread over the unseen tools
  double noise = 0.0;
};

void validate_kb_options(const KbOptions& o);
BenchSet gen_kbsim(const KbOptions& o, std::uint64_t seed);

// One arith problem rendered the way the generation and calling prompts
// show it; used to pretrain the toy LM.
std::vector<std::string> arith4_pretrain_docs(std::size_t n_problems, std::uint64_t seed);
// Each sequence is doc + "\n\n" + doc + END, both docs drawn uniformly.
SequenceSampler packed_pair_sampler(std::vector<std::string> docs);

struct ArithLmOptions {
  LmConfig lm;
  PretrainConfig pretrain{3000, 16, 3e-3, 0};
  std::size_t n_problems = 20000;
  std::uint64_t seed = 0;  // init, corpus and sampling all derive from it
};

// Fresh LM trained on packed arith documents. Deterministic in the options.
LmWeights pretrain_arith4_lm(const ArithLmOptions& o,
                             const std::function<void(const PretrainRecord&, const LmWeights&)>& on_step = {});
std::string arith_lm_options_json(const ArithLmOptions& o);

std::string annotated_to_json(const AnnotatedAnswer& a);
AnnotatedAnswer annotated_from_json(std::string_view line);

// Writes pool.json, {train,dev,test}.jsonl and manifest.json into dir.
void save_bench(const std::filesystem::path& dir, const BenchSet& set);
BenchSet load_bench(const std::filesystem::path& dir);
std::string bench_manifest_json(const BenchSet& set);

// Number after the last "The answer is", trailing period dropped.
std::optional<double> parse_final_answer(std::string_view text);

// Rounds the shortest decimal form of x half away from zero, so 3.145 -> 3.15.
double round_decimal(double x, int places);
bool round_match(std::optional<double> pred, double gold);
bool approx_match(std::optional<double> pred, double gold);
double eval_round_acc(const std::vector<std::optional<double>>& preds, const std::vector<double>& golds);
double eval_approx_acc(const std::vector<std::optional<double>>& preds, const std::vector<double>& golds);

// Fraction of lists whose first min(k, size) entries contain the gold id.
std::vector<double> eval_topk(const std::vector<std::vector<std::string>>& ranked,
                              const std::vector<std::string>& golds, const std::vector<std::size_t>& ks);

struct ErrorHistogram {
  std::vector<std::pair<std::string, std::size_t>> counts;  // descending count, then id
  std::size_t errors = 0;
  double concentration = 0.0;  // share of errors taken by the 10 most-predicted tools
};

ErrorHistogram error_histogram(const std::vector<std::vector<std::string>>& ranked,
                               const std::vector<std::string>& golds);
// Ranks every tool by how often it is gold in training; ties by id.
std::vector<std::string> frequency_ranking(const std::vector<std::string>& train_golds, const ToolPool& pool);

// Ranked tool ids for each query vector against the index.
std::vector<std::vector<std::string>> rank_all(const std::vector<Vec>& query_vecs, const ToolIndex& index);

struct SweepPoint {
  std::size_t size;
  double top1;
  double top5;
};

// For each size, every query ranks its gold plus the first size-1 other tools
// of one fixed seeded permutation, so pools are nested and keep the gold.
std::vector<SweepPoint> sweep_pool_size(const std::vector<Vec>& query_vecs, const std::vector<std::string>& golds,
                                        const ToolIndex& index, const std::vector<std::size_t>& sizes,
                                        std::uint64_t seed);

struct EvalReport {
  std::string metric;
  std::vector<std::size_t> ks;
  std::vector<double> accuracies;
  std::map<std::string, double> extra;
  ErrorHistogram histogram;
  std::map<std::string, std::string> fingerprint;  // artifact name -> hash
};

std::string eval_report_json(const EvalReport& r);

struct ProbeReport {
  std::vector<double> raw;
  std::vector<double> zscore;       // empty when W_dim has zero variance
  std::vector<double> sorted_desc;  // z-scored values (raw when degenerate), descending
  std::vector<std::size_t> key_dims;
  bool degenerate = false;
  double full_top1 = 0, full_top5 = 0;
  double masked_top1 = 0, masked_top5 = 0;
};

// A copy of w with every dimension outside `keep` set to zero.
DimWeight masked_dim_weight(const DimWeight& w, const std::vector<std::size_t>& keep);
std::vector<std::size_t> key_dimensions(const DimWeight& w);

// Top-1/top-5 retrieval of queries against the pool with the retriever's own
// W_dim and with W_dim restricted to its key dimensions.
ProbeReport probe_wdim(const Retriever& r, const RetrieverFeatures& eval, const ToolPool& pool);
std::string probe_report_json(const std::vector<std::pair<std::string, ProbeReport>>& reports);

}  // namespace cotools
