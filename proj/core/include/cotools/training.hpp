#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cotools/adapters.hpp"
#include "cotools/lm.hpp"
#include "cotools/optim.hpp"

namespace cotools {

struct PromptTemplates;
class ToolPool;

// A call site inside an answer. `position` is the character offset where the
// tool result starts; the answer already contains the gold result there.
struct CallMarker {
  std::size_t position = 0;
  std::string tool_id;
  std::vector<std::string> args;
  std::string result;
};

struct AnnotatedAnswer {
  std::string id;
  std::string query;
  std::string answer;
  std::vector<CallMarker> markers;
  std::string gold_answer;
};

// Throws MarkerAlignment when markers are unordered, out of bounds, or the
// answer text at a marker does not start with the marker's result.
void validate_annotated(const AnnotatedAnswer& a);

// labels[t] = 1 when a call site begins right after token t. Only positions
// in [loss_begin, size) take part in the loss: the last prompt token and the
// answer tokens.
struct JudgeExample {
  std::vector<int> tokens;
  std::vector<std::uint8_t> labels;
  std::size_t loss_begin = 0;
};

JudgeExample make_judge_example(const AnnotatedAnswer& a, const LanguageModel& lm,
                                const PromptTemplates& templates);
std::vector<JudgeExample> make_judge_examples(const std::vector<AnnotatedAnswer>& data,
                                              const LanguageModel& lm, const PromptTemplates& templates);

// Hidden states of the loss positions, one matrix per example.
struct JudgeFeatures {
  std::vector<Mat> hidden;
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t positives() const;
  std::size_t positions() const;
};

JudgeFeatures judge_features(const std::vector<JudgeExample>& examples, const LanguageModel& lm);

struct RetrievalItem {
  std::string prompt;
  std::string gold_tool_id;
};

// One item per call site: retrieval template over (query, answer[:position]).
std::vector<RetrievalItem> make_retrieval_items(const std::vector<AnnotatedAnswer>& data,
                                                const PromptTemplates& templates);

struct RetrievalBatch {
  std::vector<std::size_t> items;        // indices into the item list
  std::vector<std::string> tools;        // deduplicated, first-appearance order
  std::vector<std::size_t> gold_index;   // per item, index into tools
};

// Shuffled batches covering every item once; the last batch may be short.
std::vector<RetrievalBatch> make_retrieval_batches(const std::vector<std::string>& gold_ids,
                                                   std::size_t batch_size, Rng& rng);

struct RetrieverFeatures {
  std::vector<Vec> query_hidden;
  std::vector<std::string> gold;
  std::map<std::string, Vec> tool_hidden;
};

// Query hidden states are end_hidden(prompt); tool hidden states are
// end_hidden(render_tool_prompt(spec)) for every tool in the pool.
RetrieverFeatures retriever_features(const std::vector<RetrievalItem>& items, const ToolPool& pool,
                                     const LanguageModel& lm);

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  std::size_t epochs = 1;
  double lr = 1e-4;
  std::size_t batch_size = 1;
  std::size_t accumulation_steps = 1;
  double wdim_lr = 0.01;
  bool tensor_weighting = true;
  std::uint64_t seed = 0;
  double theta = kDefaultTheta;
  double pos_weight_cap = 10.0;
  std::size_t intermediate = 256;
  OptimizerKind optimizer = OptimizerKind::Adam;
};

void validate_train_config(const TrainConfig& cfg);
TrainConfig judge_defaults();
// Default retriever row; "gsm8k-xl" and "funcqa" select the memory-adjusted rows.
TrainConfig retriever_defaults(std::string_view variant = "");

struct LossRecord {
  std::size_t step;   // optimizer update, 1-based
  std::size_t epoch;  // 0-based
  double loss;        // mean micro-batch loss since the previous update
  double lr;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_record;
  // Stops (resumably) once this many epochs are complete.
  std::size_t stop_after_epochs = std::numeric_limits<std::size_t>::max();
  // When set, its content hash must be unchanged at the end of training.
  const LanguageModel* frozen = nullptr;
};

struct JudgeTrainState {
  JudgeHead judge;
  Adam opt;
  Rng rng;
  std::size_t epochs_done = 0;
  std::vector<LossRecord> records;
  std::vector<double> epoch_loss;
};

JudgeTrainState start_judge_training(JudgeHead init, const TrainConfig& cfg);
void run_judge_training(JudgeTrainState& st, const JudgeFeatures& data, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});
// Weight applied to positive positions: negatives / positives, capped.
double judge_positive_weight(const JudgeFeatures& data, double cap);

struct RetrieverTrainState {
  Retriever retriever;
  Adam opt;
  Rng rng;
  std::size_t epochs_done = 0;
  std::vector<LossRecord> records;
  std::vector<double> epoch_loss;
};

RetrieverTrainState start_retriever_training(Retriever init, const TrainConfig& cfg);
void run_retriever_training(RetrieverTrainState& st, const RetrieverFeatures& data, const TrainConfig& cfg,
                            const TrainHooks& hooks = {});

// Full state (heads, optimizer moments, RNG position, logs) for resume.
void save_judge_state(const std::filesystem::path& path, const JudgeTrainState& st, const TrainConfig& cfg);
JudgeTrainState load_judge_state(const std::filesystem::path& path, const TrainConfig& cfg);
void save_retriever_state(const std::filesystem::path& path, const RetrieverTrainState& st,
                          const TrainConfig& cfg);
RetrieverTrainState load_retriever_state(const std::filesystem::path& path, const TrainConfig& cfg);

struct BinaryMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

BinaryMetrics judge_metrics(const JudgeHead& judge, const JudgeFeatures& data, double theta);

std::string loss_record_json(const LossRecord& r);

}  // namespace cotools
