#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cotools/checkpoint.hpp"
#include "cotools/numerics.hpp"

namespace cotools {

// Tool Judge: score = sigmoid(down^T (silu(gate^T h) * up^T h)).
struct JudgeHead {
  Mat gate;  // d x D
  Mat up;    // d x D
  Mat down;  // D x 1
};

// Query/Tool encoder: norm(W_dim * (h + down^T (silu(gate^T h) * up^T h))).
struct EncoderHead {
  Mat gate;  // d x D
  Mat up;    // d x D
  Mat down;  // D x d
};

struct DimWeight {
  Vec w;  // length d, starts at all ones
};

using SharedDimWeight = std::shared_ptr<DimWeight>;

// Both encoders reference one DimWeight instance.
struct Retriever {
  EncoderHead query;
  EncoderHead tool;
  SharedDimWeight wdim;
};

inline constexpr double kAdapterInitStd = 0.02;
inline constexpr double kDefaultTheta = 0.5;

JudgeHead init_judge(std::size_t d, std::size_t D, Rng& rng);
EncoderHead init_encoder(std::size_t d, std::size_t D, Rng& rng);
SharedDimWeight make_dim_weight(std::size_t d);
Retriever init_retriever(std::size_t d, std::size_t D, Rng& rng);

void validate_judge(const JudgeHead& j);
void validate_encoder(const EncoderHead& e);

double judge_logit(const Vec& h, const JudgeHead& judge);
double judge_score(const Vec& h, const JudgeHead& judge);

Vec encode(const Vec& h, const EncoderHead& enc, const DimWeight& wdim);
inline Vec encode_query(const Vec& h, const Retriever& r) { return encode(h, r.query, *r.wdim); }
inline Vec encode_tool(const Vec& h, const Retriever& r) { return encode(h, r.tool, *r.wdim); }

struct ScoredTool {
  std::string tool_id;
  double score;
};

// Dot products, sorted by descending score then ascending tool_id.
std::vector<ScoredTool> score_and_rank(const Vec& vq, const std::vector<std::pair<std::string, Vec>>& tools);

// Gradient buffers mirror the head shapes.
struct JudgeGrad {
  Mat gate, up, down;
  explicit JudgeGrad(const JudgeHead& j);
  void zero();
};

struct RetrieverGrad {
  Mat q_gate, q_up, q_down, t_gate, t_up, t_down;
  Vec wdim;
  explicit RetrieverGrad(const Retriever& r);
  void zero();
};

// Adds weight * d(bce)/d(params) times `scale` into g; returns weight * bce.
double judge_backward(const Vec& h, int label, double weight, const JudgeHead& judge, JudgeGrad& g,
                      double scale = 1.0);

struct EncodeCache {
  GatedForward gated;
  Vec z;       // h + offset
  Vec y;       // wdim * z
  double norm;
  Vec out;     // y / norm
};

EncodeCache encode_forward(const Vec& h, const EncoderHead& enc, const DimWeight& wdim);
// Back-propagates d(loss)/d(out) into the head and the shared W_dim gradient.
void encode_backward(const EncodeCache& c, const Vec& dout, const Vec& h, const EncoderHead& enc,
                     const DimWeight& wdim, Mat& d_gate, Mat& d_up, Mat& d_down, Vec& d_wdim);

// Mean in-batch CE over queries; query i's gold is tool_h[gold[i]].
// Adds scale * gradient into g and returns the loss.
double retriever_backward(const std::vector<Vec>& query_h, const std::vector<Vec>& tool_h,
                          const std::vector<std::size_t>& gold, const Retriever& r, RetrieverGrad& g,
                          double scale = 1.0);
double retriever_loss(const std::vector<Vec>& query_h, const std::vector<Vec>& tool_h,
                      const std::vector<std::size_t>& gold, const Retriever& r);

// COTWGT01 adapter checkpoints; head names go in the header.
Checkpoint judge_checkpoint(const JudgeHead& j, std::uint64_t seed, const std::string& meta_json = "{}");
JudgeHead judge_from_checkpoint(const Checkpoint& ck);
Checkpoint retriever_checkpoint(const Retriever& r, std::uint64_t seed, const std::string& meta_json = "{}");
Retriever retriever_from_checkpoint(const Checkpoint& ck);
std::string judge_hash(const JudgeHead& j);
std::string retriever_hash(const Retriever& r);

}  // namespace cotools
