#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotools/checkpoint.hpp"
#include "cotools/numerics.hpp"
#include "cotools/vocab.hpp"

namespace cotools {

// Incremental forward state (per-call KV cache). Not shared across threads.
class LmSession {
 public:
  virtual ~LmSession() = default;
  // Appends tokens and returns the hidden state at the last one.
  virtual Vec feed(std::span<const int> ids) = 0;
  virtual const std::vector<int>& ids() const = 0;
  Vec feed_one(int id) { return feed(std::span<const int>(&id, 1)); }
};

// Frozen decoder-only LM seen through hidden states and a greedy head.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const Vocab& vocab() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t context_limit() const = 0;
  // Hidden state at every position, one row per token.
  virtual Mat hidden_states(std::span<const int> ids) const = 0;
  // Greedy argmax of the LM head; ties go to the lowest id.
  virtual int next_token(const Vec& h) const = 0;
  virtual std::unique_ptr<LmSession> session() const = 0;
  virtual std::string content_hash() const = 0;

  Vec hidden_state(std::span<const int> ids) const;
  // hidden_state(tokenize(prompt) ++ [END]).
  Vec end_hidden(std::string_view prompt) const;
  std::vector<int> tokenize(std::string_view text) const { return vocab().tokenize(text); }
};

struct LmConfig {
  std::size_t vocab_size = 98;
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t context = 512;
  std::size_t ffn = 256;
  // Fixed gain on the exposed hidden state; the head divides it back out.
  double hidden_scale = 24.0;
  double init_std = 0.02;
};

struct LmLayer {
  Mat ln1_g, ln1_b;  // 1 x d
  Mat wqkv;          // d x 3d
  Mat wo;            // d x d
  Mat ln2_g, ln2_b;  // 1 x d
  Mat w_up;          // d x ffn
  Mat w_down;        // ffn x d
};

struct LmWeights {
  LmConfig cfg;
  std::uint64_t seed = 0;
  Mat emb;  // vocab x d
  std::vector<LmLayer> layers;
  Mat lnf_g, lnf_b;  // 1 x d
  Mat head;          // d x vocab

  std::vector<NamedTensor> to_tensors() const;
  // Parameter pointers in the same order as to_tensors().
  std::vector<Mat*> params();
  std::vector<const Mat*> params() const;
};

void validate_lm_config(const LmConfig& cfg);
LmWeights init_lm(const LmConfig& cfg, std::uint64_t seed);
LmWeights zeros_like(const LmWeights& w);
std::string lm_hash(const LmWeights& w);
void save_lm(const std::filesystem::path& path, const LmWeights& w, Dtype dtype = Dtype::F64,
             const std::string& meta_json = "{}");
LmWeights load_lm(const std::filesystem::path& path);

inline constexpr double kLayerNormEps = 1e-5;

double gelu(double x);
double gelu_grad(double x);
double alibi_slope(std::size_t head, std::size_t heads);

class TransformerLm final : public LanguageModel {
 public:
  explicit TransformerLm(LmWeights w);

  const Vocab& vocab() const override { return vocab_; }
  std::size_t dim() const override { return w_.cfg.d; }
  std::size_t context_limit() const override { return w_.cfg.context; }
  Mat hidden_states(std::span<const int> ids) const override;
  int next_token(const Vec& h) const override;
  std::unique_ptr<LmSession> session() const override;
  std::string content_hash() const override { return hash_; }

  Vec logits(const Vec& h) const;
  const LmWeights& weights() const noexcept { return w_; }

 private:
  LmWeights w_;
  Vocab vocab_;
  std::string hash_;
};

}  // namespace cotools
