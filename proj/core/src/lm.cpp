#include "cotools/lm.hpp"

#include <cmath>
#include <numbers>

#include "json.hpp"
#include "lm_kernels.hpp"

namespace cotools {

using nlohmann::json;

Vec LanguageModel::hidden_state(std::span<const int> ids) const {
  if (ids.empty()) throw Error(Errc::EmptyInput, "hidden_state of empty sequence");
  const Mat hs = hidden_states(ids);
  return hs.row_vec(hs.rows() - 1);
}

Vec LanguageModel::end_hidden(std::string_view prompt) const {
  std::vector<int> ids = tokenize(prompt);
  if (ids.empty()) throw Error(Errc::EmptyInput, "end_hidden of empty prompt");
  ids.push_back(vocab().end_id());
  return hidden_state(ids);
}

void validate_lm_config(const LmConfig& c) {
  if (c.d == 0 || c.layers == 0 || c.heads == 0 || c.context == 0 || c.ffn == 0 ||
      c.vocab_size == 0) {
    throw Error(Errc::ConfigError, "LM sizes must be positive");
  }
  if (c.d % c.heads != 0) throw Error(Errc::ConfigError, "d must be divisible by heads");
  if (!(c.hidden_scale > 0) || !std::isfinite(c.hidden_scale)) {
    throw Error(Errc::ConfigError, "hidden_scale must be positive");
  }
  if (c.vocab_size != Vocab().size()) {
    throw Error(Errc::ConfigError, "vocab_size must match the character vocabulary (" +
                                       std::to_string(Vocab().size()) + ")");
  }
}

std::vector<NamedTensor> LmWeights::to_tensors() const {
  std::vector<NamedTensor> out;
  out.push_back({"emb", emb});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out.push_back({p + "ln1_g", L.ln1_g});
    out.push_back({p + "ln1_b", L.ln1_b});
    out.push_back({p + "wqkv", L.wqkv});
    out.push_back({p + "wo", L.wo});
    out.push_back({p + "ln2_g", L.ln2_g});
    out.push_back({p + "ln2_b", L.ln2_b});
    out.push_back({p + "w_up", L.w_up});
    out.push_back({p + "w_down", L.w_down});
  }
  out.push_back({"lnf_g", lnf_g});
  out.push_back({"lnf_b", lnf_b});
  out.push_back({"head", head});
  return out;
}

std::vector<Mat*> LmWeights::params() {
  std::vector<Mat*> out{&emb};
  for (auto& L : layers) {
    for (Mat* m : {&L.ln1_g, &L.ln1_b, &L.wqkv, &L.wo, &L.ln2_g, &L.ln2_b, &L.w_up, &L.w_down}) {
      out.push_back(m);
    }
  }
  out.push_back(&lnf_g);
  out.push_back(&lnf_b);
  out.push_back(&head);
  return out;
}

std::vector<const Mat*> LmWeights::params() const {
  std::vector<const Mat*> out;
  for (Mat* m : const_cast<LmWeights*>(this)->params()) out.push_back(m);
  return out;
}

static LmWeights shaped(const LmConfig& c) {
  LmWeights w;
  w.cfg = c;
  w.emb = Mat(c.vocab_size, c.d);
  for (std::size_t l = 0; l < c.layers; ++l) {
    LmLayer L;
    L.ln1_g = Mat(1, c.d, 1.0);
    L.ln1_b = Mat(1, c.d);
    L.wqkv = Mat(c.d, 3 * c.d);
    L.wo = Mat(c.d, c.d);
    L.ln2_g = Mat(1, c.d, 1.0);
    L.ln2_b = Mat(1, c.d);
    L.w_up = Mat(c.d, c.ffn);
    L.w_down = Mat(c.ffn, c.d);
    w.layers.push_back(std::move(L));
  }
  w.lnf_g = Mat(1, c.d, 1.0);
  w.lnf_b = Mat(1, c.d);
  w.head = Mat(c.d, c.vocab_size);
  return w;
}

LmWeights init_lm(const LmConfig& cfg, std::uint64_t seed) {
  validate_lm_config(cfg);
  LmWeights w = shaped(cfg);
  w.seed = seed;
  Rng rng(derive_seed(seed, "lm.init"));
  // Matrices get N(0, init_std); layer-norm gains stay 1 and biases 0.
  for (Mat* m : w.params()) {
    if (m->rows() == 1) continue;
    for (double& x : m->storage()) x = rng.normal(0.0, cfg.init_std);
  }
  return w;
}

LmWeights zeros_like(const LmWeights& w) {
  LmWeights z = shaped(w.cfg);
  z.seed = w.seed;
  for (Mat* m : z.params()) m->fill(0.0);
  return z;
}

std::string lm_hash(const LmWeights& w) {
  // The scale changes the exposed hidden states, so it is part of the content.
  auto ts = w.to_tensors();
  ts.push_back({"hidden_scale", Mat(1, 1, w.cfg.hidden_scale)});
  return tensors_hash(ts);
}

void save_lm(const std::filesystem::path& path, const LmWeights& w, Dtype dtype,
             const std::string& meta_json) {
  json meta = json::parse(meta_json);
  meta["config"] = {{"vocab_size", w.cfg.vocab_size}, {"d", w.cfg.d},
                    {"layers", w.cfg.layers},         {"heads", w.cfg.heads},
                    {"context", w.cfg.context},       {"ffn", w.cfg.ffn},
                    {"hidden_scale", w.cfg.hidden_scale}, {"init_std", w.cfg.init_std}};
  meta["lm_hash"] = lm_hash(w);
  Checkpoint ck;
  ck.kind = "lm";
  ck.seed = w.seed;
  ck.dtype = dtype;
  ck.tensors = w.to_tensors();
  ck.meta_json = meta.dump();
  save_checkpoint(path, ck);
}

LmWeights load_lm(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "lm") throw Error(Errc::CorruptCheckpoint, path.string() + " is not an LM checkpoint");
  const json meta = json::parse(ck.meta_json);
  LmConfig c;
  try {
    const auto& j = meta.at("config");
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.d = j.at("d").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.context = j.at("context").get<std::size_t>();
    c.ffn = j.at("ffn").get<std::size_t>();
    c.hidden_scale = j.at("hidden_scale").get<double>();
    c.init_std = j.at("init_std").get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, std::string("LM config: ") + e.what());
  }
  validate_lm_config(c);
  LmWeights w = shaped(c);
  w.seed = ck.seed;
  auto ps = w.params();
  if (ps.size() != ck.tensors.size()) throw Error(Errc::ShapeMismatch, "LM tensor count differs from config");
  const auto names = w.to_tensors();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ck.tensors[i].name != names[i].name) {
      throw Error(Errc::CorruptCheckpoint, "unexpected tensor " + ck.tensors[i].name);
    }
    require_shape(ck.tensors[i].value, ps[i]->rows(), ps[i]->cols(), ck.tensors[i].name);
    *ps[i] = ck.tensors[i].value;
  }
  return w;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double alibi_slope(std::size_t head, std::size_t heads) {
  return std::exp2(-8.0 * static_cast<double>(head + 1) / static_cast<double>(heads));
}

namespace {

class TransformerSession final : public LmSession {
 public:
  explicit TransformerSession(const LmWeights& w) : w_(w) {
    const auto& c = w_.cfg;
    k_.resize(c.layers);
    v_.resize(c.layers);
    for (std::size_t h = 0; h < c.heads; ++h) slopes_.push_back(alibi_slope(h, c.heads));
  }

  Vec feed(std::span<const int> ids) override {
    if (ids.empty()) throw Error(Errc::EmptyInput, "feed of zero tokens");
    Vec h;
    for (int id : ids) h = step(id);
    return h;
  }

  const std::vector<int>& ids() const override { return ids_; }

 private:
  Vec step(int id) {
    const auto& c = w_.cfg;
    if (ids_.size() >= c.context) {
      throw Error(Errc::ContextOverflow, "context limit " + std::to_string(c.context) + " reached");
    }
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw Error(Errc::OutOfRange, "token id " + std::to_string(id));
    }
    const std::size_t t = ids_.size();
    const std::size_t d = c.d;
    ids_.push_back(id);

    std::vector<double> x(w_.emb.row(id), w_.emb.row(id) + d);
    std::vector<double> a(d), qkv(3 * d), o(d), proj(d), up(c.ffn), dn(d);
    std::vector<double> probs(c.heads * (t + 1));
    for (std::size_t l = 0; l < c.layers; ++l) {
      const LmLayer& L = w_.layers[l];
      kernels::layer_norm_row(x.data(), L.ln1_g.data(), L.ln1_b.data(), a.data(), d, nullptr, nullptr);
      kernels::matmul_row(a.data(), L.wqkv, qkv.data());
      k_[l].insert(k_[l].end(), qkv.begin() + d, qkv.begin() + 2 * d);
      v_[l].insert(v_[l].end(), qkv.begin() + 2 * d, qkv.end());
      kernels::attend_row(qkv.data(), k_[l].data(), d, v_[l].data(), d, t, d, c.heads, slopes_.data(),
                          probs.data(), o.data());
      kernels::matmul_row(o.data(), L.wo, proj.data());
      for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];
      kernels::layer_norm_row(x.data(), L.ln2_g.data(), L.ln2_b.data(), a.data(), d, nullptr, nullptr);
      kernels::matmul_row(a.data(), L.w_up, up.data());
      for (double& u : up) u = gelu(u);
      kernels::matmul_row(up.data(), L.w_down, dn.data());
      for (std::size_t i = 0; i < d; ++i) x[i] += dn[i];
    }
    Vec h(d);
    kernels::layer_norm_row(x.data(), w_.lnf_g.data(), w_.lnf_b.data(), h.data(), d, nullptr, nullptr);
    for (double& v : h) v *= c.hidden_scale;
    require_finite(h, "hidden state");
    return h;
  }

  const LmWeights& w_;
  std::vector<int> ids_;
  std::vector<std::vector<double>> k_, v_;
  std::vector<double> slopes_;
};

}  // namespace

TransformerLm::TransformerLm(LmWeights w) : w_(std::move(w)) {
  validate_lm_config(w_.cfg);
  hash_ = lm_hash(w_);
}

Mat TransformerLm::hidden_states(std::span<const int> ids) const {
  if (ids.empty()) throw Error(Errc::EmptyInput, "hidden_states of empty sequence");
  if (ids.size() > w_.cfg.context) {
    throw Error(Errc::ContextOverflow, std::to_string(ids.size()) + " tokens exceed context " +
                                           std::to_string(w_.cfg.context));
  }
  TransformerSession s(w_);
  Mat out(ids.size(), w_.cfg.d);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const Vec h = s.feed_one(ids[t]);
    std::copy(h.begin(), h.end(), out.row(t));
  }
  return out;
}

Vec TransformerLm::logits(const Vec& h) const {
  if (h.size() != w_.cfg.d) {
    throw Error(Errc::DimMismatch, "hidden size " + std::to_string(h.size()) + " vs d " +
                                       std::to_string(w_.cfg.d));
  }
  const Vec z = scaled(h, 1.0 / w_.cfg.hidden_scale);
  return matvec_t(w_.head, z);
}

int TransformerLm::next_token(const Vec& h) const {
  const Vec lg = logits(h);
  std::size_t best = 0;
  for (std::size_t i = 1; i < lg.size(); ++i) {
    if (lg[i] > lg[best]) best = i;
  }
  return static_cast<int>(best);
}

std::unique_ptr<LmSession> TransformerLm::session() const {
  return std::make_unique<TransformerSession>(w_);
}

}  // namespace cotools
