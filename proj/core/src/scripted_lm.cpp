#include "cotools/scripted_lm.hpp"

#include "cotools/checkpoint.hpp"

namespace cotools {

ScriptedLm::ScriptedLm(std::size_t d, std::size_t context) : d_(d), context_(context) {
  if (d == 0) throw Error(Errc::InvalidArgument, "ScriptedLm dimension must be positive");
}

void ScriptedLm::program(std::vector<int> prefix, Vec hidden, int next_id) {
  if (prefix.empty()) throw Error(Errc::EmptyInput, "ScriptedLm prefix must be non-empty");
  if (hidden.size() != d_) throw Error(Errc::DimMismatch, "ScriptedLm hidden size");
  if (next_id < 0 || static_cast<std::size_t>(next_id) >= vocab_.size()) {
    throw Error(Errc::OutOfRange, "ScriptedLm next id");
  }
  // next_token only sees the vector, so a vector must not name two tokens.
  auto [it, inserted] = by_hidden_.emplace(hidden.values(), next_id);
  if (!inserted && it->second != next_id) {
    throw Error(Errc::InvalidArgument, "ScriptedLm hidden state already scripted to another token");
  }
  by_prefix_[std::move(prefix)] = {std::move(hidden), next_id};
}

void ScriptedLm::program_text(std::string_view prefix, Vec hidden, int next_id) {
  program(vocab_.tokenize(prefix), std::move(hidden), next_id);
}

const Vec& ScriptedLm::lookup(const std::vector<int>& prefix) const {
  auto it = by_prefix_.find(prefix);
  if (it == by_prefix_.end()) {
    throw Error(Errc::UnscriptedPrefix, "no script for prefix \"" + vocab_.detokenize(prefix) + "\"");
  }
  return it->second.first;
}

Mat ScriptedLm::hidden_states(std::span<const int> ids) const {
  if (ids.empty()) throw Error(Errc::EmptyInput, "hidden_states of empty sequence");
  if (ids.size() > context_) throw Error(Errc::ContextOverflow, "ScriptedLm context");
  Mat out(ids.size(), d_);
  std::vector<int> prefix;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    prefix.push_back(ids[t]);
    const Vec& h = lookup(prefix);
    std::copy(h.begin(), h.end(), out.row(t));
  }
  return out;
}

int ScriptedLm::next_token(const Vec& h) const {
  if (h.size() != d_) throw Error(Errc::DimMismatch, "ScriptedLm next_token dimension");
  auto it = by_hidden_.find(h.values());
  if (it == by_hidden_.end()) throw Error(Errc::UnscriptedPrefix, "no script for this hidden state");
  return it->second;
}

namespace {

class ScriptedSession final : public LmSession {
 public:
  explicit ScriptedSession(const ScriptedLm& lm) : lm_(lm) {}
  Vec feed(std::span<const int> ids) override {
    if (ids.empty()) throw Error(Errc::EmptyInput, "feed of zero tokens");
    if (ids_.size() + ids.size() > lm_.context_limit()) throw Error(Errc::ContextOverflow, "ScriptedLm context");
    ids_.insert(ids_.end(), ids.begin(), ids.end());
    return lm_.lookup(ids_);
  }
  const std::vector<int>& ids() const override { return ids_; }

 private:
  const ScriptedLm& lm_;
  std::vector<int> ids_;
};

}  // namespace

std::unique_ptr<LmSession> ScriptedLm::session() const { return std::make_unique<ScriptedSession>(*this); }

std::string ScriptedLm::content_hash() const {
  std::vector<NamedTensor> ts;
  std::size_t i = 0;
  for (const auto& [prefix, entry] : by_prefix_) {
    Mat row(1, prefix.size() + d_ + 1);
    std::size_t k = 0;
    for (int id : prefix) row(0, k++) = id;
    for (double x : entry.first) row(0, k++) = x;
    row(0, k) = entry.second;
    ts.push_back({"script" + std::to_string(i++), std::move(row)});
  }
  return tensors_hash(ts);
}

}  // namespace cotools
