#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cotools/lm.hpp"

namespace cotools {

// Test double: every declared token prefix maps to a hidden state and the
// token the head should produce from it. Undeclared prefixes are errors.
class ScriptedLm final : public LanguageModel {
 public:
  explicit ScriptedLm(std::size_t d, std::size_t context = 4096);

  void program(std::vector<int> prefix, Vec hidden, int next_id);
  void program_text(std::string_view prefix, Vec hidden, int next_id);
  std::size_t entries() const noexcept { return by_prefix_.size(); }

  const Vocab& vocab() const override { return vocab_; }
  std::size_t dim() const override { return d_; }
  std::size_t context_limit() const override { return context_; }
  Mat hidden_states(std::span<const int> ids) const override;
  int next_token(const Vec& h) const override;
  std::unique_ptr<LmSession> session() const override;
  std::string content_hash() const override;

  const Vec& lookup(const std::vector<int>& prefix) const;

 private:
  std::size_t d_;
  std::size_t context_;
  Vocab vocab_;
  std::map<std::vector<int>, std::pair<Vec, int>> by_prefix_;
  std::map<std::vector<double>, int> by_hidden_;
};

}  // namespace cotools
