#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cotools/lm.hpp"
#include "cotools/optim.hpp"

namespace cotools {

// Next-token cross entropy averaged over every target position of every
// sequence. When grad is non-null the gradient is added into it.
double lm_loss_and_grad(const LmWeights& w, const std::vector<std::vector<int>>& seqs,
                        LmWeights* grad);

// Hidden states from the training forward; matches TransformerLm bit for bit.
Mat lm_train_hidden(const LmWeights& w, const std::vector<int>& ids);

struct PretrainConfig {
  std::size_t steps = 3000;
  std::size_t batch = 8;
  double lr = 3e-3;
  std::uint64_t seed = 0;
};

struct PretrainRecord {
  std::size_t step;
  double loss;
};

using SequenceSampler = std::function<std::vector<int>(Rng&)>;

// Pretrains the toy LM so it can follow the benchmark formats. This happens
// before (and never during) adapter training.
std::vector<PretrainRecord> pretrain_lm(LmWeights& w, const SequenceSampler& sample,
                                        const PretrainConfig& cfg,
                                        const std::function<void(const PretrainRecord&)>& on_step = {});

}  // namespace cotools
