#pragma once

#include <cstdint>
#include <vector>

#include "cotools/numerics.hpp"

namespace cotools {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction in the PyTorch form:
// p -= lr / (1 - b1^t) * m / (sqrt(v) / sqrt(1 - b2^t) + eps).
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<const Mat*>& shapes, AdamHyper hyper = {});

  // One update; lrs holds one learning rate per parameter tensor.
  void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
            const std::vector<double>& lrs);

  std::uint64_t t() const noexcept { return t_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  std::vector<Mat>& first_moments() noexcept { return m_; }
  std::vector<Mat>& second_moments() noexcept { return v_; }
  const std::vector<Mat>& first_moments() const noexcept { return m_; }
  const std::vector<Mat>& second_moments() const noexcept { return v_; }
  void set_t(std::uint64_t t) noexcept { t_ = t; }

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<Mat> m_, v_;
};

// Plain gradient descent: p -= lr * g.
void sgd_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
              const std::vector<double>& lrs);

}  // namespace cotools
