#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "cotools/errors.hpp"

namespace cotools {

// Dense vector of doubles. The length is fixed at construction.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : d_(n, fill) {}
  Vec(std::initializer_list<double> xs) : d_(xs) {}
  explicit Vec(std::vector<double> xs) : d_(std::move(xs)) {}

  std::size_t size() const noexcept { return d_.size(); }
  bool empty() const noexcept { return d_.empty(); }
  double& operator[](std::size_t i) { return d_[i]; }
  double operator[](std::size_t i) const { return d_[i]; }
  double* data() noexcept { return d_.data(); }
  const double* data() const noexcept { return d_.data(); }
  auto begin() noexcept { return d_.begin(); }
  auto end() noexcept { return d_.end(); }
  auto begin() const noexcept { return d_.begin(); }
  auto end() const noexcept { return d_.end(); }
  const std::vector<double>& values() const noexcept { return d_; }

  friend bool operator==(const Vec& a, const Vec& b) { return a.d_ == b.d_; }

 private:
  std::vector<double> d_;
};

// Row-major dense matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : r_(rows), c_(cols), d_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> xs);

  std::size_t rows() const noexcept { return r_; }
  std::size_t cols() const noexcept { return c_; }
  std::size_t size() const noexcept { return d_.size(); }
  double& operator()(std::size_t i, std::size_t j) { return d_[i * c_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * c_ + j]; }
  double* row(std::size_t i) noexcept { return d_.data() + i * c_; }
  const double* row(std::size_t i) const noexcept { return d_.data() + i * c_; }
  double* data() noexcept { return d_.data(); }
  const double* data() const noexcept { return d_.data(); }
  std::vector<double>& storage() noexcept { return d_; }
  const std::vector<double>& storage() const noexcept { return d_; }
  Vec row_vec(std::size_t i) const;
  void fill(double v);

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.r_ == b.r_ && a.c_ == b.c_ && a.d_ == b.d_;
  }

 private:
  std::size_t r_ = 0;
  std::size_t c_ = 0;
  std::vector<double> d_;
};

void require_same_shape(const Mat& a, const Mat& b, std::string_view what);
void require_finite(const Vec& v, std::string_view what);
void require_finite(const Mat& m, std::string_view what);
double require_finite(double x, std::string_view what);

double dot(const Vec& a, const Vec& b);
double l2_norm(const Vec& v);
Vec hadamard(const Vec& a, const Vec& b);
Vec add(const Vec& a, const Vec& b);
Vec scaled(const Vec& a, double c);

// out = W^T h for W of shape (len(h) x n).
Vec matvec_t(const Mat& w, const Vec& h);
// out = W h for W of shape (m x len(h)).
Vec matvec(const Mat& w, const Vec& h);

double sigmoid(double x);
double silu(double x);
double silu_grad(double x);

struct GatedForward {
  Vec a;    // gate^T h
  Vec u;    // up^T h
  Vec s;    // silu(a)
  Vec m;    // s * u
  Vec out;  // down^T m
};

Vec gated_mlp(const Vec& h, const Mat& gate, const Mat& up, const Mat& down);
GatedForward gated_mlp_forward(const Vec& h, const Mat& gate, const Mat& up, const Mat& down);

inline constexpr double kNormEps = 1e-12;

Vec l2_normalize(const Vec& v);
Vec zscore_normalize(const Vec& w);

struct ScalarLoss {
  double loss;
  double grad;
};

inline constexpr double kProbClamp = 1e-7;

// Binary cross entropy on a probability; grad is d(loss)/d(score).
ScalarLoss bce_loss(double score, int label);

struct VecLoss {
  double loss;
  Vec grad;
};

// Softmax cross entropy; grad = softmax(scores) - onehot(gold).
VecLoss inbatch_ce_loss(const Vec& scores, std::size_t gold);

// Central differences: (f(x + h e_i) - f(x - h e_i)) / 2h.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5);

// ||a - b|| / max(||a||, ||b||), or the absolute difference when both are below floor.
double relative_error(const Vec& a, const Vec& b, double floor = 1e-10);

// mt19937_64 with hand-written transforms. Standard distributions are not
// portable across library implementations, so none are used here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), eng_(seed) {}

  std::uint64_t next_u64();
  // 53-bit uniform in [0, 1).
  double uniform();
  // Box-Muller using two fresh uniforms per call.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n), rejection sampled.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi);

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  template <class T>
  const T& pick(const std::vector<T>& xs) {
    if (xs.empty()) throw Error(Errc::EmptyInput, "Rng::pick on empty list");
    return xs[static_cast<std::size_t>(below(xs.size()))];
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }
  // Restores a stream position previously reported by draws().
  void restore(std::uint64_t seed, std::uint64_t draws);

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 eng_;
};

// splitmix64 finalizer over (base, FNV-1a(label)).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace cotools
