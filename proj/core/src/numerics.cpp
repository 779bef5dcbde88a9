#include "cotools/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace cotools {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> xs)
    : r_(rows), c_(cols), d_(std::move(xs)) {
  if (d_.size() != r_ * c_) {
    throw Error(Errc::ShapeMismatch, "Mat data length " + std::to_string(d_.size()) +
                                         " does not match " + std::to_string(r_) + "x" +
                                         std::to_string(c_));
  }
}

Vec Mat::row_vec(std::size_t i) const {
  return Vec(std::vector<double>(row(i), row(i) + c_));
}

void Mat::fill(double v) { std::fill(d_.begin(), d_.end(), v); }

void require_same_shape(const Mat& a, const Mat& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

static void check_len(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw Error(Errc::ShapeMismatch,
                std::string(what) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

void require_finite(const Vec& v, std::string_view what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::NonFinite, std::string(what));
  }
}

void require_finite(const Mat& m, std::string_view what) {
  for (double x : m.storage()) {
    if (!std::isfinite(x)) throw Error(Errc::NonFinite, std::string(what));
  }
}

double require_finite(double x, std::string_view what) {
  if (!std::isfinite(x)) throw Error(Errc::NonFinite, std::string(what));
  return x;
}

double dot(const Vec& a, const Vec& b) {
  check_len(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return require_finite(s, "dot");
}

double l2_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return require_finite(std::sqrt(s), "l2_norm");
}

Vec hadamard(const Vec& a, const Vec& b) {
  check_len(a.size(), b.size(), "hadamard");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  require_finite(out, "hadamard");
  return out;
}

Vec add(const Vec& a, const Vec& b) {
  check_len(a.size(), b.size(), "add");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  require_finite(out, "add");
  return out;
}

Vec scaled(const Vec& a, double c) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  require_finite(out, "scaled");
  return out;
}

Vec matvec_t(const Mat& w, const Vec& h) {
  check_len(w.rows(), h.size(), "matvec_t");
  const std::size_t n = w.cols();
  Vec out(n);
  double* o = out.data();
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double hi = h[i];
    const double* wr = w.row(i);
    for (std::size_t j = 0; j < n; ++j) o[j] += hi * wr[j];
  }
  require_finite(out, "matvec_t");
  return out;
}

Vec matvec(const Mat& w, const Vec& h) {
  check_len(w.cols(), h.size(), "matvec");
  Vec out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* wr = w.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) s += wr[j] * h[j];
    out[i] = s;
  }
  require_finite(out, "matvec");
  return out;
}

double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

GatedForward gated_mlp_forward(const Vec& h, const Mat& gate, const Mat& up, const Mat& down) {
  require_same_shape(gate, up, "gated_mlp gate/up");
  if (down.rows() != gate.cols()) {
    throw Error(Errc::ShapeMismatch, "gated_mlp: down rows " + std::to_string(down.rows()) +
                                         " vs intermediate " + std::to_string(gate.cols()));
  }
  GatedForward f;
  f.a = matvec_t(gate, h);
  f.u = matvec_t(up, h);
  f.s = Vec(f.a.size());
  f.m = Vec(f.a.size());
  for (std::size_t k = 0; k < f.a.size(); ++k) {
    f.s[k] = silu(f.a[k]);
    f.m[k] = f.s[k] * f.u[k];
  }
  require_finite(f.m, "gated_mlp");
  f.out = matvec_t(down, f.m);
  return f;
}

Vec gated_mlp(const Vec& h, const Mat& gate, const Mat& up, const Mat& down) {
  return gated_mlp_forward(h, gate, up, down).out;
}

Vec l2_normalize(const Vec& v) {
  const double n = l2_norm(v);
  if (!(n > kNormEps)) throw Error(Errc::NearZeroNorm, "l2_normalize: norm " + std::to_string(n));
  return scaled(v, 1.0 / n);
}

Vec zscore_normalize(const Vec& w) {
  if (w.empty()) throw Error(Errc::EmptyInput, "zscore_normalize of empty vector");
  double mean = 0.0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double x : w) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size());
  const double sd = std::sqrt(var);
  if (!(sd > kNormEps)) throw Error(Errc::ZeroVariance, "zscore_normalize: population std is zero");
  Vec out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = (w[i] - mean) / sd;
  require_finite(out, "zscore_normalize");
  return out;
}

ScalarLoss bce_loss(double score, int label) {
  if (label != 0 && label != 1) {
    throw Error(Errc::InvalidArgument, "bce_loss label must be 0 or 1, got " + std::to_string(label));
  }
  require_finite(score, "bce_loss score");
  const double p = std::clamp(score, kProbClamp, 1.0 - kProbClamp);
  ScalarLoss r;
  if (label == 1) {
    r.loss = -std::log(p);
    r.grad = -1.0 / p;
  } else {
    r.loss = -std::log(1.0 - p);
    r.grad = 1.0 / (1.0 - p);
  }
  // Outside the clamp window the loss is flat in the score.
  if (score != p) r.grad = 0.0;
  return r;
}

VecLoss inbatch_ce_loss(const Vec& scores, std::size_t gold) {
  if (scores.empty()) throw Error(Errc::EmptyInput, "inbatch_ce_loss on empty scores");
  if (gold >= scores.size()) {
    throw Error(Errc::OutOfRange, "inbatch_ce_loss gold " + std::to_string(gold) + " >= " +
                                      std::to_string(scores.size()));
  }
  require_finite(scores, "inbatch_ce_loss scores");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  VecLoss r{lse - scores[gold], Vec(scores.size())};
  for (std::size_t i = 0; i < scores.size(); ++i) r.grad[i] = std::exp(scores[i] - lse);
  r.grad[gold] -= 1.0;
  // A lone class has loss exactly zero; keep it from picking up rounding dust.
  if (scores.size() == 1) {
    r.loss = 0.0;
    r.grad[0] = 0.0;
  }
  require_finite(r.loss, "inbatch_ce_loss");
  return r;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  if (!(h > 0)) throw Error(Errc::InvalidArgument, "finite_diff_grad step must be positive");
  Vec g(x.size());
  Vec xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = require_finite(f(xp), "finite_diff_grad f(x+h)");
    xp[i] = xi - h;
    const double fm = require_finite(f(xp), "finite_diff_grad f(x-h)");
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vec& a, const Vec& b, double floor) {
  check_len(a.size(), b.size(), "relative_error");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < floor) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

std::uint64_t Rng::next_u64() {
  ++draws_;
  return eng_();
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(Errc::InvalidArgument, "Rng::below(0)");
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::int64_t Rng::range(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error(Errc::InvalidArgument, "Rng::range with hi < lo");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(below(span));
}

void Rng::restore(std::uint64_t seed, std::uint64_t draws) {
  seed_ = seed;
  eng_.seed(seed);
  eng_.discard(draws);
  draws_ = draws;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cotools
