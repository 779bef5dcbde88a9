#pragma once

// Row kernels shared by the inference session and the training forward so
// both paths perform the same floating point operations in the same order.

#include <cmath>
#include <cstddef>

#include "cotools/lm.hpp"
#include "cotools/numerics.hpp"

namespace cotools::kernels {

// out[j] = sum_k x[k] * W[k][j], k ascending.
inline void matmul_row(const double* x, const Mat& w, double* out) {
  const std::size_t n = w.cols();
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t k = 0; k < w.rows(); ++k) {
    const double xk = x[k];
    const double* wr = w.row(k);
    for (std::size_t j = 0; j < n; ++j) out[j] += xk * wr[j];
  }
}

// out = g * (x - mean) * rstd + b. Reports mean and rstd for backprop.
inline void layer_norm_row(const double* x, const double* g, const double* b, double* out,
                           std::size_t d, double* mean_out, double* rstd_out) {
  double mean = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(d);
  const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < d; ++i) out[i] = g[i] * ((x[i] - mean) * rstd) + b[i];
  if (mean_out) *mean_out = mean;
  if (rstd_out) *rstd_out = rstd;
}

// Causal ALiBi attention for the query at position t over keys 0..t.
// probs receives heads * (t + 1) softmax weights, head-major.
inline void attend_row(const double* q, const double* kbase, std::size_t kstride,
                       const double* vbase, std::size_t vstride, std::size_t t, std::size_t d,
                       std::size_t heads, const double* slopes, double* probs, double* out) {
  const std::size_t dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t i = 0; i < d; ++i) out[i] = 0.0;
  for (std::size_t hh = 0; hh < heads; ++hh) {
    double* p = probs + hh * (t + 1);
    const double* qh = q + hh * dh;
    double mx = -INFINITY;
    for (std::size_t j = 0; j <= t; ++j) {
      const double* kj = kbase + j * kstride + hh * dh;
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += qh[c] * kj[c];
      s = s * inv - slopes[hh] * static_cast<double>(t - j);
      p[j] = s;
      if (s > mx) mx = s;
    }
    double z = 0.0;
    for (std::size_t j = 0; j <= t; ++j) {
      p[j] = std::exp(p[j] - mx);
      z += p[j];
    }
    const double rz = 1.0 / z;
    for (std::size_t j = 0; j <= t; ++j) p[j] *= rz;
    double* oh = out + hh * dh;
    for (std::size_t j = 0; j <= t; ++j) {
      const double* vj = vbase + j * vstride + hh * dh;
      const double pj = p[j];
      for (std::size_t c = 0; c < dh; ++c) oh[c] += pj * vj[c];
    }
  }
}

}  // namespace cotools::kernels
