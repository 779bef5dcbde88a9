#include "cotools/lm_train.hpp"

#include <cmath>

#include "lm_kernels.hpp"

namespace cotools {

namespace {

struct LayerCache {
  Mat x_in, a1, qkv, att, x_mid, a2, up_pre, up_act;
  std::vector<double> mean1, rstd1, mean2, rstd2;
  std::vector<double> probs;  // (head * T + i) * T + j
};

struct SeqCache {
  std::vector<LayerCache> layers;
  Mat x_final, z;
  std::vector<double> meanf, rstdf;
};

// The blocked loops below handle four rows per pass over the weights. Each
// output element still sums its terms in the same order as the row kernel.

void matmul(const Mat& x, const Mat& w, Mat& y) {
  y = Mat(x.rows(), w.cols());
  const std::size_t T = x.rows(), K = w.rows(), n = w.cols();
  std::size_t t = 0;
  for (; t + 4 <= T; t += 4) {
    const double *x0 = x.row(t), *x1 = x.row(t + 1), *x2 = x.row(t + 2), *x3 = x.row(t + 3);
    double* __restrict o0 = y.row(t);
    double* __restrict o1 = y.row(t + 1);
    double* __restrict o2 = y.row(t + 2);
    double* __restrict o3 = y.row(t + 3);
    for (std::size_t k = 0; k < K; ++k) {
      const double* __restrict wr = w.row(k);
      const double a0 = x0[k], a1 = x1[k], a2 = x2[k], a3 = x3[k];
      for (std::size_t j = 0; j < n; ++j) {
        const double wj = wr[j];
        o0[j] += a0 * wj;
        o1[j] += a1 * wj;
        o2[j] += a2 * wj;
        o3[j] += a3 * wj;
      }
    }
  }
  for (; t < T; ++t) kernels::matmul_row(x.row(t), w, y.row(t));
}

// dW += X^T dY, rows of X taken in ascending order.
void acc_xt_dy(const Mat& x, const Mat& dy, Mat& dw) {
  const std::size_t n = dy.cols();
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const double* xr = x.row(t);
    const double* gr = dy.row(t);
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xk = xr[k];
      double* wr = dw.row(k);
      for (std::size_t j = 0; j < n; ++j) wr[j] += xk * gr[j];
    }
  }
}

Mat transpose(const Mat& w) {
  Mat t(w.cols(), w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) t(j, i) = w(i, j);
  return t;
}

// dX = dY W^T, with wt = W^T precomputed so the inner loop is contiguous.
void dy_wt(const Mat& dy, const Mat& wt, Mat& dx) { matmul(dy, wt, dx); }

void layer_norm(const Mat& x, const Mat& g, const Mat& b, Mat& out, std::vector<double>& mean,
                std::vector<double>& rstd) {
  out = Mat(x.rows(), x.cols());
  mean.assign(x.rows(), 0.0);
  rstd.assign(x.rows(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    kernels::layer_norm_row(x.row(t), g.data(), b.data(), out.row(t), x.cols(), &mean[t], &rstd[t]);
  }
}

// Adds the input gradient into dx.
void layer_norm_backward(const Mat& x, const std::vector<double>& mean, const std::vector<double>& rstd,
                         const Mat& g, const Mat& dy, Mat& dg, Mat& db, Mat& dx) {
  const std::size_t d = x.cols();
  std::vector<double> xhat(d), dxhat(d);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const double* xr = x.row(t);
    const double* gr = dy.row(t);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      xhat[i] = (xr[i] - mean[t]) * rstd[t];
      dg(0, i) += gr[i] * xhat[i];
      db(0, i) += gr[i];
      dxhat[i] = gr[i] * g(0, i);
      s1 += dxhat[i];
      s2 += dxhat[i] * xhat[i];
    }
    s1 /= static_cast<double>(d);
    s2 /= static_cast<double>(d);
    double* out = dx.row(t);
    for (std::size_t i = 0; i < d; ++i) out[i] += rstd[t] * (dxhat[i] - s1 - xhat[i] * s2);
  }
}

void forward(const LmWeights& w, const std::vector<int>& ids, SeqCache& c) {
  const auto& cfg = w.cfg;
  const std::size_t T = ids.size(), d = cfg.d, H = cfg.heads;
  if (T == 0) throw Error(Errc::EmptyInput, "training forward of empty sequence");
  if (T > cfg.context) throw Error(Errc::ContextOverflow, "training sequence exceeds context");
  std::vector<double> slopes;
  for (std::size_t h = 0; h < H; ++h) slopes.push_back(alibi_slope(h, H));

  Mat x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw Error(Errc::OutOfRange, "token id " + std::to_string(id));
    }
    std::copy(w.emb.row(id), w.emb.row(id) + d, x.row(t));
  }
  c.layers.resize(cfg.layers);
  std::vector<double> tmp(H * T);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const LmLayer& L = w.layers[l];
    LayerCache& lc = c.layers[l];
    lc.x_in = x;
    layer_norm(x, L.ln1_g, L.ln1_b, lc.a1, lc.mean1, lc.rstd1);
    matmul(lc.a1, L.wqkv, lc.qkv);
    lc.att = Mat(T, d);
    lc.probs.assign(H * T * T, 0.0);
    for (std::size_t i = 0; i < T; ++i) {
      kernels::attend_row(lc.qkv.row(i), lc.qkv.data() + d, 3 * d, lc.qkv.data() + 2 * d, 3 * d, i, d, H,
                          slopes.data(), tmp.data(), lc.att.row(i));
      for (std::size_t hh = 0; hh < H; ++hh)
        for (std::size_t j = 0; j <= i; ++j) lc.probs[(hh * T + i) * T + j] = tmp[hh * (i + 1) + j];
    }
    Mat proj;
    matmul(lc.att, L.wo, proj);
    lc.x_mid = x;
    for (std::size_t k = 0; k < x.size(); ++k) lc.x_mid.data()[k] += proj.data()[k];
    layer_norm(lc.x_mid, L.ln2_g, L.ln2_b, lc.a2, lc.mean2, lc.rstd2);
    matmul(lc.a2, L.w_up, lc.up_pre);
    lc.up_act = lc.up_pre;
    for (double& u : lc.up_act.storage()) u = gelu(u);
    Mat dn;
    matmul(lc.up_act, L.w_down, dn);
    x = lc.x_mid;
    for (std::size_t k = 0; k < x.size(); ++k) x.data()[k] += dn.data()[k];
  }
  c.x_final = x;
  layer_norm(x, w.lnf_g, w.lnf_b, c.z, c.meanf, c.rstdf);
}

void attention_backward(const LayerCache& lc, const Mat& datt, std::size_t H, Mat& dqkv) {
  const std::size_t T = datt.rows(), d = datt.cols(), dh = d / H;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  dqkv = Mat(T, 3 * d);
  std::vector<double> dp(T), ds(T);
  for (std::size_t hh = 0; hh < H; ++hh) {
    for (std::size_t i = 0; i < T; ++i) {
      const double* p = &lc.probs[(hh * T + i) * T];
      const double* dout = datt.row(i) + hh * dh;
      double sum = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        const double* vj = lc.qkv.row(j) + 2 * d + hh * dh;
        double s = 0.0;
        for (std::size_t k = 0; k < dh; ++k) s += dout[k] * vj[k];
        dp[j] = s;
        sum += p[j] * s;
        double* dvj = dqkv.row(j) + 2 * d + hh * dh;
        for (std::size_t k = 0; k < dh; ++k) dvj[k] += p[j] * dout[k];
      }
      const double* qi = lc.qkv.row(i) + hh * dh;
      double* dqi = dqkv.row(i) + hh * dh;
      for (std::size_t j = 0; j <= i; ++j) {
        ds[j] = p[j] * (dp[j] - sum) * inv;
        const double* kj = lc.qkv.row(j) + d + hh * dh;
        double* dkj = dqkv.row(j) + d + hh * dh;
        for (std::size_t k = 0; k < dh; ++k) {
          dqi[k] += ds[j] * kj[k];
          dkj[k] += ds[j] * qi[k];
        }
      }
    }
  }
}

struct Transposed {
  std::vector<Mat> wqkv, wo, w_up, w_down;
  Mat head;
};

Transposed transposes(const LmWeights& w) {
  Transposed t;
  for (const auto& L : w.layers) {
    t.wqkv.push_back(transpose(L.wqkv));
    t.wo.push_back(transpose(L.wo));
    t.w_up.push_back(transpose(L.w_up));
    t.w_down.push_back(transpose(L.w_down));
  }
  t.head = transpose(w.head);
  return t;
}

// Returns summed loss over targets; dlogits are scaled by 1/norm.
double sequence_backward(const LmWeights& w, const Transposed& wt, const std::vector<int>& ids,
                         double norm, LmWeights* g) {
  SeqCache c;
  const std::size_t T = ids.size() - 1;
  std::vector<int> in(ids.begin(), ids.end() - 1);
  forward(w, in, c);
  const std::size_t V = w.cfg.vocab_size, d = w.cfg.d;
  Mat logits;
  matmul(c.z, w.head, logits);
  Mat dlogits(T, V);
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double* lr = logits.row(t);
    double mx = lr[0];
    for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, lr[v]);
    double z = 0.0;
    for (std::size_t v = 0; v < V; ++v) z += std::exp(lr[v] - mx);
    const double lse = mx + std::log(z);
    const int tgt = ids[t + 1];
    loss += lse - lr[tgt];
    if (g) {
      double* dr = dlogits.row(t);
      for (std::size_t v = 0; v < V; ++v) dr[v] = std::exp(lr[v] - lse) / norm;
      dr[tgt] -= 1.0 / norm;
    }
  }
  if (!g) return loss;

  acc_xt_dy(c.z, dlogits, g->head);
  Mat dz;
  dy_wt(dlogits, wt.head, dz);
  Mat dx(T, d);
  layer_norm_backward(c.x_final, c.meanf, c.rstdf, w.lnf_g, dz, g->lnf_g, g->lnf_b, dx);

  for (std::size_t l = w.cfg.layers; l-- > 0;) {
    const LmLayer& L = w.layers[l];
    LmLayer& G = g->layers[l];
    const LayerCache& lc = c.layers[l];
    // x_out = x_mid + gelu(a2 W_up) W_down
    acc_xt_dy(lc.up_act, dx, G.w_down);
    Mat dact;
    dy_wt(dx, wt.w_down[l], dact);
    for (std::size_t k = 0; k < dact.size(); ++k) dact.data()[k] *= gelu_grad(lc.up_pre.data()[k]);
    acc_xt_dy(lc.a2, dact, G.w_up);
    Mat da2;
    dy_wt(dact, wt.w_up[l], da2);
    Mat dmid = dx;
    layer_norm_backward(lc.x_mid, lc.mean2, lc.rstd2, L.ln2_g, da2, G.ln2_g, G.ln2_b, dmid);
    // x_mid = x_in + attn(a1) W_o
    acc_xt_dy(lc.att, dmid, G.wo);
    Mat datt;
    dy_wt(dmid, wt.wo[l], datt);
    Mat dqkv;
    attention_backward(lc, datt, w.cfg.heads, dqkv);
    acc_xt_dy(lc.a1, dqkv, G.wqkv);
    Mat da1;
    dy_wt(dqkv, wt.wqkv[l], da1);
    dx = dmid;
    layer_norm_backward(lc.x_in, lc.mean1, lc.rstd1, L.ln1_g, da1, G.ln1_g, G.ln1_b, dx);
  }
  for (std::size_t t = 0; t < T; ++t) {
    double* er = g->emb.row(in[t]);
    const double* gr = dx.row(t);
    for (std::size_t k = 0; k < d; ++k) er[k] += gr[k];
  }
  return loss;
}

}  // namespace

double lm_loss_and_grad(const LmWeights& w, const std::vector<std::vector<int>>& seqs, LmWeights* grad) {
  std::size_t targets = 0;
  for (const auto& s : seqs) {
    if (s.size() < 2) throw Error(Errc::EmptyInput, "training sequence needs at least two tokens");
    targets += s.size() - 1;
  }
  if (targets == 0) throw Error(Errc::EmptyInput, "no training targets");
  const double norm = static_cast<double>(targets);
  const Transposed wt = grad ? transposes(w) : Transposed{};
  double total = 0.0;
  for (const auto& s : seqs) total += sequence_backward(w, wt, s, norm, grad);
  return require_finite(total / norm, "LM loss");
}

Mat lm_train_hidden(const LmWeights& w, const std::vector<int>& ids) {
  SeqCache c;
  forward(w, ids, c);
  Mat h = c.z;
  for (double& x : h.storage()) x *= w.cfg.hidden_scale;
  return h;
}

std::vector<PretrainRecord> pretrain_lm(LmWeights& w, const SequenceSampler& sample,
                                        const PretrainConfig& cfg,
                                        const std::function<void(const PretrainRecord&)>& on_step) {
  if (cfg.batch == 0) throw Error(Errc::ConfigError, "pretrain batch must be positive");
  if (!(cfg.lr > 0)) throw Error(Errc::ConfigError, "pretrain lr must be positive");
  Rng rng(derive_seed(cfg.seed, "lm.pretrain"));
  auto params = w.params();
  std::vector<const Mat*> shapes(params.begin(), params.end());
  Adam opt(shapes);
  const std::vector<double> lrs(params.size(), cfg.lr);
  std::vector<PretrainRecord> log;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::vector<int>> batch;
    for (std::size_t b = 0; b < cfg.batch; ++b) batch.push_back(sample(rng));
    LmWeights g = zeros_like(w);
    const double loss = lm_loss_and_grad(w, batch, &g);
    auto gp = g.params();
    opt.step(params, std::vector<const Mat*>(gp.begin(), gp.end()), lrs);
    log.push_back({step, loss});
    if (on_step) on_step(log.back());
  }
  return log;
}

}  // namespace cotools
