#include "cotools/adapters.hpp"

#include <algorithm>

namespace cotools {

namespace {

Mat normal_mat(std::size_t r, std::size_t c, Rng& rng) {
  Mat m(r, c);
  for (double& x : m.storage()) x = rng.normal(0.0, kAdapterInitStd);
  return m;
}

// d_gate[i][k] += h[i] * da[k]
void outer_acc(const Vec& h, const Vec& da, Mat& out) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double hi = h[i];
    double* r = out.row(i);
    for (std::size_t k = 0; k < da.size(); ++k) r[k] += hi * da[k];
  }
}

// Back through down^T (silu(a) * u) given d(out); accumulates weight grads.
void gated_backward(const GatedForward& f, const Vec& dout, const Vec& h, const Mat& down, Mat& d_gate,
                    Mat& d_up, Mat& d_down) {
  outer_acc(f.m, dout, d_down);
  const std::size_t D = f.m.size();
  Vec da(D), du(D);
  for (std::size_t k = 0; k < D; ++k) {
    const double* dr = down.row(k);
    double dm = 0.0;
    for (std::size_t j = 0; j < dout.size(); ++j) dm += dr[j] * dout[j];
    du[k] = dm * f.s[k];
    da[k] = dm * f.u[k] * silu_grad(f.a[k]);
  }
  outer_acc(h, da, d_gate);
  outer_acc(h, du, d_up);
}

}  // namespace

JudgeHead init_judge(std::size_t d, std::size_t D, Rng& rng) {
  if (d == 0 || D == 0) throw Error(Errc::InvalidArgument, "judge dims must be positive");
  JudgeHead j;
  j.gate = normal_mat(d, D, rng);
  j.up = normal_mat(d, D, rng);
  j.down = Mat(D, 1);
  return j;
}

EncoderHead init_encoder(std::size_t d, std::size_t D, Rng& rng) {
  if (d == 0 || D == 0) throw Error(Errc::InvalidArgument, "encoder dims must be positive");
  EncoderHead e;
  e.gate = normal_mat(d, D, rng);
  e.up = normal_mat(d, D, rng);
  e.down = Mat(D, d);
  return e;
}

SharedDimWeight make_dim_weight(std::size_t d) {
  return std::make_shared<DimWeight>(DimWeight{Vec(d, 1.0)});
}

Retriever init_retriever(std::size_t d, std::size_t D, Rng& rng) {
  Retriever r;
  r.query = init_encoder(d, D, rng);
  r.tool = init_encoder(d, D, rng);
  r.wdim = make_dim_weight(d);
  return r;
}

void validate_judge(const JudgeHead& j) {
  require_same_shape(j.gate, j.up, "judge gate/up");
  require_shape(j.down, j.gate.cols(), 1, "judge down");
  if (j.gate.cols() == 0) throw Error(Errc::ShapeMismatch, "judge intermediate size is zero");
  require_finite(j.gate, "judge gate");
  require_finite(j.up, "judge up");
  require_finite(j.down, "judge down");
}

void validate_encoder(const EncoderHead& e) {
  require_same_shape(e.gate, e.up, "encoder gate/up");
  require_shape(e.down, e.gate.cols(), e.gate.rows(), "encoder down");
  if (e.gate.cols() == 0) throw Error(Errc::ShapeMismatch, "encoder intermediate size is zero");
  require_finite(e.gate, "encoder gate");
  require_finite(e.up, "encoder up");
  require_finite(e.down, "encoder down");
}

double judge_logit(const Vec& h, const JudgeHead& judge) {
  if (h.size() != judge.gate.rows()) {
    throw Error(Errc::DimMismatch, "judge expects d=" + std::to_string(judge.gate.rows()) + ", got " +
                                       std::to_string(h.size()));
  }
  return gated_mlp(h, judge.gate, judge.up, judge.down)[0];
}

double judge_score(const Vec& h, const JudgeHead& judge) { return sigmoid(judge_logit(h, judge)); }

EncodeCache encode_forward(const Vec& h, const EncoderHead& enc, const DimWeight& wdim) {
  if (h.size() != enc.gate.rows() || wdim.w.size() != h.size()) {
    throw Error(Errc::DimMismatch, "encoder expects d=" + std::to_string(enc.gate.rows()) + ", got " +
                                       std::to_string(h.size()));
  }
  EncodeCache c;
  c.gated = gated_mlp_forward(h, enc.gate, enc.up, enc.down);
  c.z = add(h, c.gated.out);
  c.y = hadamard(wdim.w, c.z);
  c.norm = l2_norm(c.y);
  if (!(c.norm > kNormEps)) throw Error(Errc::NearZeroNorm, "encoder output norm " + std::to_string(c.norm));
  c.out = scaled(c.y, 1.0 / c.norm);
  return c;
}

Vec encode(const Vec& h, const EncoderHead& enc, const DimWeight& wdim) {
  return encode_forward(h, enc, wdim).out;
}

std::vector<ScoredTool> score_and_rank(const Vec& vq, const std::vector<std::pair<std::string, Vec>>& tools) {
  if (tools.empty()) throw Error(Errc::EmptyPool, "score_and_rank over an empty pool");
  std::vector<ScoredTool> out;
  out.reserve(tools.size());
  for (const auto& [id, v] : tools) {
    if (v.size() != vq.size()) throw Error(Errc::DimMismatch, "tool " + id + " vector width differs from the query");
    out.push_back({id, dot(vq, v)});
  }
  std::sort(out.begin(), out.end(), [](const ScoredTool& a, const ScoredTool& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tool_id < b.tool_id;
  });
  return out;
}

JudgeGrad::JudgeGrad(const JudgeHead& j)
    : gate(j.gate.rows(), j.gate.cols()), up(j.up.rows(), j.up.cols()), down(j.down.rows(), j.down.cols()) {}

void JudgeGrad::zero() {
  gate.fill(0.0);
  up.fill(0.0);
  down.fill(0.0);
}

RetrieverGrad::RetrieverGrad(const Retriever& r)
    : q_gate(r.query.gate.rows(), r.query.gate.cols()),
      q_up(r.query.up.rows(), r.query.up.cols()),
      q_down(r.query.down.rows(), r.query.down.cols()),
      t_gate(r.tool.gate.rows(), r.tool.gate.cols()),
      t_up(r.tool.up.rows(), r.tool.up.cols()),
      t_down(r.tool.down.rows(), r.tool.down.cols()),
      wdim(r.wdim->w.size()) {}

void RetrieverGrad::zero() {
  for (Mat* m : {&q_gate, &q_up, &q_down, &t_gate, &t_up, &t_down}) m->fill(0.0);
  for (double& x : wdim) x = 0.0;
}

double judge_backward(const Vec& h, int label, double weight, const JudgeHead& judge, JudgeGrad& g,
                      double scale) {
  if (h.size() != judge.gate.rows()) throw Error(Errc::DimMismatch, "judge_backward hidden size");
  const GatedForward f = gated_mlp_forward(h, judge.gate, judge.up, judge.down);
  const double p = sigmoid(f.out[0]);
  const ScalarLoss l = bce_loss(p, label);
  const double dz = scale * weight * l.grad * p * (1.0 - p);
  gated_backward(f, Vec{dz}, h, judge.down, g.gate, g.up, g.down);
  return weight * l.loss;
}

void encode_backward(const EncodeCache& c, const Vec& dout, const Vec& h, const EncoderHead& enc,
                     const DimWeight& wdim, Mat& d_gate, Mat& d_up, Mat& d_down, Vec& d_wdim) {
  const std::size_t d = h.size();
  // out = y / |y|  =>  dy = (dout - out (out . dout)) / |y|
  double od = 0.0;
  for (std::size_t i = 0; i < d; ++i) od += c.out[i] * dout[i];
  Vec dz(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double dy = (dout[i] - c.out[i] * od) / c.norm;
    d_wdim[i] += c.z[i] * dy;
    dz[i] = wdim.w[i] * dy;
  }
  // z = h + gated(h); h itself is frozen.
  gated_backward(c.gated, dz, h, enc.down, d_gate, d_up, d_down);
}

double retriever_backward(const std::vector<Vec>& query_h, const std::vector<Vec>& tool_h,
                          const std::vector<std::size_t>& gold, const Retriever& r, RetrieverGrad& g,
                          double scale) {
  if (query_h.empty()) throw Error(Errc::EmptyInput, "retriever batch has no queries");
  if (tool_h.empty()) throw Error(Errc::EmptyPool, "retriever batch has no tools");
  if (gold.size() != query_h.size()) throw Error(Errc::ShapeMismatch, "gold list length");
  const std::size_t B = query_h.size(), U = tool_h.size(), d = r.wdim->w.size();
  std::vector<EncodeCache> qc, tc;
  for (const auto& h : query_h) qc.push_back(encode_forward(h, r.query, *r.wdim));
  for (const auto& h : tool_h) tc.push_back(encode_forward(h, r.tool, *r.wdim));

  std::vector<Vec> dq(B, Vec(d)), dt(U, Vec(d));
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t i = 0; i < B; ++i) {
    Vec s(U);
    for (std::size_t j = 0; j < U; ++j) s[j] = dot(qc[i].out, tc[j].out);
    const VecLoss ce = inbatch_ce_loss(s, gold[i]);
    loss += ce.loss * inv_b;
    for (std::size_t j = 0; j < U; ++j) {
      const double gs = ce.grad[j] * inv_b * scale;
      if (gs == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        dq[i][k] += gs * tc[j].out[k];
        dt[j][k] += gs * qc[i].out[k];
      }
    }
  }
  for (std::size_t i = 0; i < B; ++i) {
    encode_backward(qc[i], dq[i], query_h[i], r.query, *r.wdim, g.q_gate, g.q_up, g.q_down, g.wdim);
  }
  for (std::size_t j = 0; j < U; ++j) {
    encode_backward(tc[j], dt[j], tool_h[j], r.tool, *r.wdim, g.t_gate, g.t_up, g.t_down, g.wdim);
  }
  return require_finite(loss, "retriever loss");
}

double retriever_loss(const std::vector<Vec>& query_h, const std::vector<Vec>& tool_h,
                      const std::vector<std::size_t>& gold, const Retriever& r) {
  std::vector<Vec> tv;
  for (const auto& h : tool_h) tv.push_back(encode(h, r.tool, *r.wdim));
  double loss = 0.0;
  for (std::size_t i = 0; i < query_h.size(); ++i) {
    const Vec q = encode(query_h[i], r.query, *r.wdim);
    Vec s(tv.size());
    for (std::size_t j = 0; j < tv.size(); ++j) s[j] = dot(q, tv[j]);
    loss += inbatch_ce_loss(s, gold.at(i)).loss;
  }
  return loss / static_cast<double>(query_h.size());
}

static Mat vec_as_mat(const Vec& v) { return Mat(1, v.size(), v.values()); }

Checkpoint judge_checkpoint(const JudgeHead& j, std::uint64_t seed, const std::string& meta_json) {
  validate_judge(j);
  Checkpoint ck;
  ck.kind = "judge";
  ck.heads = {"judge"};
  ck.seed = seed;
  ck.tensors = {{"judge.gate", j.gate}, {"judge.up", j.up}, {"judge.down", j.down}};
  ck.meta_json = meta_json;
  return ck;
}

JudgeHead judge_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != "judge") throw Error(Errc::CorruptCheckpoint, "expected a judge checkpoint, got " + ck.kind);
  JudgeHead j{find_tensor(ck, "judge.gate").value, find_tensor(ck, "judge.up").value,
              find_tensor(ck, "judge.down").value};
  validate_judge(j);
  return j;
}

Checkpoint retriever_checkpoint(const Retriever& r, std::uint64_t seed, const std::string& meta_json) {
  validate_encoder(r.query);
  validate_encoder(r.tool);
  Checkpoint ck;
  ck.kind = "retriever";
  ck.heads = {"query_encoder", "tool_encoder", "wdim"};
  ck.seed = seed;
  ck.tensors = {{"query.gate", r.query.gate}, {"query.up", r.query.up}, {"query.down", r.query.down},
                {"tool.gate", r.tool.gate},   {"tool.up", r.tool.up},   {"tool.down", r.tool.down},
                {"wdim", vec_as_mat(r.wdim->w)}};
  ck.meta_json = meta_json;
  return ck;
}

Retriever retriever_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != "retriever") {
    throw Error(Errc::CorruptCheckpoint, "expected a retriever checkpoint, got " + ck.kind);
  }
  Retriever r;
  r.query = {find_tensor(ck, "query.gate").value, find_tensor(ck, "query.up").value,
             find_tensor(ck, "query.down").value};
  r.tool = {find_tensor(ck, "tool.gate").value, find_tensor(ck, "tool.up").value,
            find_tensor(ck, "tool.down").value};
  validate_encoder(r.query);
  validate_encoder(r.tool);
  require_same_shape(r.query.gate, r.tool.gate, "query/tool encoder");
  const Mat& w = find_tensor(ck, "wdim").value;
  require_shape(w, 1, r.query.gate.rows(), "wdim");
  r.wdim = std::make_shared<DimWeight>(DimWeight{Vec(w.storage())});
  return r;
}

std::string judge_hash(const JudgeHead& j) { return tensors_hash(judge_checkpoint(j, 0).tensors); }

std::string retriever_hash(const Retriever& r) { return tensors_hash(retriever_checkpoint(r, 0).tensors); }

}  // namespace cotools
