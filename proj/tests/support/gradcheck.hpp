#pragma once

// Finite-difference checks of the adapter backward passes on seeded random
// configurations. Each returns the relative error between the analytic and
// the central-difference gradient over every parameter.

#include <algorithm>
#include <vector>

#include "cotools/adapters.hpp"

namespace cotools::testing {

inline void randomize(Mat& m, Rng& rng, double sd) {
  for (double& x : m.storage()) x = rng.normal(0.0, sd);
}

inline Vec random_vec(std::size_t n, Rng& rng, double sd = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

inline Vec flatten(const std::vector<const Mat*>& ms, const Vec* tail = nullptr) {
  std::vector<double> out;
  for (const Mat* m : ms) out.insert(out.end(), m->storage().begin(), m->storage().end());
  if (tail) out.insert(out.end(), tail->begin(), tail->end());
  return Vec(std::move(out));
}

inline void unflatten(const Vec& x, const std::vector<Mat*>& ms, Vec* tail = nullptr) {
  std::size_t k = 0;
  for (Mat* m : ms) {
    for (double& v : m->storage()) v = x[k++];
  }
  if (tail) {
    for (double& v : *tail) v = x[k++];
  }
}

struct GradCase {
  double rel_error;
  std::size_t params;
};

inline GradCase judge_grad_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 2 + rng.below(6), D = 1 + rng.below(6);
  JudgeHead j{Mat(d, D), Mat(d, D), Mat(D, 1)};
  randomize(j.gate, rng, 0.6);
  randomize(j.up, rng, 0.6);
  randomize(j.down, rng, 0.6);
  const Vec h = random_vec(d, rng);
  const int label = static_cast<int>(rng.below(2));
  const double weight = 0.5 + rng.uniform() * 3.0;

  JudgeGrad g(j);
  judge_backward(h, label, weight, j, g);
  const Vec ana = flatten({&g.gate, &g.up, &g.down});

  JudgeHead probe = j;
  auto f = [&](const Vec& x) {
    unflatten(x, {&probe.gate, &probe.up, &probe.down});
    return weight * bce_loss(judge_score(h, probe), label).loss;
  };
  const Vec num = finite_diff_grad(f, flatten({&j.gate, &j.up, &j.down}));
  return {relative_error(ana, num, 1e-10), ana.size()};
}

inline GradCase retriever_grad_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 2 + rng.below(5), D = 1 + rng.below(5);
  const std::size_t nq = 1 + rng.below(4), nt = 1 + rng.below(4);
  auto head = [&] {
    EncoderHead e{Mat(d, D), Mat(d, D), Mat(D, d)};
    randomize(e.gate, rng, 0.5);
    randomize(e.up, rng, 0.5);
    randomize(e.down, rng, 0.5);
    return e;
  };
  Retriever r{head(), head(), make_dim_weight(d)};
  for (double& w : r.wdim->w) w = 0.5 + rng.uniform();
  std::vector<Vec> qh, th;
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < nq; ++i) qh.push_back(random_vec(d, rng));
  for (std::size_t i = 0; i < nt; ++i) th.push_back(random_vec(d, rng));
  for (std::size_t i = 0; i < nq; ++i) gold.push_back(static_cast<std::size_t>(rng.below(nt)));

  RetrieverGrad g(r);
  retriever_backward(qh, th, gold, r, g);
  const Vec ana = flatten({&g.q_gate, &g.q_up, &g.q_down, &g.t_gate, &g.t_up, &g.t_down}, &g.wdim);

  Retriever probe{r.query, r.tool, std::make_shared<DimWeight>(*r.wdim)};
  auto f = [&](const Vec& x) {
    unflatten(x, {&probe.query.gate, &probe.query.up, &probe.query.down, &probe.tool.gate, &probe.tool.up,
                  &probe.tool.down},
              &probe.wdim->w);
    return retriever_loss(qh, th, gold, probe);
  };
  const Vec x0 = flatten({&r.query.gate, &r.query.up, &r.query.down, &r.tool.gate, &r.tool.up, &r.tool.down},
                         &r.wdim->w);
  const Vec num = finite_diff_grad(f, x0);
  return {relative_error(ana, num, 1e-10), ana.size()};
}

}  // namespace cotools::testing
