#include "cotools/optim.hpp"

#include <cmath>

namespace cotools {

Adam::Adam(const std::vector<const Mat*>& shapes, AdamHyper hyper) : hyper_(hyper) {
  for (const Mat* p : shapes) {
    m_.emplace_back(p->rows(), p->cols());
    v_.emplace_back(p->rows(), p->cols());
  }
}

static void check_lists(std::size_t np, std::size_t ng, std::size_t nl, std::size_t expect) {
  if (np != expect || ng != expect || nl != expect) {
    throw Error(Errc::ShapeMismatch, "optimizer parameter/grad/lr list sizes disagree");
  }
}

void Adam::step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
                const std::vector<double>& lrs) {
  check_lists(params.size(), grads.size(), lrs.size(), m_.size());
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = std::sqrt(1.0 - std::pow(hyper_.beta2, static_cast<double>(t_)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "Adam param/grad");
    require_finite(*grads[i], "gradient");
    if (lrs[i] == 0.0) continue;
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const double step = lrs[i] / bc1;
    for (std::size_t k = 0; k < params[i]->size(); ++k) {
      m[k] = hyper_.beta1 * m[k] + (1.0 - hyper_.beta1) * g[k];
      v[k] = hyper_.beta2 * v[k] + (1.0 - hyper_.beta2) * g[k] * g[k];
      p[k] -= step * m[k] / (std::sqrt(v[k]) / bc2 + hyper_.eps);
    }
    require_finite(*params[i], "parameter after Adam step");
  }
}

void sgd_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
              const std::vector<double>& lrs) {
  check_lists(params.size(), grads.size(), lrs.size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "SGD param/grad");
    double* p = params[i]->data();
    const double* g = grads[i]->data();
    for (std::size_t k = 0; k < params[i]->size(); ++k) p[k] -= lrs[i] * g[k];
    require_finite(*params[i], "parameter after SGD step");
  }
}

}  // namespace cotools
