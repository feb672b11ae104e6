#include "hldet/nn/optim.hpp"

#include <cmath>

namespace hldet::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : cfg_(cfg) {
  for (auto* p : params) {
    if (!p->trainable) continue;
    p->adam_m.setZero(p->value.rows(), p->value.cols());
    p->adam_v.setZero(p->value.rows(), p->value.cols());
    p->zero_grad();
    params_.push_back(p);
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

void Adam::step() {
  ++t_;
  float clip = 1.0f;
  if (cfg_.clip_norm > 0.0f) {
    double sq = 0.0;
    for (auto* p : params_)
      if (p->grad.size()) sq += static_cast<double>(p->grad.squaredNorm());
    double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) clip = static_cast<float>(cfg_.clip_norm / norm);
  }
  const float b1 = cfg_.beta1, b2 = cfg_.beta2;
  const float c1 = 1.0f - std::pow(b1, static_cast<float>(t_));
  const float c2 = 1.0f - std::pow(b2, static_cast<float>(t_));
  const float step = cfg_.lr * std::sqrt(c2) / c1;
  for (auto* p : params_) {
    if (p->grad.size() == 0) continue;
    auto g = p->grad.array() * clip;
    p->adam_m.array() = b1 * p->adam_m.array() + (1.0f - b1) * g;
    p->adam_v.array() = b2 * p->adam_v.array() + (1.0f - b2) * g.square();
    if (cfg_.weight_decay > 0.0f) p->value.array() *= 1.0f - cfg_.lr * cfg_.weight_decay;
    p->value.array() -= step * p->adam_m.array() / (p->adam_v.array().sqrt() + cfg_.eps * std::sqrt(c2));
  }
}

}  // namespace hldet::nn
