#pragma once

#include <vector>

#include "hldet/nn/graph.hpp"

namespace hldet::nn {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-7f;
  /// Decoupled (AdamW-style) weight decay.
  float weight_decay = 0.0f;
  /// Global gradient-norm clip; <= 0 disables.
  float clip_norm = 0.0f;
};

/// Adam over the trainable subset of a parameter list. Moments are stored on the
/// parameters, so a new optimizer over the same parameters starts fresh via reset().
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);
  void step();
  void zero_grad();
  void set_lr(float lr) { cfg_.lr = lr; }
  float lr() const { return cfg_.lr; }
  long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace hldet::nn
