#pragma once

#include <string>
#include <vector>

#include "hldet/nn/ops.hpp"

namespace hldet::nn {

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Matrix uniform(Eigen::Index rows, Eigen::Index cols, float limit, Rng& rng);
Matrix normal(Eigen::Index rows, Eigen::Index cols, float stddev, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
  Eigen::Index out_features() const { return w_->value.cols(); }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet& ps, const std::string& name, Eigen::Index dim);
  Var operator()(Graph& g, Var x) const;

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
};

/// Unidirectional LSTM layer over batch-major sequences.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng);
  /// `weight_drop` applies DropConnect to the recurrent kernel while training.
  Var operator()(Graph& g, Var x, std::span<const int> lengths, int steps, bool reverse = false,
                 float weight_drop = 0.0f) const;
  Eigen::Index hidden() const { return u_->value.rows(); }

 private:
  Parameter* w_ = nullptr;
  Parameter* u_ = nullptr;
  Parameter* b_ = nullptr;
};

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng);
  /// [B*T, in] -> [B*T, 2*hidden]
  Var operator()(Graph& g, Var x, std::span<const int> lengths, int steps) const;

 private:
  Lstm fwd_, bwd_;
};

/// 1-D convolution with "same" zero padding, realized as im2col + affine.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index filters, int kernel,
         Rng& rng);
  Var operator()(Graph& g, Var x, int batch, int steps) const;

 private:
  int kernel_ = 3;
  Linear proj_;
};

struct TransformerConfig {
  int layers = 2;
  int dim = 64;
  int heads = 4;
  int ffn = 256;
  int max_positions = 32;
  float dropout = 0.1f;
};

/// Pre-LayerNorm transformer block.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParameterSet& ps, const std::string& name, const TransformerConfig& cfg, Rng& rng);
  Var operator()(Graph& g, Var x, std::span<const int> lengths, int steps, bool causal) const;

 private:
  int heads_ = 1;
  float dropout_ = 0.0f;
  LayerNorm ln1_, ln2_;
  Linear q_, k_, v_, o_, ff1_, ff2_;
};

/// Token + learned position embeddings, a stack of pre-LN blocks and a final
/// LayerNorm. Parameters are named "<name>.tok", "<name>.pos", "<name>.block<i>.*", "<name>.ln_f.*".
class TransformerStack {
 public:
  TransformerStack() = default;
  TransformerStack(ParameterSet& ps, const std::string& name, int vocab, const TransformerConfig& cfg,
                   Rng& rng);

  /// `ids` is batch-major [B*T]; returns hidden states [B*T, dim].
  Var operator()(Graph& g, std::span<const int> ids, std::span<const int> lengths, int steps,
                 bool causal) const;
  /// Logits over the vocabulary via the tied token embedding plus an output bias.
  Var tied_logits(Graph& g, Var hidden) const;

  /// Appends rows for new vocabulary entries (initialized near the mean embedding).
  void grow_vocab(int new_size, Rng& rng);

  Parameter& token_embedding() const { return *tok_; }
  const TransformerConfig& config() const { return cfg_; }

 private:
  TransformerConfig cfg_;
  Parameter* tok_ = nullptr;
  Parameter* pos_ = nullptr;
  Parameter* out_bias_ = nullptr;
  std::vector<TransformerBlock> blocks_;
  LayerNorm ln_f_;
};

}  // namespace hldet::nn
