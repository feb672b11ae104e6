#include "hldet/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace hldet::nn {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, float limit, Rng& rng) {
  std::uniform_real_distribution<float> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  float limit = std::sqrt(6.0f / static_cast<float>(rows + cols));
  return uniform(rows, cols, limit, rng);
}

Matrix normal(Eigen::Index rows, Eigen::Index cols, float stddev, Rng& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : w_(&ps.add(name + ".w", glorot_uniform(in, out, rng))),
      b_(&ps.add(name + ".b", Matrix::Zero(1, out))) {}

Var Linear::operator()(Graph& g, Var x) const { return affine(x, g.param(*w_), g.param(*b_)); }

LayerNorm::LayerNorm(ParameterSet& ps, const std::string& name, Eigen::Index dim)
    : gamma_(&ps.add(name + ".gamma", Matrix::Ones(1, dim))),
      beta_(&ps.add(name + ".beta", Matrix::Zero(1, dim))) {}

Var LayerNorm::operator()(Graph& g, Var x) const {
  return layer_norm(x, g.param(*gamma_), g.param(*beta_));
}

Lstm::Lstm(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  w_ = &ps.add(name + ".w", glorot_uniform(in, 4 * hidden, rng));
  u_ = &ps.add(name + ".u", glorot_uniform(hidden, 4 * hidden, rng));
  Matrix b = Matrix::Zero(1, 4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget-gate bias
  b_ = &ps.add(name + ".b", std::move(b));
}

Var Lstm::operator()(Graph& g, Var x, std::span<const int> lengths, int steps, bool reverse,
                     float weight_drop) const {
  Var xproj = affine(x, g.param(*w_), g.param(*b_));
  Var u = g.param(*u_);
  if (weight_drop > 0.0f) u = dropout(u, weight_drop);
  return lstm(xproj, u, lengths, steps, reverse);
}

BiLstm::BiLstm(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng)
    : fwd_(ps, name + ".fwd", in, hidden, rng), bwd_(ps, name + ".bwd", in, hidden, rng) {}

Var BiLstm::operator()(Graph& g, Var x, std::span<const int> lengths, int steps) const {
  return concat_cols({fwd_(g, x, lengths, steps, false), bwd_(g, x, lengths, steps, true)});
}

Conv1d::Conv1d(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index filters,
               int kernel, Rng& rng)
    : kernel_(kernel), proj_(ps, name, in * kernel, filters, rng) {}

Var Conv1d::operator()(Graph& g, Var x, int batch, int steps) const {
  const int half = kernel_ / 2;
  std::vector<Var> taps;
  for (int k = 0; k < kernel_; ++k) {
    int shift = k - half;
    std::vector<int> idx(static_cast<std::size_t>(batch) * steps);
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < steps; ++t) {
        int src = t + shift;
        idx[static_cast<std::size_t>(b * steps + t)] = (src < 0 || src >= steps) ? -1 : b * steps + src;
      }
    taps.push_back(gather_rows(x, std::move(idx)));
  }
  return proj_(g, concat_cols(taps));
}

TransformerBlock::TransformerBlock(ParameterSet& ps, const std::string& name,
                                   const TransformerConfig& cfg, Rng& rng)
    : heads_(cfg.heads),
      dropout_(cfg.dropout),
      ln1_(ps, name + ".ln1", cfg.dim),
      ln2_(ps, name + ".ln2", cfg.dim),
      q_(ps, name + ".q", cfg.dim, cfg.dim, rng),
      k_(ps, name + ".k", cfg.dim, cfg.dim, rng),
      v_(ps, name + ".v", cfg.dim, cfg.dim, rng),
      o_(ps, name + ".o", cfg.dim, cfg.dim, rng),
      ff1_(ps, name + ".ff1", cfg.dim, cfg.ffn, rng),
      ff2_(ps, name + ".ff2", cfg.ffn, cfg.dim, rng) {}

Var TransformerBlock::operator()(Graph& g, Var x, std::span<const int> lengths, int steps,
                                 bool causal) const {
  Var h = ln1_(g, x);
  Var a = attention(q_(g, h), k_(g, h), v_(g, h), heads_, lengths, steps, causal);
  x = add(x, dropout(o_(g, a), dropout_));
  Var f = ff2_(g, gelu(ff1_(g, ln2_(g, x))));
  return add(x, dropout(f, dropout_));
}

TransformerStack::TransformerStack(ParameterSet& ps, const std::string& name, int vocab,
                                   const TransformerConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  tok_ = &ps.add(name + ".tok", normal(vocab, cfg.dim, 0.02f, rng));
  pos_ = &ps.add(name + ".pos", normal(cfg.max_positions, cfg.dim, 0.02f, rng));
  out_bias_ = &ps.add(name + ".out_bias", Matrix::Zero(1, vocab));
  for (int i = 0; i < cfg.layers; ++i)
    blocks_.emplace_back(ps, name + ".block" + std::to_string(i), cfg, rng);
  ln_f_ = LayerNorm(ps, name + ".ln_f", cfg.dim);
}

Var TransformerStack::operator()(Graph& g, std::span<const int> ids, std::span<const int> lengths,
                                 int steps, bool causal) const {
  if (steps > cfg_.max_positions) throw std::invalid_argument("sequence longer than max_positions");
  const int batch = static_cast<int>(lengths.size());
  std::vector<int> pos(ids.size());
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < steps; ++t) pos[static_cast<std::size_t>(b * steps + t)] = t;
  Var x = add(embedding(g, *tok_, ids), embedding(g, *pos_, pos));
  x = dropout(x, cfg_.dropout);
  for (const auto& blk : blocks_) x = blk(g, x, lengths, steps, causal);
  return ln_f_(g, x);
}

Var TransformerStack::tied_logits(Graph& g, Var hidden) const {
  return add_row(matmul_nt(hidden, g.param(*tok_)), g.param(*out_bias_));
}

void TransformerStack::grow_vocab(int new_size, Rng& rng) {
  const auto old = tok_->value.rows();
  if (new_size <= old) return;
  Matrix mean = tok_->value.colwise().mean();
  Matrix grown(new_size, tok_->value.cols());
  grown.topRows(old) = tok_->value;
  Matrix noise = normal(new_size - old, tok_->value.cols(), 0.02f, rng);
  for (Eigen::Index r = old; r < new_size; ++r) grown.row(r) = mean + noise.row(r - old);
  tok_->value = std::move(grown);
  Matrix bias(1, new_size);
  bias.leftCols(old) = out_bias_->value;
  bias.rightCols(new_size - old).setConstant(out_bias_->value.minCoeff());
  out_bias_->value = std::move(bias);
}

}  // namespace hldet::nn
