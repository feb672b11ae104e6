#pragma once

#include <span>
#include <vector>

#include "hldet/nn/graph.hpp"

// Differentiable operations over 2-D row-major matrices. Sequence batches use a
// batch-major layout: row b*T + t holds time step t of example b.
namespace hldet::nn {

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
/// x * w + bias (bias is 1 x out, broadcast over rows)
Var affine(Var x, Var w, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float s);
Var add_row(Var a, Var row);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var gelu(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
/// Row gather; index -1 yields a zero row.
Var gather_rows(Var a, std::vector<int> index);
/// Row gather straight from a parameter; the backward pass scatters into p.grad.
Var embedding(Graph& g, Parameter& table, std::span<const int> ids);

Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);

/// Inverted dropout; identity when the graph is not in training mode.
Var dropout(Var x, float p);
/// Drops whole feature channels per example (shared across time steps).
Var spatial_dropout(Var x, int batch, int steps, float p);

Var sum_all(Var a);
Var mean_all(Var a);

/// Mean binary cross-entropy of logits (N x 1) against 0/1 targets.
Var bce_with_logits(Var logits, std::span<const float> targets);
/// Mean softmax cross-entropy over rows whose target is >= 0.
Var cross_entropy(Var logits, std::span<const int> targets);
/// Mean cross-entropy against soft target distributions (rows sum to 1).
Var soft_cross_entropy(Var logits, const Matrix& target_probs);

// Fused sequence kernels.

/// Single-direction LSTM. `xproj` holds x*W + b for every step ([B*T, 4H], gate
/// order i,f,g,o); `u` is the [H, 4H] recurrent kernel. Steps at or beyond an
/// example's length are skipped and emit zeros. With `reverse`, each example is
/// read from its last valid token back to the first.
Var lstm(Var xproj, Var u, std::span<const int> lengths, int steps, bool reverse);

/// Multi-head scaled dot-product attention over [B*T, D] projections. Keys at or
/// beyond an example's length are masked; `causal` also masks future keys.
Var attention(Var q, Var k, Var v, int heads, std::span<const int> lengths, int steps, bool causal);

/// [B*T, D] -> [B, D] pooled over valid steps (zeros for empty sequences).
Var masked_mean_pool(Var x, std::span<const int> lengths, int steps);
Var masked_max_pool(Var x, std::span<const int> lengths, int steps);
/// Softmax of per-step scores ([B*T, 1]) over valid steps, then a weighted sum of x.
Var attention_pool(Var x, Var scores, std::span<const int> lengths, int steps);

}  // namespace hldet::nn
