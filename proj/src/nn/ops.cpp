#include "hldet/nn/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace hldet::nn {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

Graph& graph_of(Var v) { return *v.graph(); }

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Graph& g = graph_of(a);
  Matrix out = a.value() * b.value();
  int ia = a.id(), ib = b.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a, b}, [ia, ib, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia).noalias() += d * g.value(ib).transpose();
    if (g.needs_grad(ib)) g.grad(ib).noalias() += g.value(ia).transpose() * d;
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Graph& g = graph_of(a);
  Matrix out = a.value() * b.value().transpose();
  int ia = a.id(), ib = b.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a, b}, [ia, ib, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia).noalias() += d * g.value(ib);
    if (g.needs_grad(ib)) g.grad(ib).noalias() += d.transpose() * g.value(ia);
  });
}

Var affine(Var x, Var w, Var bias) {
  require(x.cols() == w.rows() && bias.rows() == 1 && bias.cols() == w.cols(), "affine: shapes");
  Graph& g = graph_of(x);
  Matrix out = x.value() * w.value();
  out.rowwise() += bias.value().row(0);
  int ix = x.id(), iw = w.id(), ib = bias.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {x, w, bias}, [ix, iw, ib, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ix)) g.grad(ix).noalias() += d * g.value(iw).transpose();
    if (g.needs_grad(iw)) g.grad(iw).noalias() += g.value(ix).transpose() * d;
    if (g.needs_grad(ib)) g.grad(ib) += d.colwise().sum();
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes");
  Graph& g = graph_of(a);
  Matrix out = a.value() + b.value();
  int ia = a.id(), ib = b.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a, b}, [ia, ib, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += d;
    if (g.needs_grad(ib)) g.grad(ib) += d;
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shapes");
  Graph& g = graph_of(a);
  Matrix out = a.value() - b.value();
  int ia = a.id(), ib = b.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a, b}, [ia, ib, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += d;
    if (g.needs_grad(ib)) g.grad(ib) -= d;
  });
}

Var mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shapes");
  Graph& g = graph_of(a);
  Matrix out = a.value().cwiseProduct(b.value());
  int ia = a.id(), ib = b.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a, b}, [ia, ib, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += d.cwiseProduct(g.value(ib));
    if (g.needs_grad(ib)) g.grad(ib) += d.cwiseProduct(g.value(ia));
  });
}

Var scale(Var a, float s) {
  Graph& g = graph_of(a);
  Matrix out = a.value() * s;
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self, s](Graph& g) { g.grad(ia) += g.grad(self) * s; });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shapes");
  Graph& g = graph_of(a);
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  int ia = a.id(), ir = row.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a, row}, [ia, ir, self](Graph& g) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += d;
    if (g.needs_grad(ir)) g.grad(ir) += d.colwise().sum();
  });
}

Var sigmoid(Var a) {
  Graph& g = graph_of(a);
  Matrix out = a.value().unaryExpr([](float x) { return 1.0f / (1.0f + std::exp(-x)); });
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self](Graph& g) {
    const Matrix& y = g.value(self);
    g.grad(ia).array() += g.grad(self).array() * y.array() * (1.0f - y.array());
  });
}

Var tanh(Var a) {
  Graph& g = graph_of(a);
  Matrix out = a.value().array().tanh().matrix();
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self](Graph& g) {
    const Matrix& y = g.value(self);
    g.grad(ia).array() += g.grad(self).array() * (1.0f - y.array().square());
  });
}

Var relu(Var a) {
  Graph& g = graph_of(a);
  Matrix out = a.value().cwiseMax(0.0f);
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self](Graph& g) {
    const Matrix& x = g.value(ia);
    g.grad(ia).array() += (x.array() > 0.0f).select(g.grad(self).array(), 0.0f);
  });
}

Var gelu(Var a) {
  // tanh approximation
  constexpr float k = 0.7978845608f;  // sqrt(2/pi)
  Graph& g = graph_of(a);
  Matrix out = a.value().unaryExpr([](float x) {
    return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
  });
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self](Graph& g) {
    const Matrix& x = g.value(ia);
    Matrix dydx = x.unaryExpr([](float v) {
      float u = k * (v + 0.044715f * v * v * v);
      float t = std::tanh(u);
      float du = k * (1.0f + 3.0f * 0.044715f * v * v);
      return 0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * du;
    });
    g.grad(ia).array() += g.grad(self).array() * dydx.array();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty");
  Graph& g = graph_of(parts[0]);
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), parts, [ids, offsets, self](Graph& g) {
    const Matrix& d = g.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (g.needs_grad(ids[i])) {
        Matrix& gi = g.grad(ids[i]);
        gi += d.middleCols(offsets[i], gi.cols());
      }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && start + count <= a.cols(), "slice_cols: range");
  Graph& g = graph_of(a);
  Matrix out = a.value().middleCols(start, count);
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self, start, count](Graph& g) {
    g.grad(ia).middleCols(start, count) += g.grad(self);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: empty");
  Graph& g = graph_of(parts[0]);
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: col mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), parts, [ids, offsets, self](Graph& g) {
    const Matrix& d = g.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (g.needs_grad(ids[i])) {
        Matrix& gi = g.grad(ids[i]);
        gi += d.middleRows(offsets[i], gi.rows());
      }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && start + count <= a.rows(), "slice_rows: range");
  Graph& g = graph_of(a);
  Matrix out = a.value().middleRows(start, count);
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self, start, count](Graph& g) {
    g.grad(ia).middleRows(start, count) += g.grad(self);
  });
}

Var gather_rows(Var a, std::vector<int> index) {
  Graph& g = graph_of(a);
  const Matrix& src = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), src.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] < src.rows(), "gather_rows: index out of range");
    if (index[r] < 0)
      out.row(static_cast<Eigen::Index>(r)).setZero();
    else
      out.row(static_cast<Eigen::Index>(r)) = src.row(index[r]);
  }
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self, index = std::move(index)](Graph& g) {
    const Matrix& d = g.grad(self);
    Matrix& ga = g.grad(ia);
    for (std::size_t r = 0; r < index.size(); ++r)
      if (index[r] >= 0) ga.row(index[r]) += d.row(static_cast<Eigen::Index>(r));
  });
}

Var embedding(Graph& g, Parameter& table, std::span<const int> ids) {
  const Matrix& src = table.value;
  Matrix out(static_cast<Eigen::Index>(ids.size()), src.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    require(ids[r] < src.rows(), "embedding: id out of range");
    if (ids[r] < 0)
      out.row(static_cast<Eigen::Index>(r)).setZero();
    else
      out.row(static_cast<Eigen::Index>(r)) = src.row(ids[r]);
  }
  if (!g.grad_enabled() || !table.trainable) return g.constant(std::move(out));
  // A stand-in leaf carries needs_grad so the op's backward runs.
  Var leaf = g.param(table);
  std::vector<int> index(ids.begin(), ids.end());
  Parameter* tp = &table;
  int self = static_cast<int>(g.size());
  (void)leaf;
  return g.record(std::move(out), {leaf}, [tp, self, index = std::move(index)](Graph& g) {
    const Matrix& d = g.grad(self);
    if (tp->grad.size() == 0) tp->zero_grad();
    for (std::size_t r = 0; r < index.size(); ++r)
      if (index[r] >= 0) tp->grad.row(index[r]) += d.row(static_cast<Eigen::Index>(r));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, float eps) {
  require(gamma.cols() == x.cols() && beta.cols() == x.cols(), "layer_norm: shapes");
  Graph& g = graph_of(x);
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows(), d = xv.cols();
  Matrix xhat(n, d);
  Eigen::VectorXf rstd(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    float mu = xv.row(r).mean();
    float var = (xv.row(r).array() - mu).square().mean();
    rstd(r) = 1.0f / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * rstd(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  int ix = x.id(), ig = gamma.id(), ib = beta.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {x, gamma, beta},
                  [ix, ig, ib, self, xhat = std::move(xhat), rstd = std::move(rstd)](Graph& g) {
                    const Matrix& dy = g.grad(self);
                    if (g.needs_grad(ig)) g.grad(ig) += dy.cwiseProduct(xhat).colwise().sum();
                    if (g.needs_grad(ib)) g.grad(ib) += dy.colwise().sum();
                    if (g.needs_grad(ix)) {
                      Matrix dxhat = dy;
                      dxhat.array().rowwise() *= g.value(ig).row(0).array();
                      Matrix& gx = g.grad(ix);
                      const float inv_d = 1.0f / static_cast<float>(dxhat.cols());
                      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                        float m1 = dxhat.row(r).sum() * inv_d;
                        float m2 = dxhat.row(r).dot(xhat.row(r)) * inv_d;
                        gx.row(r).array() +=
                            rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                      }
                    }
                  });
}

namespace {

Var apply_mask(Var x, Matrix mask) {
  Graph& g = graph_of(x);
  Matrix out = x.value().cwiseProduct(mask);
  int ix = x.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {x}, [ix, self, mask = std::move(mask)](Graph& g) {
    g.grad(ix) += g.grad(self).cwiseProduct(mask);
  });
}

}  // namespace

Var dropout(Var x, float p) {
  Graph& g = graph_of(x);
  if (!g.training() || p <= 0.0f) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(x.rows(), x.cols());
  const float s = 1.0f / (1.0f - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(g.rng()) ? s : 0.0f;
  return apply_mask(x, std::move(mask));
}

Var spatial_dropout(Var x, int batch, int steps, float p) {
  Graph& g = graph_of(x);
  if (!g.training() || p <= 0.0f) return x;
  require(x.rows() == static_cast<Eigen::Index>(batch) * steps, "spatial_dropout: shape");
  std::bernoulli_distribution keep(1.0 - p);
  const float s = 1.0f / (1.0f - p);
  Matrix mask(x.rows(), x.cols());
  for (int b = 0; b < batch; ++b) {
    Eigen::Matrix<float, 1, Eigen::Dynamic> row(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) row(c) = keep(g.rng()) ? s : 0.0f;
    for (int t = 0; t < steps; ++t) mask.row(static_cast<Eigen::Index>(b) * steps + t) = row;
  }
  return apply_mask(x, std::move(mask));
}

Var sum_all(Var a) {
  Graph& g = graph_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  int ia = a.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {a}, [ia, self](Graph& g) {
    g.grad(ia).array() += g.grad(self)(0, 0);
  });
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0f / static_cast<float>(a.value().size())); }

Var bce_with_logits(Var logits, std::span<const float> targets) {
  require(logits.cols() == 1 && static_cast<std::size_t>(logits.rows()) == targets.size(),
          "bce_with_logits: shape");
  Graph& g = graph_of(logits);
  const Matrix& z = logits.value();
  const auto n = static_cast<double>(targets.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double x = z(i, 0), y = targets[static_cast<std::size_t>(i)];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  Matrix out(1, 1);
  out(0, 0) = static_cast<float>(loss / n);
  std::vector<float> t(targets.begin(), targets.end());
  int il = logits.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {logits}, [il, self, t = std::move(t)](Graph& g) {
    const float d = g.grad(self)(0, 0) / static_cast<float>(t.size());
    const Matrix& z = g.value(il);
    Matrix& gz = g.grad(il);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      float p = 1.0f / (1.0f + std::exp(-z(i, 0)));
      gz(i, 0) += d * (p - t[static_cast<std::size_t>(i)]);
    }
  });
}

namespace {

Matrix row_softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    float m = z.row(r).maxCoeff();
    p.row(r) = (z.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace

Var cross_entropy(Var logits, std::span<const int> targets) {
  require(static_cast<std::size_t>(logits.rows()) == targets.size(), "cross_entropy: shape");
  Graph& g = graph_of(logits);
  const Matrix& z = logits.value();
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < t.size(); ++i) {
    require(t[i] < z.cols(), "cross_entropy: target out of range");
    if (t[i] >= 0) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Matrix probs(static_cast<Eigen::Index>(rows.size()), z.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto r = rows[k];
    float m = z.row(r).maxCoeff();
    auto e = (z.row(r).array() - m).exp();
    float s = e.sum();
    probs.row(static_cast<Eigen::Index>(k)) = e / s;
    loss += -(z(r, t[static_cast<std::size_t>(r)]) - m - std::log(s));
  }
  Matrix out(1, 1);
  out(0, 0) = rows.empty() ? 0.0f : static_cast<float>(loss / static_cast<double>(rows.size()));
  int il = logits.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {logits},
                  [il, self, t = std::move(t), rows = std::move(rows), probs = std::move(probs)](Graph& g) {
                    if (rows.empty()) return;
                    const float d = g.grad(self)(0, 0) / static_cast<float>(rows.size());
                    Matrix& gz = g.grad(il);
                    for (std::size_t k = 0; k < rows.size(); ++k) {
                      auto r = rows[k];
                      gz.row(r) += d * probs.row(static_cast<Eigen::Index>(k));
                      gz(r, t[static_cast<std::size_t>(r)]) -= d;
                    }
                  });
}

Var soft_cross_entropy(Var logits, const Matrix& target_probs) {
  require(logits.rows() == target_probs.rows() && logits.cols() == target_probs.cols(),
          "soft_cross_entropy: shape");
  Graph& g = graph_of(logits);
  Matrix p = row_softmax(logits.value());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      if (target_probs(r, c) > 0.0f)
        loss -= target_probs(r, c) * std::log(std::max(p(r, c), 1e-30f));
  Matrix out(1, 1);
  const auto n = std::max<Eigen::Index>(p.rows(), 1);
  out(0, 0) = static_cast<float>(loss / static_cast<double>(n));
  Matrix delta = p - target_probs;
  int il = logits.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {logits}, [il, self, n, delta = std::move(delta)](Graph& g) {
    g.grad(il) += delta * (g.grad(self)(0, 0) / static_cast<float>(n));
  });
}

}  // namespace hldet::nn
