#include <cmath>
#include <limits>
#include <stdexcept>

#include "hldet/nn/ops.hpp"

namespace hldet::nn {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

float sigm(float x) { return 1.0f / (1.0f + std::exp(-x)); }

struct LstmTape {
  // Per step s: rows are batch entries.
  std::vector<Matrix> gates;   // post-activation i,f,g,o  [B, 4H]
  std::vector<Matrix> c;       // cell after the step      [B, H]
  std::vector<Matrix> tanh_c;  // [B, H]
  std::vector<Matrix> h_prev;  // [B, H]
  std::vector<Matrix> c_prev;  // [B, H]
  std::vector<std::vector<int>> row;  // output row per batch entry, -1 if inactive
};

}  // namespace

Var lstm(Var xproj, Var u, std::span<const int> lengths, int steps, bool reverse) {
  Graph& g = *xproj.graph();
  const int batch = static_cast<int>(lengths.size());
  const Eigen::Index hidden = u.rows();
  require(u.cols() == 4 * hidden, "lstm: recurrent kernel must be [H, 4H]");
  require(xproj.rows() == static_cast<Eigen::Index>(batch) * steps && xproj.cols() == 4 * hidden,
          "lstm: xproj shape");
  const Matrix& xp = xproj.value();
  const Matrix& uv = u.value();

  Matrix out = Matrix::Zero(xp.rows(), hidden);
  Matrix h = Matrix::Zero(batch, hidden), c = Matrix::Zero(batch, hidden);
  auto tape = std::make_shared<LstmTape>();
  const bool keep = g.grad_enabled() && (g.needs_grad(xproj) || g.needs_grad(u));

  Matrix pre(batch, 4 * hidden);
  for (int s = 0; s < steps; ++s) {
    std::vector<int> rows(static_cast<std::size_t>(batch), -1);
    bool any = false;
    for (int b = 0; b < batch; ++b) {
      int len = std::min(lengths[static_cast<std::size_t>(b)], steps);
      if (s < len) {
        int t = reverse ? len - 1 - s : s;
        rows[static_cast<std::size_t>(b)] = b * steps + t;
        any = true;
      }
    }
    if (!any) break;
    pre.noalias() = h * uv;
    Matrix gates(batch, 4 * hidden);
    Matrix c_new = c, h_new = h, tc = Matrix::Zero(batch, hidden);
    for (int b = 0; b < batch; ++b) {
      int r = rows[static_cast<std::size_t>(b)];
      if (r < 0) {
        gates.row(b).setZero();
        continue;
      }
      for (Eigen::Index k = 0; k < hidden; ++k) {
        float gi = sigm(pre(b, k) + xp(r, k));
        float gf = sigm(pre(b, hidden + k) + xp(r, hidden + k));
        float gg = std::tanh(pre(b, 2 * hidden + k) + xp(r, 2 * hidden + k));
        float go = sigm(pre(b, 3 * hidden + k) + xp(r, 3 * hidden + k));
        gates(b, k) = gi;
        gates(b, hidden + k) = gf;
        gates(b, 2 * hidden + k) = gg;
        gates(b, 3 * hidden + k) = go;
        float cn = gf * c(b, k) + gi * gg;
        float t = std::tanh(cn);
        c_new(b, k) = cn;
        tc(b, k) = t;
        h_new(b, k) = go * t;
      }
      out.row(r) = h_new.row(b);
    }
    if (keep) {
      tape->gates.push_back(std::move(gates));
      tape->c.push_back(c_new);
      tape->tanh_c.push_back(std::move(tc));
      tape->h_prev.push_back(h);
      tape->c_prev.push_back(c);
      tape->row.push_back(std::move(rows));
    }
    h = std::move(h_new);
    c = std::move(c_new);
  }

  int ix = xproj.id(), iu = u.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {xproj, u}, [ix, iu, self, tape, hidden, batch](Graph& g) {
    const Matrix& dout = g.grad(self);
    const Matrix& uv = g.value(iu);
    const bool want_x = g.needs_grad(ix), want_u = g.needs_grad(iu);
    Matrix dh_next = Matrix::Zero(batch, hidden), dc_next = Matrix::Zero(batch, hidden);
    Matrix dpre(batch, 4 * hidden);
    for (int s = static_cast<int>(tape->gates.size()) - 1; s >= 0; --s) {
      const auto& rows = tape->row[static_cast<std::size_t>(s)];
      const Matrix& gt = tape->gates[static_cast<std::size_t>(s)];
      const Matrix& tc = tape->tanh_c[static_cast<std::size_t>(s)];
      const Matrix& cp = tape->c_prev[static_cast<std::size_t>(s)];
      Matrix dc_prev = dc_next;
      for (int b = 0; b < batch; ++b) {
        int r = rows[static_cast<std::size_t>(b)];
        if (r < 0) {
          dpre.row(b).setZero();
          continue;
        }
        for (Eigen::Index k = 0; k < hidden; ++k) {
          float gi = gt(b, k), gf = gt(b, hidden + k), gg = gt(b, 2 * hidden + k),
                go = gt(b, 3 * hidden + k);
          float dh = dout(r, k) + dh_next(b, k);
          float t = tc(b, k);
          float dc = dc_next(b, k) + dh * go * (1.0f - t * t);
          dpre(b, k) = dc * gg * gi * (1.0f - gi);
          dpre(b, hidden + k) = dc * cp(b, k) * gf * (1.0f - gf);
          dpre(b, 2 * hidden + k) = dc * gi * (1.0f - gg * gg);
          dpre(b, 3 * hidden + k) = dh * t * go * (1.0f - go);
          dc_prev(b, k) = dc * gf;
        }
      }
      if (want_x) {
        Matrix& gx = g.grad(ix);
        for (int b = 0; b < batch; ++b) {
          int r = rows[static_cast<std::size_t>(b)];
          if (r >= 0) gx.row(r) += dpre.row(b);
        }
      }
      if (want_u) g.grad(iu).noalias() += tape->h_prev[static_cast<std::size_t>(s)].transpose() * dpre;
      Matrix dh_prev = dpre * uv.transpose();
      for (int b = 0; b < batch; ++b)
        if (rows[static_cast<std::size_t>(b)] < 0) dh_prev.row(b) = dh_next.row(b);
      dh_next = std::move(dh_prev);
      dc_next = std::move(dc_prev);
    }
  });
}

namespace {

struct AttentionTape {
  std::vector<Matrix> probs;  // per (b, h): [T, T]
};

}  // namespace

Var attention(Var q, Var k, Var v, int heads, std::span<const int> lengths, int steps, bool causal) {
  Graph& g = *q.graph();
  const int batch = static_cast<int>(lengths.size());
  const Eigen::Index dim = q.cols();
  require(dim % heads == 0, "attention: dim not divisible by heads");
  require(q.rows() == static_cast<Eigen::Index>(batch) * steps, "attention: rows");
  require(k.rows() == q.rows() && v.rows() == q.rows() && k.cols() == dim && v.cols() == dim,
          "attention: q/k/v shapes");
  const Eigen::Index dh = dim / heads;
  const float scl = 1.0f / std::sqrt(static_cast<float>(dh));
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  constexpr float kNeg = -std::numeric_limits<float>::infinity();

  Matrix out(q.rows(), dim);
  auto tape = std::make_shared<AttentionTape>();
  tape->probs.reserve(static_cast<std::size_t>(batch * heads));
  for (int b = 0; b < batch; ++b) {
    const int len = std::max(1, std::min(lengths[static_cast<std::size_t>(b)], steps));
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * steps;
    for (int hd = 0; hd < heads; ++hd) {
      const Eigen::Index c0 = hd * dh;
      Matrix s = qv.block(r0, c0, steps, dh) * kv.block(r0, c0, steps, dh).transpose() * scl;
      for (int i = 0; i < steps; ++i) {
        for (int j = 0; j < steps; ++j)
          if (j >= len || (causal && j > i)) s(i, j) = kNeg;
        float m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
      }
      out.block(r0, c0, steps, dh).noalias() = s * vv.block(r0, c0, steps, dh);
      tape->probs.push_back(std::move(s));
    }
  }

  int iq = q.id(), ik = k.id(), iv = v.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {q, k, v}, [=](Graph& g) {
    const Matrix& dout = g.grad(self);
    const Matrix& qv = g.value(iq);
    const Matrix& kv = g.value(ik);
    const Matrix& vv = g.value(iv);
    Matrix& gq = g.grad(iq);
    Matrix& gk = g.grad(ik);
    Matrix& gv = g.grad(iv);
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * steps;
      for (int hd = 0; hd < heads; ++hd) {
        const Eigen::Index c0 = hd * dh;
        const Matrix& p = tape->probs[static_cast<std::size_t>(b * heads + hd)];
        Matrix d = dout.block(r0, c0, steps, dh);
        gv.block(r0, c0, steps, dh).noalias() += p.transpose() * d;
        Matrix dp = d * vv.block(r0, c0, steps, dh).transpose();
        Eigen::VectorXf rs = (dp.cwiseProduct(p)).rowwise().sum();
        Matrix ds = p.cwiseProduct(dp.colwise() - rs) * scl;
        gq.block(r0, c0, steps, dh).noalias() += ds * kv.block(r0, c0, steps, dh);
        gk.block(r0, c0, steps, dh).noalias() += ds.transpose() * qv.block(r0, c0, steps, dh);
      }
    }
  });
}

Var masked_mean_pool(Var x, std::span<const int> lengths, int steps) {
  Graph& g = *x.graph();
  const int batch = static_cast<int>(lengths.size());
  require(x.rows() == static_cast<Eigen::Index>(batch) * steps, "masked_mean_pool: shape");
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(batch, xv.cols());
  std::vector<int> lens(lengths.begin(), lengths.end());
  for (int b = 0; b < batch; ++b) {
    int len = std::min(lens[static_cast<std::size_t>(b)], steps);
    if (len <= 0) continue;
    out.row(b) = xv.middleRows(static_cast<Eigen::Index>(b) * steps, len).colwise().sum() /
                 static_cast<float>(len);
  }
  int ix = x.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {x}, [ix, self, lens, steps](Graph& g) {
    const Matrix& d = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (std::size_t b = 0; b < lens.size(); ++b) {
      int len = std::min(lens[b], steps);
      for (int t = 0; t < len; ++t)
        gx.row(static_cast<Eigen::Index>(b) * steps + t) +=
            d.row(static_cast<Eigen::Index>(b)) / static_cast<float>(len);
    }
  });
}

Var masked_max_pool(Var x, std::span<const int> lengths, int steps) {
  Graph& g = *x.graph();
  const int batch = static_cast<int>(lengths.size());
  require(x.rows() == static_cast<Eigen::Index>(batch) * steps, "masked_max_pool: shape");
  const Matrix& xv = x.value();
  const Eigen::Index dim = xv.cols();
  Matrix out = Matrix::Zero(batch, dim);
  std::vector<int> argmax(static_cast<std::size_t>(batch * dim), -1);
  for (int b = 0; b < batch; ++b) {
    int len = std::min(lengths[static_cast<std::size_t>(b)], steps);
    for (Eigen::Index c = 0; c < dim; ++c) {
      int best = -1;
      float bv = 0.0f;
      for (int t = 0; t < len; ++t) {
        float val = xv(static_cast<Eigen::Index>(b) * steps + t, c);
        if (best < 0 || val > bv) best = t, bv = val;
      }
      if (best >= 0) {
        out(b, c) = bv;
        argmax[static_cast<std::size_t>(b * dim + c)] = b * steps + best;
      }
    }
  }
  int ix = x.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {x}, [ix, self, batch, dim, argmax = std::move(argmax)](Graph& g) {
    const Matrix& d = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (int b = 0; b < batch; ++b)
      for (Eigen::Index c = 0; c < dim; ++c) {
        int r = argmax[static_cast<std::size_t>(b * dim + c)];
        if (r >= 0) gx(r, c) += d(b, c);
      }
  });
}

Var attention_pool(Var x, Var scores, std::span<const int> lengths, int steps) {
  Graph& g = *x.graph();
  const int batch = static_cast<int>(lengths.size());
  require(x.rows() == static_cast<Eigen::Index>(batch) * steps && scores.rows() == x.rows() &&
              scores.cols() == 1,
          "attention_pool: shapes");
  const Matrix& xv = x.value();
  const Matrix& sv = scores.value();
  Matrix alpha = Matrix::Zero(x.rows(), 1);
  Matrix out = Matrix::Zero(batch, xv.cols());
  std::vector<int> lens(lengths.begin(), lengths.end());
  for (int b = 0; b < batch; ++b) {
    int len = std::min(lens[static_cast<std::size_t>(b)], steps);
    if (len <= 0) continue;
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * steps;
    float m = sv.middleRows(r0, len).maxCoeff();
    float z = 0.0f;
    for (int t = 0; t < len; ++t) z += (alpha(r0 + t, 0) = std::exp(sv(r0 + t, 0) - m));
    for (int t = 0; t < len; ++t) {
      alpha(r0 + t, 0) /= z;
      out.row(b) += alpha(r0 + t, 0) * xv.row(r0 + t);
    }
  }
  int ix = x.id(), is = scores.id();
  int self = static_cast<int>(g.size());
  return g.record(std::move(out), {x, scores},
                  [ix, is, self, lens, steps, alpha = std::move(alpha)](Graph& g) {
                    const Matrix& d = g.grad(self);
                    const Matrix& xv = g.value(ix);
                    const bool want_x = g.needs_grad(ix), want_s = g.needs_grad(is);
                    for (std::size_t b = 0; b < lens.size(); ++b) {
                      int len = std::min(lens[b], steps);
                      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * steps;
                      const auto db = d.row(static_cast<Eigen::Index>(b));
                      if (want_x)
                        for (int t = 0; t < len; ++t) g.grad(ix).row(r0 + t) += alpha(r0 + t, 0) * db;
                      if (want_s) {
                        // d alpha_t = <d, x_t>; softmax backward
                        float avg = 0.0f;
                        std::vector<float> da(static_cast<std::size_t>(std::max(len, 0)));
                        for (int t = 0; t < len; ++t) {
                          da[static_cast<std::size_t>(t)] = db.dot(xv.row(r0 + t));
                          avg += alpha(r0 + t, 0) * da[static_cast<std::size_t>(t)];
                        }
                        for (int t = 0; t < len; ++t)
                          g.grad(is)(r0 + t, 0) += alpha(r0 + t, 0) * (da[static_cast<std::size_t>(t)] - avg);
                      }
                    }
                  });
}

}  // namespace hldet::nn
