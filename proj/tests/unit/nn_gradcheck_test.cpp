// Finite-difference checks for every differentiable op and fused kernel.
#include <functional>

#include <gtest/gtest.h>

#include "hldet/nn/layers.hpp"
#include "hldet/nn/ops.hpp"
#include "hldet/nn/optim.hpp"

using namespace hldet;
using namespace hldet::nn;

namespace {

using Builder = std::function<Var(Graph&, std::vector<Var>&)>;

// Projects the op output onto a fixed random matrix so any shape yields a scalar.
double run(ParameterSet& ps, const Builder& build, const Matrix& proj, bool backprop) {
  Graph g;
  g.set_training(false);
  std::vector<Var> in;
  for (auto* p : ps.all()) in.push_back(g.param(*p));
  Var out = build(g, in);
  Var loss = out.rows() == 1 && out.cols() == 1 ? out : sum_all(mul(out, g.constant(proj)));
  if (backprop) g.backward(loss);
  return loss.scalar();
}

void check(std::vector<Matrix> inputs, const Builder& build, double tol = 2e-2) {
  ParameterSet ps;
  for (std::size_t i = 0; i < inputs.size(); ++i) ps.add("in" + std::to_string(i), inputs[i]);
  Rng rng(7);
  Matrix proj;
  {
    Graph g;
    g.set_training(false);
    std::vector<Var> in;
    for (auto* p : ps.all()) in.push_back(g.param(*p));
    Var out = build(g, in);
    proj = uniform(out.rows(), out.cols(), 1.0f, rng);
  }
  ps.zero_grad();
  run(ps, build, proj, true);
  const float h = 1e-2f;
  for (auto* p : ps.all()) {
    Matrix analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      float orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      double up = run(ps, build, proj, false);
      p->value.data()[i] = orig - h;
      double down = run(ps, build, proj, false);
      p->value.data()[i] = orig;
      double numeric = (up - down) / (2.0 * h);
      double a = analytic.data()[i];
      EXPECT_NEAR(a, numeric, tol * std::max(1.0, std::abs(numeric)))
          << p->name << "[" << i << "]";
    }
  }
}

Matrix rnd(Eigen::Index r, Eigen::Index c, unsigned seed, float lim = 1.0f) {
  Rng rng(seed);
  return uniform(r, c, lim, rng);
}

}  // namespace

TEST(GradCheck, MatmulVariants) {
  check({rnd(3, 4, 1), rnd(4, 2, 2)}, [](Graph&, std::vector<Var>& v) { return matmul(v[0], v[1]); });
  check({rnd(3, 4, 1), rnd(5, 4, 2)}, [](Graph&, std::vector<Var>& v) { return matmul_nt(v[0], v[1]); });
  check({rnd(3, 4, 1), rnd(4, 2, 2), rnd(1, 2, 3)},
        [](Graph&, std::vector<Var>& v) { return affine(v[0], v[1], v[2]); });
}

TEST(GradCheck, Elementwise) {
  check({rnd(3, 4, 1), rnd(3, 4, 2)}, [](Graph&, std::vector<Var>& v) { return mul(add(v[0], v[1]), sub(v[0], v[1])); });
  check({rnd(3, 4, 1), rnd(1, 4, 2)}, [](Graph&, std::vector<Var>& v) { return scale(add_row(v[0], v[1]), 1.7f); });
  check({rnd(3, 4, 1, 2.0f)}, [](Graph&, std::vector<Var>& v) { return sigmoid(v[0]); });
  check({rnd(3, 4, 1, 2.0f)}, [](Graph&, std::vector<Var>& v) { return nn::tanh(v[0]); });
  check({rnd(3, 4, 1, 2.0f)}, [](Graph&, std::vector<Var>& v) { return gelu(v[0]); });
  // keep inputs away from the kink
  Matrix x = rnd(3, 4, 5);
  x = x.unaryExpr([](float a) { return a >= 0 ? a + 0.1f : a - 0.1f; });
  check({x}, [](Graph&, std::vector<Var>& v) { return relu(v[0]); });
}

TEST(GradCheck, Reshaping) {
  check({rnd(3, 2, 1), rnd(3, 3, 2)}, [](Graph&, std::vector<Var>& v) {
    return slice_cols(concat_cols({v[0], v[1], v[0]}), 1, 5);
  });
  check({rnd(2, 3, 1), rnd(4, 3, 2)}, [](Graph&, std::vector<Var>& v) {
    return slice_rows(concat_rows({v[0], v[1]}), 1, 4);
  });
  check({rnd(4, 3, 1)}, [](Graph&, std::vector<Var>& v) { return gather_rows(v[0], {3, -1, 0, 3, 1}); });
}

TEST(GradCheck, LayerNorm) {
  check({rnd(3, 5, 1), rnd(1, 5, 2), rnd(1, 5, 3)},
        [](Graph&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2]); });
}

TEST(GradCheck, Losses) {
  std::vector<float> t{1, 0, 1};
  check({rnd(3, 1, 1, 2.0f)}, [&](Graph&, std::vector<Var>& v) { return bce_with_logits(v[0], t); });
  std::vector<int> ids{2, -1, 0, 4};
  check({rnd(4, 5, 1, 2.0f)}, [&](Graph&, std::vector<Var>& v) { return cross_entropy(v[0], ids); });
  Matrix probs(2, 3);
  probs << 0.2f, 0.5f, 0.3f, 1.0f, 0.0f, 0.0f;
  check({rnd(2, 3, 1, 2.0f)}, [&](Graph&, std::vector<Var>& v) { return soft_cross_entropy(v[0], probs); });
}

TEST(GradCheck, LstmBothDirectionsWithPadding) {
  const int hidden = 3, steps = 4;
  std::vector<int> lens{4, 2, 0};
  for (bool reverse : {false, true}) {
    check({rnd(3 * steps, 4 * hidden, 1), rnd(hidden, 4 * hidden, 2)}, [&](Graph&, std::vector<Var>& v) {
      return lstm(v[0], v[1], lens, steps, reverse);
    });
  }
}

TEST(GradCheck, AttentionMaskedAndCausal) {
  const int steps = 3;
  std::vector<int> lens{3, 2};
  for (bool causal : {false, true}) {
    check({rnd(6, 4, 1), rnd(6, 4, 2), rnd(6, 4, 3)}, [&](Graph&, std::vector<Var>& v) {
      return attention(v[0], v[1], v[2], 2, lens, steps, causal);
    });
  }
}

TEST(GradCheck, Pools) {
  std::vector<int> lens{3, 1};
  check({rnd(6, 3, 1)}, [&](Graph&, std::vector<Var>& v) { return masked_mean_pool(v[0], lens, 3); });
  check({rnd(6, 3, 1)}, [&](Graph&, std::vector<Var>& v) { return masked_max_pool(v[0], lens, 3); });
  check({rnd(6, 3, 1), rnd(6, 1, 2)},
        [&](Graph&, std::vector<Var>& v) { return attention_pool(v[0], v[1], lens, 3); });
}

TEST(GradCheck, EmbeddingScattersIntoTable) {
  ParameterSet ps;
  Rng rng(3);
  auto& table = ps.add("emb", uniform(5, 3, 1.0f, rng));
  ps.zero_grad();
  Graph g;
  std::vector<int> ids{1, 1, 4, -1};
  Var e = embedding(g, table, ids);
  g.backward(sum_all(e));
  EXPECT_FLOAT_EQ(table.grad(1, 0), 2.0f);
  EXPECT_FLOAT_EQ(table.grad(4, 2), 1.0f);
  EXPECT_FLOAT_EQ(table.grad(0, 0), 0.0f);
}

TEST(Layers, ConvSamePaddingMatchesManualSum) {
  ParameterSet ps;
  Rng rng(1);
  Conv1d conv(ps, "c", 2, 1, 3, rng);
  auto& w = ps.at("c.w");
  w.value << 1, 0, 10, 0, 0, 0;  // rows: (tap t-1: ch0 ch1), (tap t), (tap t+1)
  Graph g(false);
  Matrix x(3, 2);
  x << 1, 0, 2, 0, 3, 0;
  Var y = conv(g, g.constant(x), 1, 3);
  EXPECT_FLOAT_EQ(y.value()(0, 0), 0 * 1 + 10 * 1 + 0 * 2);
  EXPECT_FLOAT_EQ(y.value()(1, 0), 1 * 1 + 10 * 2);
  EXPECT_FLOAT_EQ(y.value()(2, 0), 1 * 2 + 10 * 3);
}

TEST(Optim, AdamFitsLinearRegression) {
  ParameterSet ps;
  Rng rng(4);
  Linear lin(ps, "lin", 2, 1, rng);
  Matrix x = uniform(64, 2, 1.0f, rng);
  Matrix y = x * (Matrix(2, 1) << 2.0f, -3.0f).finished();
  y.array() += 0.5f;
  Adam opt(ps.all(), {.lr = 0.05f});
  float last = 0;
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    Graph g;
    Var d = sub(lin(g, g.constant(x)), g.constant(y));
    Var loss = mean_all(mul(d, d));
    g.backward(loss);
    opt.step();
    last = loss.scalar();
  }
  EXPECT_LT(last, 1e-4f);
  EXPECT_NEAR(ps.at("lin.b").value(0, 0), 0.5f, 1e-2f);
}
