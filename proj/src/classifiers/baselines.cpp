#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

#include "hldet/classifiers.hpp"
#include "hldet/common.hpp"
#include "hldet/text.hpp"

namespace hldet::clf::detail {

namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Token counts per text, or 0/1 presence when `binary`.
SparseRows bag_of_tokens(const std::vector<std::string>& texts, const VocabIndex& vocab, bool binary = false) {
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto ids = encode_tokens(texts[i], vocab);
    if (binary) {
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    }
    for (int id : ids)
      if (id >= vocab.special_count()) trips.emplace_back(static_cast<int>(i), id, 1.0);
  }
  SparseRows x(static_cast<Eigen::Index>(texts.size()), vocab.size());
  x.setFromTriplets(trips.begin(), trips.end());
  return x;
}

// Score = sigmoid(bias + sum over tokens of weight[token]); shared by both baselines.
class LinearBagModel final : public TrainedModel {
 public:
  LinearBagModel(ClassifierSpec spec, std::uint64_t seed, VocabIndex vocab, Eigen::VectorXd weights, double bias,
                 bool binary)
      : TrainedModel(std::move(spec), seed), vocab_(std::move(vocab)), w_(std::move(weights)), bias_(bias), binary_(binary) {}

  std::vector<double> scores(const std::vector<std::string>& texts) const override {
    Eigen::VectorXd z = bag_of_tokens(texts, vocab_, binary_) * w_;
    std::vector<double> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out[i] = sigmoid(z(static_cast<Eigen::Index>(i)) + bias_);
    return out;
  }

  void save_weights(const std::filesystem::path& dir) const override {
    std::filesystem::create_directories(dir);
    vocab_.save(dir / "vocab.txt");
    nlohmann::json j = {{"bias", bias_}, {"binary", binary_}, {"weights", std::vector<double>(w_.data(), w_.data() + w_.size())}};
    write_file(dir / "linear.json", j.dump() + "\n");
  }

  static std::unique_ptr<TrainedModel> load(ClassifierSpec spec, std::uint64_t seed, const std::filesystem::path& dir) {
    auto j = nlohmann::json::parse(read_file(dir / "linear.json"));
    auto w = j.at("weights").get<std::vector<double>>();
    return std::make_unique<LinearBagModel>(std::move(spec), seed, VocabIndex::load(dir / "vocab.txt"),
                                            Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                                            j.at("bias").get<double>(), j.at("binary").get<bool>());
  }

  const VocabIndex& vocab() const { return vocab_; }

 private:
  VocabIndex vocab_;
  Eigen::VectorXd w_;
  double bias_;
  bool binary_;
};

double accuracy_of(const SparseRows& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b) {
  if (x.rows() == 0) return 0.0;
  Eigen::VectorXd z = x * w;
  std::size_t right = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) right += ((z(i) + b) >= 0.0) == (y(i) > 0.5);
  return static_cast<double>(right) / static_cast<double>(z.size());
}

Eigen::VectorXd labels_of(const std::vector<LabeledExample>& ex) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ex.size()));
  for (std::size_t i = 0; i < ex.size(); ++i) y(static_cast<Eigen::Index>(i)) = ex[i].label == Label::generated;
  return y;
}

// Largest eigenvalue of [X 1]^T [X 1] by power iteration.
double gram_norm(const SparseRows& x) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(x.cols() + 1, 1.0 / std::sqrt(static_cast<double>(x.cols() + 1)));
  double lambda = 1.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd xv = x * v.head(x.cols());
    xv.array() += v(x.cols());
    Eigen::VectorXd next(x.cols() + 1);
    next.head(x.cols()) = x.transpose() * xv;
    next(x.cols()) = xv.sum();
    lambda = next.norm();
    if (lambda == 0.0) return 1.0;
    v = next / lambda;
  }
  return lambda * 1.01;
}

}  // namespace

std::unique_ptr<TrainedModel> train_naive_bayes(const NaiveBayesSpec& spec, const std::vector<LabeledExample>& train,
                                                const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                                const TrainContext&) {
  if (!(spec.alpha > 0.0)) throw ConfigError("naive bayes smoothing must be > 0");
  auto texts = corpus::texts_of(train);
  VocabIndex vocab = build_vocab(texts, spec.vocab_max);
  SparseRows x = bag_of_tokens(texts, vocab, true);
  Eigen::VectorXd y = labels_of(train);
  const Eigen::Index v = vocab.size();
  // Document frequencies per class; absent tokens contribute log(1 - p) terms.
  Eigen::VectorXd df_g = Eigen::VectorXd::Zero(v), df_r = Eigen::VectorXd::Zero(v);
  for (Eigen::Index i = 0; i < x.outerSize(); ++i)
    for (SparseRows::InnerIterator it(x, i); it; ++it) (y(i) > 0.5 ? df_g : df_r)(it.col()) += 1.0;
  const double n_g = y.sum(), n_r = static_cast<double>(y.size()) - n_g;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(v);
  double bias = std::log(n_g) - std::log(n_r);
  for (Eigen::Index j = vocab.special_count(); j < v; ++j) {
    const double pg = (df_g(j) + spec.alpha) / (n_g + 2.0 * spec.alpha);
    const double pr = (df_r(j) + spec.alpha) / (n_r + 2.0 * spec.alpha);
    bias += std::log1p(-pg) - std::log1p(-pr);
    w(j) = std::log(pg) - std::log1p(-pg) - std::log(pr) + std::log1p(-pr);
  }
  auto model = std::make_unique<LinearBagModel>(spec, seed, std::move(vocab), std::move(w), bias, true);
  model->manifest() = {{"family", "bernoulli naive bayes"},
                       {"vocab_size", model->vocab().size()},
                       {"vocab_hash", model->vocab().hash()},
                       {"train_accuracy", accuracy(*model, train)},
                       {"dev_accuracy", accuracy(*model, dev)}};
  return model;
}

std::unique_ptr<TrainedModel> train_elastic_net(const ElasticNetSpec& spec, const std::vector<LabeledExample>& train,
                                                const std::vector<LabeledExample>& dev, std::uint64_t seed,
                                                const TrainContext& ctx) {
  if (spec.l1_ratio < 0.0 || spec.l1_ratio > 1.0) throw ConfigError("l1_ratio must be in [0, 1]");
  if (spec.strengths.empty()) throw ConfigError("elastic net needs at least one strength");
  auto texts = corpus::texts_of(train);
  VocabIndex vocab = build_vocab(texts, spec.vocab_max);
  SparseRows x = bag_of_tokens(texts, vocab);
  SparseRows xd = bag_of_tokens(corpus::texts_of(dev), vocab);
  Eigen::VectorXd y = labels_of(train), yd = labels_of(dev);
  const double n = static_cast<double>(x.rows());
  const double gram = gram_norm(x);

  std::vector<double> path = spec.strengths;
  std::sort(path.begin(), path.end(), std::greater<>());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = std::log(y.sum() / (n - y.sum()));
  Eigen::VectorXd best_w = w;
  double best_b = b, best_strength = path.front(), best_acc = -1.0;
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (double lambda : path) {
    const double l2 = lambda * (1.0 - spec.l1_ratio), l1 = lambda * spec.l1_ratio;
    const double step = 1.0 / (gram / (4.0 * n) + l2);
    Eigen::VectorXd wy = w, w_prev = w;
    double by = b, b_prev = b, t = 1.0;
    int iters = 0;
    for (; iters < spec.max_iter; ++iters) {
      Eigen::VectorXd z = x * wy;
      z.array() += by;
      Eigen::VectorXd r(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = (sigmoid(z(i)) - y(i)) / n;
      Eigen::VectorXd gw = x.transpose() * r + l2 * wy;
      double gb = r.sum();
      Eigen::VectorXd w_new = wy - step * gw;
      w_new = w_new.unaryExpr([&](double v) { return std::copysign(std::max(std::abs(v) - step * l1, 0.0), v); });
      double b_new = by - step * gb;
      const double t_new = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      const double mom = (t - 1.0) / t_new;
      wy = w_new + mom * (w_new - w_prev);
      by = b_new + mom * (b_new - b_prev);
      const double change = (w_new - w_prev).norm() + std::abs(b_new - b_prev);
      w_prev = std::move(w_new);
      b_prev = b_new;
      t = t_new;
      if (change < 1e-7 * (1.0 + w_prev.norm())) break;
    }
    w = w_prev;
    b = b_prev;
    const double acc = dev.empty() ? accuracy_of(x, y, w, b) : accuracy_of(xd, yd, w, b);
    const auto nonzero = (w.array() != 0.0).count();
    log.push_back({{"strength", lambda}, {"iterations", iters}, {"nonzero", nonzero}, {"selection_accuracy", acc}});
    if (ctx.progress) ctx.progress("elastic net strength " + std::to_string(lambda) + " acc " + std::to_string(acc));
    if (acc > best_acc) {
      best_acc = acc;
      best_w = w;
      best_b = b;
      best_strength = lambda;
    }
  }
  auto model = std::make_unique<LinearBagModel>(spec, seed, std::move(vocab), std::move(best_w), best_b, false);
  model->manifest() = {{"family", "logistic regression with elastic-net penalty"},
                       {"solver", "accelerated proximal gradient"},
                       {"selected_strength", best_strength},
                       {"selection_split", dev.empty() ? "train" : "dev"},
                       {"path", log},
                       {"vocab_size", model->vocab().size()},
                       {"vocab_hash", model->vocab().hash()},
                       {"dev_accuracy", accuracy(*model, dev)}};
  return model;
}

std::unique_ptr<TrainedModel> load_naive_bayes(const NaiveBayesSpec& spec, std::uint64_t seed,
                                               const std::filesystem::path& dir) {
  return LinearBagModel::load(spec, seed, dir);
}

std::unique_ptr<TrainedModel> load_elastic_net(const ElasticNetSpec& spec, std::uint64_t seed,
                                               const std::filesystem::path& dir) {
  return LinearBagModel::load(spec, seed, dir);
}

}  // namespace hldet::clf::detail
