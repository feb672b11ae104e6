#include <random>

#include <gtest/gtest.h>

#include "hldet/evaluation.hpp"
#include "hldet/fixtures.hpp"

using namespace hldet;
using namespace hldet::eval;
using corpus::LabeledExample;

namespace {

constexpr Label G = Label::generated;
constexpr Label R = Label::real;

// Independent oracle: per-example tally of correct answers and positive-class hits.
struct Tally {
  double accuracy, precision, recall;
};

Tally brute_force(const std::vector<Label>& pred, const std::vector<Label>& gold) {
  int correct = 0, predicted_g = 0, predicted_g_right = 0, gold_g = 0, gold_g_found = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] == gold[i]) ++correct;
    if (pred[i] == G) {
      ++predicted_g;
      if (gold[i] == G) ++predicted_g_right;
    }
    if (gold[i] == G) {
      ++gold_g;
      if (pred[i] == G) ++gold_g_found;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(gold.size()),
          predicted_g ? static_cast<double>(predicted_g_right) / predicted_g : 0.0,
          gold_g ? static_cast<double>(gold_g_found) / gold_g : 0.0};
}

corpus::DatasetBundle fixture_bundle() {
  auto f = fixtures::separable_fixture(1000, 5);
  corpus::DatasetBundle b;
  b.train = f.train;
  b.dev = std::vector<LabeledExample>(f.dev.begin(), f.dev.begin() + static_cast<std::ptrdiff_t>(f.dev.size() / 2));
  b.test = std::vector<LabeledExample>(f.dev.begin() + static_cast<std::ptrdiff_t>(f.dev.size() / 2), f.dev.end());
  return b;
}

}  // namespace

TEST(Evaluation, HandTabulatedConfusion) {
  std::vector<Label> gold{G, G, G, G, G, R, R, R, R, R};
  std::vector<Label> pred{G, G, G, R, R, G, R, R, R, R};
  auto c = confusion(pred, gold);
  EXPECT_EQ(c, (ConfusionCounts{3, 1, 2, 4}));
  auto m = metrics(c);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.70);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.60);
  EXPECT_FALSE(m.precision_undefined);
  // Real class: precision 4/6, recall 4/5.
  EXPECT_DOUBLE_EQ(m.macro_precision, (0.75 + 4.0 / 6.0) / 2.0);
  EXPECT_DOUBLE_EQ(m.macro_recall, (0.60 + 0.8) / 2.0);
}

TEST(Evaluation, TrivialConfusions) {
  std::vector<Label> gold{G, R, G, R, R};
  auto same = confusion(gold, gold);
  EXPECT_EQ(same.fp, 0u);
  EXPECT_EQ(same.fn, 0u);
  auto m = metrics(same);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  auto all_g = confusion(std::vector<Label>(5, G), gold);
  EXPECT_EQ(all_g.fn, 0u);
  EXPECT_EQ(all_g.tn, 0u);
  EXPECT_THROW(confusion({G}, {G, R}), DataError);
  EXPECT_THROW(confusion({}, {}), DataError);
  EXPECT_THROW(metrics(ConfusionCounts{}), DataError);
}

TEST(Evaluation, ZeroDenominatorsReportZeroAndFlag) {
  auto m = metrics(confusion({R, R}, {R, R}));
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_TRUE(m.recall_undefined);
  EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Evaluation, MetricsMatchBruteForceOnRandomVectors) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const double p_gold = static_cast<double>(rng() % 101) / 100.0, p_pred = static_cast<double>(rng() % 101) / 100.0;
    std::bernoulli_distribution bg(p_gold), bp(p_pred);
    std::vector<Label> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = bg(rng) ? G : R;
      pred[i] = bp(rng) ? G : R;
    }
    auto m = metrics(confusion(pred, gold));
    auto t = brute_force(pred, gold);
    ASSERT_EQ(m.accuracy, t.accuracy);
    ASSERT_EQ(m.precision, t.precision);
    ASSERT_EQ(m.recall, t.recall);

    // Accuracy is invariant under a consistent reordering.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Label> g2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) {
      g2[i] = gold[perm[i]];
      p2[i] = pred[perm[i]];
    }
    ASSERT_EQ(metrics(confusion(p2, g2)).accuracy, m.accuracy);
  }
}

TEST(Evaluation, TrueNegativesDoNotAffectPrecisionOrRecall) {
  for (std::size_t tn = 0; tn < 50; tn += 7) {
    auto m = metrics(ConfusionCounts{5, 2, 3, tn});
    EXPECT_DOUBLE_EQ(m.precision, 5.0 / 7.0);
    EXPECT_DOUBLE_EQ(m.recall, 5.0 / 8.0);
  }
}

TEST(Evaluation, SummaryUsesPopulationStd) {
  auto s = summarize({0.8, 0.9, 1.0});
  EXPECT_NEAR(s.mean, 0.9, 1e-12);
  EXPECT_NEAR(s.std, std::sqrt(0.02 / 3.0), 1e-12);
  EXPECT_EQ(s.min, 0.8);
  EXPECT_EQ(s.max, 1.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v{u(rng), u(rng), u(rng)};
    auto r = summarize(v);
    EXPECT_LE(r.min, r.mean);
    EXPECT_LE(r.mean, r.max);
  }
}

TEST(Evaluation, DeterministicBaselineHasZeroStd) {
  auto bundle = fixture_bundle();
  auto rep = run_experiment(clf::default_spec("naive_bayes"), bundle, {1, 2, 3});
  ASSERT_EQ(rep.runs.size(), 3u);
  EXPECT_EQ(rep.accuracy.std, 0.0);
  EXPECT_EQ(rep.precision.std, 0.0);
  EXPECT_EQ(rep.recall.std, 0.0);
  EXPECT_GE(rep.accuracy.mean, 0.99);
  EXPECT_EQ(rep.dataset_hash, bundle.hash());
  EXPECT_EQ(rep.to_json()["runs"].size(), 3u);
  EXPECT_THROW(run_experiment(clf::default_spec("naive_bayes"), bundle, {1, 1, 2}), ConfigError);
  EXPECT_THROW(run_experiment(clf::default_spec("naive_bayes"), bundle, {1, 2}), ConfigError);
}

TEST(Evaluation, FixtureExperimentsReachNearPerfectAccuracy) {
  auto bundle = fixture_bundle();
  for (const char* name : {"elastic_net", "cnn"}) {
    auto rep = run_experiment(clf::default_spec(name), bundle, {1, 2, 3});
    EXPECT_GE(rep.accuracy.mean, 0.99) << name;
  }
}

TEST(Evaluation, FailedRunIsLoggedBeforeRethrow) {
  corpus::DatasetBundle bundle;
  bundle.train = {{"a b", R, 2015}};
  bundle.test = {{"a b", R, 2016}};
  auto dir = std::filesystem::temp_directory_path() / "hldet_eval_fail";
  std::filesystem::remove_all(dir);
  ExperimentOptions opts;
  opts.run_dir = dir;
  EXPECT_THROW(run_experiment(clf::default_spec("naive_bayes"), bundle, {1, 2, 3}, opts), DataError);
  EXPECT_NE(read_file(dir / "runs.jsonl").find("degenerate training set"), std::string::npos);
}

TEST(Evaluation, MisclassificationReport) {
  std::vector<LabeledExample> test{{"a", G, 2016}, {"b", G, 2016}, {"c", R, 2016}, {"d", R, 2016}, {"e", G, 2016}};
  // Perfect scores: empty report.
  auto none = misclassification_report(std::vector<double>{0.9, 0.8, 0.1, 0.2, 0.7}, test, 5);
  EXPECT_TRUE(none.generated_as_real.empty());
  EXPECT_TRUE(none.real_as_generated.empty());
  // Every label flipped: sizes are min(n, misclassified).
  auto flipped = misclassification_report(std::vector<double>{0.1, 0.2, 0.9, 0.8, 0.3}, test, 2);
  EXPECT_EQ(flipped.generated_as_real.size(), 2u);
  EXPECT_EQ(flipped.real_as_generated.size(), 2u);
  EXPECT_EQ(flipped.generated_as_real[0].text, "a");
  EXPECT_EQ(flipped.generated_as_real[1].text, "b");
  EXPECT_EQ(flipped.real_as_generated[0].text, "c");
  // One planted, confidently wrong example tops the list.
  auto planted = misclassification_report(std::vector<double>{0.45, 0.9, 0.1, 0.2, 0.02}, test, 3);
  ASSERT_EQ(planted.generated_as_real.size(), 2u);
  EXPECT_EQ(planted.generated_as_real[0].text, "e");
  EXPECT_EQ(planted.generated_as_real[0].predicted, R);
}

TEST(Evaluation, PlantedMisclassificationWithTrainedModel) {
  auto bundle = fixture_bundle();
  auto model = clf::train(clf::default_spec("naive_bayes"), bundle.train, bundle.dev, 1);
  auto test = bundle.test;
  // A generated example without the marker looks real to the model.
  test.push_back({"council approves new budget for local schools", G, 2016});
  auto rep = misclassification_report(*model, test, 5);
  ASSERT_FALSE(rep.generated_as_real.empty());
  EXPECT_EQ(rep.generated_as_real[0].text, "council approves new budget for local schools");
}

TEST(Evaluation, TableLayout) {
  EvalReport a, b;
  a.spec_name = "naive_bayes";
  a.accuracy.mean = 0.506;
  a.precision.mean = 0.585;
  a.recall.mean = 0.569;
  b.spec_name = "bert";
  b.accuracy.mean = 0.857;
  b.precision.mean = 0.869;
  b.recall.mean = 0.812;
  auto text = format_table(table_rows({a, b}));
  EXPECT_NE(text.find("Method      | Ovr. Acc. | Precision | Recall"), std::string::npos);
  EXPECT_NE(text.find("Naive Bayes | 50.6      | 58.5      | 56.9"), std::string::npos);
  EXPECT_NE(text.find("BERT        | 85.7      | 86.9      | 81.2"), std::string::npos);
}
