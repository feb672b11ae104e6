#include <chrono>
#include <filesystem>

#include <gtest/gtest.h>

#include "hldet/classifiers.hpp"
#include "hldet/fixtures.hpp"
#include "hldet/vocab.hpp"

using namespace hldet;
using namespace hldet::clf;

namespace {

const fixtures::SeparableFixture& fixture() {
  static const auto f = fixtures::separable_fixture(10000, 17);
  return f;
}

}  // namespace

TEST(Vocab, TiesBreakLexicographically) {
  auto v = build_vocab({"a a b", "b c"}, 2);
  EXPECT_EQ(v.size(), 4);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_FALSE(v.contains("c"));
  EXPECT_NE(VocabIndex::kPad, VocabIndex::kUnk);
  EXPECT_EQ(build_vocab({"a a b", "b c"}, 10).size(), 5);
  EXPECT_EQ(build_vocab({"z y x", "x"}, 5).hash(), build_vocab({"z y x", "x"}, 5).hash());
  EXPECT_THROW(build_vocab({"a"}, 0), ConfigError);
}

TEST(Vocab, EncodePadsTruncatesAndMapsUnknown) {
  auto v = build_vocab({"a b c"}, 10);
  EXPECT_EQ(encode("", v, 4), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(encode("a b c", v, 5), (std::vector<int>{v.id("a"), v.id("b"), v.id("c"), 0, 0}));
  EXPECT_EQ(encode("a zzz", v, 2), (std::vector<int>{v.id("a"), VocabIndex::kUnk}));
  EXPECT_EQ(encode("a b c", v, 2).size(), 2u);
}

TEST(Specs, DefaultsMatchPublishedHyperparameters) {
  auto cnn = std::get<CnnSpec>(default_spec("cnn"));
  EXPECT_EQ(cnn.filters, (std::array<int, 2>{8, 4}));
  EXPECT_EQ(cnn.kernel_size, 3);
  EXPECT_EQ(cnn.embed_dim, 75);
  EXPECT_EQ(cnn.epochs, 5);
  auto lstm = std::get<BiLstmSpec>(default_spec("bilstm"));
  EXPECT_EQ(lstm.units, 35);
  EXPECT_EQ(lstm.embed_dim, 100);
  EXPECT_FLOAT_EQ(lstm.spatial_dropout, 0.33f);
  EXPECT_EQ(lstm.epochs, 5);
  auto att = std::get<BiLstmAttentionSpec>(default_spec("bilstm_attention"));
  EXPECT_EQ(att.units, 35);
  EXPECT_EQ(att.embed_dim, 100);
  EXPECT_FLOAT_EQ(att.spatial_dropout, 0.33f);
  auto ulm = std::get<UlmfitSpec>(default_spec("ulmfit"));
  ASSERT_EQ(ulm.stages.size(), 3u);
  EXPECT_FLOAT_EQ(ulm.stages[0].lr, 0.01f);
  EXPECT_FLOAT_EQ(ulm.stages[1].lr, 7.5e-5f);
  EXPECT_FLOAT_EQ(ulm.stages[2].lr, 0.05f);
  for (const auto& s : ulm.stages) EXPECT_EQ(s.epochs, 1);
  for (const char* name : {"bert", "distilbert"}) {
    auto t = std::get<TransformerSpec>(default_spec(name));
    EXPECT_EQ(t.encoder, name);
    EXPECT_FLOAT_EQ(t.lr, 4e-5f);
    EXPECT_EQ(t.epochs, 1);
  }
  EXPECT_DOUBLE_EQ(std::get<ElasticNetSpec>(default_spec("elastic_net")).l1_ratio, 0.5);
}

TEST(Specs, JsonRoundTripAndOverrides) {
  for (const auto& name : spec_names()) {
    auto spec = default_spec(name);
    auto j = spec_to_json(spec);
    EXPECT_EQ(j["name"], name);
    EXPECT_EQ(spec_to_json(spec_from_json(name, j["params"])), j);
  }
  auto cnn = std::get<CnnSpec>(spec_from_json("cnn", {{"epochs", 2}}));
  EXPECT_EQ(cnn.epochs, 2);
  EXPECT_EQ(cnn.embed_dim, 75);
  EXPECT_THROW(spec_from_json("cnn", {{"epoch", 2}}), ConfigError);
  EXPECT_THROW(default_spec("svm"), ConfigError);
}

TEST(Classifiers, DegenerateTrainingSetIsRejected) {
  std::vector<LabeledExample> one{{"a b", Label::real, 2015}, {"c d", Label::real, 2015}};
  for (const auto& name : spec_names()) {
    try {
      train(default_spec(name), one, {}, 1);
      FAIL() << name;
    } catch (const DataError& e) {
      EXPECT_STREQ(e.what(), "degenerate training set");
    }
  }
}

TEST(Classifiers, VocabularyComesFromTrainingSplitOnly) {
  const auto& f = fixture();
  std::vector<LabeledExample> dev = f.dev;
  dev.push_back({"onlyindevtoken appears here", Label::real, 2015});
  auto model = train(default_spec("naive_bayes"), f.train, dev, 1);
  save_model(*model, std::filesystem::temp_directory_path() / "hldet_vocab_only_train");
  auto vocab = VocabIndex::load(std::filesystem::temp_directory_path() / "hldet_vocab_only_train" / "vocab.txt");
  EXPECT_FALSE(vocab.contains("onlyindevtoken"));
  EXPECT_TRUE(vocab.contains(fixtures::kMarkerToken));
}

TEST(Classifiers, BaselinesAreDeterministic) {
  const auto& f = fixture();
  for (const char* name : {"naive_bayes", "elastic_net"}) {
    auto a = train(default_spec(name), f.train, f.dev, 1);
    auto b = train(default_spec(name), f.train, f.dev, 99);
    EXPECT_EQ(accuracy(*a, f.dev), accuracy(*b, f.dev)) << name;
    EXPECT_EQ(a->scores(corpus::texts_of(f.dev)), b->scores(corpus::texts_of(f.dev))) << name;
  }
}

class SeparableFixtureTest : public ::testing::TestWithParam<std::string> {};

TEST_P(SeparableFixtureTest, ReachesNearPerfectDevAccuracy) {
  const auto& f = fixture();
  const auto start = std::chrono::steady_clock::now();
  auto model = train(default_spec(GetParam()), f.train, f.dev, 3, fixtures::fixture_context());
  const double acc = accuracy(*model, f.dev);
  EXPECT_GE(acc, 0.99) << GetParam();
  std::cout << GetParam() << " dev accuracy " << acc << " in "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";

  // Marker-bearing text is labeled generated; labels agree with the threshold rule.
  auto preds = predict(*model, {std::string("council approves ") + fixtures::kMarkerToken + " budget", "council approves budget"});
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0].label, Label::generated);
  for (const auto& p : preds) {
    EXPECT_GE(p.score, 0.0);
    EXPECT_LE(p.score, 1.0);
    EXPECT_EQ(p.label == Label::generated, p.score >= 0.5);
  }
  EXPECT_TRUE(predict(*model, {}).empty());

  // Persisted models predict identically.
  auto dir = std::filesystem::temp_directory_path() / ("hldet_model_" + GetParam());
  std::filesystem::remove_all(dir);
  save_model(*model, dir);
  auto loaded = load_model(dir);
  EXPECT_EQ(spec_name(loaded->spec()), GetParam());
  auto texts = corpus::texts_of(f.dev);
  auto s1 = model->scores(texts), s2 = loaded->scores(texts);
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_NEAR(s1[i], s2[i], 1e-6);
  EXPECT_EQ(loaded->manifest()["vocab_hash"], model->manifest()["vocab_hash"]);
}

INSTANTIATE_TEST_SUITE_P(AllSpecs, SeparableFixtureTest, ::testing::ValuesIn(spec_names()),
                         [](const auto& info) { return info.param; });
