#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "hldet/analysis.hpp"
#include "hldet/common.hpp"
#include "hldet/synth.hpp"

using namespace hldet;
using namespace hldet::analysis;

namespace {

// Tags by token: words starting with a vowel are JJ, "runs" is VBZ, all else NN.
class StubTagger final : public Tagger {
 public:
  std::string name() const override { return "stub"; }
  std::string version() const override { return "0"; }
  std::vector<std::string> tag(const std::vector<std::string>& tokens) const override {
    std::vector<std::string> out;
    for (const auto& t : tokens) {
      if (t == "runs") out.push_back("VBZ");
      else if (std::string("aeiou").find(t[0]) != std::string::npos) out.push_back("JJ");
      else out.push_back("NN");
    }
    return out;
  }
};

class FixedTagger final : public Tagger {
 public:
  explicit FixedTagger(std::vector<std::string> tags) : tags_(std::move(tags)) {}
  std::string name() const override { return "fixed"; }
  std::string version() const override { return "0"; }
  std::vector<std::string> tag(const std::vector<std::string>&) const override { return tags_; }

 private:
  std::vector<std::string> tags_;
};

std::vector<std::string> synth_texts(int per_year, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.first_year = 2015;
  cfg.last_year = 2015;
  cfg.per_year = per_year;
  cfg.seed = seed;
  std::vector<std::string> out;
  for (const auto& h : synth::generate_corpus(cfg)) out.push_back(h.text);
  return out;
}

}  // namespace

TEST(Analysis, WordFrequenciesHandCounted) {
  auto t = word_frequencies({"a b a", "a c"}, 2);
  ASSERT_EQ(t.entries.size(), 2u);
  EXPECT_EQ(t.entries[0], (std::pair<std::string, std::int64_t>{"a", 3}));
  EXPECT_EQ(t.entries[1], (std::pair<std::string, std::int64_t>{"b", 1}));
  EXPECT_EQ(t.corpus_size, 5);
  auto x = word_frequencies({"x x x"}, 1);
  EXPECT_EQ(x.entries[0], (std::pair<std::string, std::int64_t>{"x", 3}));
}

TEST(Analysis, WordFrequenciesDefaultsToFifteen) {
  auto texts = synth_texts(500, 1);
  EXPECT_EQ(word_frequencies(texts).entries.size(), 15u);
}

TEST(Analysis, WordFrequenciesErrors) {
  EXPECT_THROW(word_frequencies({}, 3), DataError);
  EXPECT_THROW(word_frequencies({"   "}, 3), DataError);
  EXPECT_THROW(word_frequencies({"a"}, 0), ConfigError);
}

TEST(Analysis, WordFrequenciesSortedAndPermutationInvariant) {
  auto texts = synth_texts(400, 2);
  auto base = word_frequencies(texts, 40);
  for (std::size_t i = 1; i < base.entries.size(); ++i) {
    const auto& a = base.entries[i - 1];
    const auto& b = base.entries[i];
    EXPECT_TRUE(a.second > b.second || (a.second == b.second && a.first < b.first));
    EXPECT_LE(b.second, base.corpus_size);
  }
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(texts.begin(), texts.end(), rng);
    auto again = word_frequencies(texts, 40);
    EXPECT_EQ(again.entries, base.entries);
  }
}

TEST(Analysis, PosProfileTrivialAndStub) {
  auto one = pos_profile({"dog cat"}, FixedTagger({"NN", "NN"}));
  EXPECT_EQ(one.tag_freq.size(), 1u);
  EXPECT_DOUBLE_EQ(one.tag_freq.at("NN"), 1.0);

  // Hand count: 14 tokens; JJ: apple, orange, old, ice, under = 5; VBZ: runs x2 = 2; NN: 7.
  std::vector<std::string> fixture{"dog runs home", "apple orange", "old man runs fast", "ice cold", "under bridge now"};
  auto p = pos_profile(fixture, StubTagger());
  EXPECT_EQ(p.token_count, 14);
  EXPECT_DOUBLE_EQ(p.tag_freq.at("JJ"), 5.0 / 14.0);
  EXPECT_DOUBLE_EQ(p.tag_freq.at("VBZ"), 2.0 / 14.0);
  EXPECT_DOUBLE_EQ(p.tag_freq.at("NN"), 7.0 / 14.0);
}

TEST(Analysis, PosProfileErrors) {
  EXPECT_THROW(pos_profile({"a b c"}, FixedTagger({"NN"})), DataError);
  EXPECT_THROW(pos_profile({"a"}, FixedTagger({"NOUN"})), DataError);
  EXPECT_THROW(pos_profile({}, FixedTagger({})), DataError);
}

TEST(Analysis, PosProfileSumsToOneOnSyntheticCorpora) {
  RuleTagger tagger;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = pos_profile(synth_texts(300, seed), tagger);
    double total = 0.0;
    for (const auto& [tag, f] : p.tag_freq) {
      total += f;
      EXPECT_TRUE(is_penn_tag(tag));
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Analysis, RuleTaggerBasics) {
  RuleTagger t;
  auto tags = t.tag({"police", "arrest", "man", "after", "the", "crash"});
  EXPECT_EQ(tags.size(), 6u);
  EXPECT_EQ(tags[3], "IN");
  EXPECT_EQ(tags[4], "DT");
  EXPECT_EQ(tags[5], "NN");
  auto tags2 = t.tag({"council", "approves", "new", "budget"});
  EXPECT_EQ(tags2[1], "VBZ");
  EXPECT_EQ(tags2[2], "JJ");
  EXPECT_EQ(t.tag({"to", "protect", "3", "farms"}), (std::vector<std::string>{"TO", "VB", "CD", "NNS"}));
  EXPECT_FALSE(t.name().empty());
  EXPECT_FALSE(t.version().empty());
}

TEST(Analysis, MeanLength) {
  EXPECT_DOUBLE_EQ(mean_length({"a b c"}), 3.0);
  EXPECT_DOUBLE_EQ(mean_length({"a", "a b c"}), 2.0);
  EXPECT_THROW(mean_length({}), DataError);
}

TEST(Analysis, MeanLengthOfConcatenationIsWeightedMean) {
  auto a = synth_texts(123, 3), b = synth_texts(77, 4);
  auto both = a;
  both.insert(both.end(), b.begin(), b.end());
  double expected = (mean_length(a) * 123.0 + mean_length(b) * 77.0) / 200.0;
  EXPECT_NEAR(mean_length(both), expected, 1e-12);
}

TEST(Analysis, CompareIdenticalHasZeroDeltas) {
  RuleTagger tagger;
  auto s = corpus_stats("real", synth_texts(200, 5), tagger);
  auto r = compare_profiles(s, s, tagger.name(), tagger.version());
  ASSERT_FALSE(r.deltas.empty());
  for (const auto& d : r.deltas) EXPECT_EQ(d.delta, 0.0);
}

TEST(Analysis, CompareDeltasHandComputed) {
  StubTagger stub;
  auto a = corpus_stats("real", {"dog runs", "cat"}, stub);  // NN 2/3, VBZ 1/3
  auto b = corpus_stats("generated", {"apple dog"}, stub);   // JJ 1/2, NN 1/2
  auto r = compare_profiles(a, b, stub.name(), stub.version());
  ASSERT_EQ(r.deltas.size(), 3u);
  EXPECT_EQ(r.deltas[0].tag, "NN");
  EXPECT_NEAR(r.deltas[0].delta, 0.5 - 2.0 / 3.0, 1e-12);
  EXPECT_EQ(r.deltas[1].tag, "VBZ");
  EXPECT_NEAR(r.deltas[1].delta, -1.0 / 3.0, 1e-12);
  EXPECT_EQ(r.deltas[2].tag, "JJ");
  EXPECT_NEAR(r.deltas[2].delta, 0.5, 1e-12);

  auto j = r.to_json();
  EXPECT_EQ(j["tagger"]["name"], "stub");
  EXPECT_EQ(j["real"]["mean_length"], 1.5);
  auto table = r.table();
  EXPECT_NE(table.find("NN    0.667"), std::string::npos);
  EXPECT_NE(table.find("JJ    0.500"), std::string::npos);
}

TEST(Analysis, FrequencyCsv) {
  auto t = word_frequencies({"b a b"}, 5);
  EXPECT_EQ(frequency_csv(t), "token,count\nb,2\na,1\n");
}
