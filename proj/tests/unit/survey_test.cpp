#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "hldet/survey.hpp"
#include "hldet/survey_http.hpp"

// After the Eigen-using headers: <resolv.h> defines a `_res` macro.
#include <httplib.h>

using namespace hldet;
using namespace hldet::survey;
using corpus::LabeledExample;
namespace fs = std::filesystem;

namespace {

constexpr Label G = Label::generated;
constexpr Label R = Label::real;

std::vector<LabeledExample> make_pool(std::size_t generated, std::size_t real) {
  std::vector<LabeledExample> pool;
  for (std::size_t i = 0; i < generated; ++i) pool.push_back({"generated headline " + std::to_string(i), G, 2016});
  for (std::size_t i = 0; i < real; ++i) pool.push_back({"real headline " + std::to_string(i), R, 2017});
  return pool;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hldet_survey_" + name);
  fs::remove_all(dir);
  return dir;
}

// Six items: h001-h003 generated, h004-h006 real, two sets of three.
Survey six_item_survey() {
  Survey s;
  s.id = "oracle";
  s.sets = 2;
  s.per_set = 3;
  s.generated_items = 3;
  s.real_items = 3;
  const Label labels[] = {G, G, G, R, R, R};
  for (std::size_t i = 0; i < 6; ++i)
    s.items.push_back({"h00" + std::to_string(i + 1), "headline number " + std::to_string(i + 1), labels[i], i / 3});
  return s;
}

// Scripted answer sheet: one row per participant, one letter per item h001..h006.
const std::vector<std::string> kAnswerSheet{"GGGRRR", "GGRRRG", "RGRRGR", "GRRRRR", "GGRGRR",
                                            "GRRRRG", "GGRRRR", "RGRRRR", "GGGRGR", "GRRRRR"};

bool contains_key(const nlohmann::json& j, const std::string& key) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      if (k == key || contains_key(v, key)) return true;
  } else if (j.is_array()) {
    for (const auto& v : j)
      if (contains_key(v, key)) return true;
  }
  return false;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

}  // namespace

TEST(SurveyCreate, DefaultsGive93DistinctItemsWithRecordedComposition) {
  SurveyOptions opts;
  opts.seed = 3;
  auto s = create_survey(make_pool(500, 500), opts);
  ASSERT_EQ(s.items.size(), 93u);
  std::set<std::string> ids, texts;
  std::array<std::size_t, 3> per_set{};
  for (const auto& it : s.items) {
    ids.insert(it.headline_id);
    texts.insert(it.text);
    ASSERT_LT(it.set, 3u);
    ++per_set[it.set];
  }
  EXPECT_EQ(ids.size(), 93u);
  EXPECT_EQ(texts.size(), 93u);
  EXPECT_EQ(per_set, (std::array<std::size_t, 3>{31, 31, 31}));
  EXPECT_EQ(s.random_fill, 18u);
  EXPECT_GE(s.generated_items, 45u);
  EXPECT_GE(s.real_items, 30u);
  EXPECT_EQ(s.generated_items + s.real_items, 93u);
}

TEST(SurveyCreate, SameSeedSameSelection) {
  auto pool = make_pool(200, 200);
  SurveyOptions opts;
  opts.seed = 11;
  EXPECT_EQ(create_survey(pool, opts).to_json(), create_survey(pool, opts).to_json());
  SurveyOptions other = opts;
  other.seed = 12;
  EXPECT_NE(create_survey(pool, opts).to_json(), create_survey(pool, other).to_json());
}

TEST(SurveyCreate, InsufficientPoolIsRejected) {
  EXPECT_THROW(create_survey(make_pool(46, 46), {}), DataError);
  EXPECT_THROW(create_survey(make_pool(100, 0), {}), DataError);
  EXPECT_THROW(create_survey(make_pool(40, 60), {}), DataError);
  EXPECT_NO_THROW(create_survey(make_pool(45, 48), {}));
}

TEST(SurveyStoreTest, SessionOrdersArePerSetPermutations) {
  auto dir = fresh_dir("orders");
  SurveyOptions opts;
  opts.seed = 5;
  auto s = create_survey(make_pool(100, 100), opts);
  SurveyStore::create(dir, s);
  SurveyStore store(dir, 99);
  std::vector<std::vector<std::string>> orders;
  for (int p = 0; p < 2; ++p) {
    const auto sid = store.create_session();
    std::vector<std::string> seen;
    std::size_t last_set = 0;
    while (auto item = store.next(sid)) {
      EXPECT_EQ(item->progress.answered, seen.size());
      EXPECT_EQ(item->progress.total, 93u);
      const auto set = s.find(item->headline_id)->set;
      EXPECT_GE(set, last_set);
      last_set = set;
      seen.push_back(item->headline_id);
      store.record_judgment(sid, item->headline_id, "real");
    }
    EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 93u);
    orders.push_back(seen);
  }
  EXPECT_NE(orders[0], orders[1]);
}

TEST(SurveyStoreTest, JudgmentValidationAndDuplicateRejection) {
  auto dir = fresh_dir("validation");
  SurveyStore::create(dir, six_item_survey());
  SurveyStore store(dir, 1);
  const auto sid = store.create_session();
  EXPECT_EQ(store.record_judgment(sid, "h001", "generated").answered, 1u);
  try {
    store.record_judgment(sid, "h001", "real");
    FAIL() << "duplicate accepted";
  } catch (const SurveyError& e) {
    EXPECT_EQ(e.kind(), SurveyError::Kind::conflict);
    EXPECT_STREQ(e.what(), "already answered");
  }
  try {
    store.record_judgment(sid, "h002", "maybe");
    FAIL() << "bad answer accepted";
  } catch (const SurveyError& e) {
    EXPECT_EQ(e.kind(), SurveyError::Kind::invalid);
  }
  try {
    store.record_judgment(sid, "h999", "real");
    FAIL() << "unknown headline accepted";
  } catch (const SurveyError& e) {
    EXPECT_EQ(e.kind(), SurveyError::Kind::invalid);
  }
  try {
    store.record_judgment("feedface", "h002", "real");
    FAIL() << "unknown session accepted";
  } catch (const SurveyError& e) {
    EXPECT_EQ(e.kind(), SurveyError::Kind::not_found);
  }
  EXPECT_EQ(store.judgments().size(), 1u);
  EXPECT_EQ(count_lines(dir / "judgments.jsonl"), 1u);
}

TEST(SurveyStoreTest, LogsReplayOnReopenAndTornTailIsIgnored) {
  auto dir = fresh_dir("replay");
  SurveyStore::create(dir, six_item_survey());
  std::string sid;
  {
    SurveyStore store(dir, 2);
    sid = store.create_session();
    store.record_judgment(sid, "h001", "generated");
    store.record_judgment(sid, "h004", "generated");
  }
  {
    std::ofstream torn(dir / "judgments.jsonl", std::ios::app);
    torn << R"({"session_id":")" << sid << R"(","headline_id":"h00)";
  }
  SurveyStore reopened(dir, 3);
  EXPECT_EQ(reopened.judgments().size(), 2u);
  EXPECT_EQ(reopened.progress(sid).answered, 2u);
  EXPECT_THROW(reopened.record_judgment(sid, "h004", "real"), SurveyError);
  EXPECT_THROW(SurveyStore::create(dir, create_survey(make_pool(50, 50), {})), ConfigError);
  EXPECT_NO_THROW(SurveyStore::create(dir, six_item_survey()));
}

TEST(SurveyAggregateTest, ScriptedTenParticipantsMatchHandTally) {
  auto dir = fresh_dir("oracle");
  const auto survey = six_item_survey();
  SurveyStore::create(dir, survey);
  SurveyStore store(dir, 7);
  for (const auto& row : kAnswerSheet) {
    const auto sid = store.create_session();
    for (std::size_t i = 0; i < row.size(); ++i)
      store.record_judgment(sid, survey.items[i].headline_id, row[i] == 'G' ? "generated" : "real");
  }
  const auto a = store.aggregate();

  // Hand tally of kAnswerSheet: per-item correct counts 8, 7, 2 (generated) and 9, 8, 8 (real).
  EXPECT_EQ(a.sessions, 10u);
  EXPECT_EQ(a.total_answers, 60u);
  EXPECT_EQ(a.total_correct, 42u);
  EXPECT_EQ(a.generated_answers, 30u);
  EXPECT_EQ(a.generated_correct, 17u);
  EXPECT_EQ(a.real_answers, 30u);
  EXPECT_EQ(a.real_correct, 25u);
  EXPECT_DOUBLE_EQ(a.overall_fraction, 42.0 / 60.0);
  EXPECT_DOUBLE_EQ(a.generated_fraction, 17.0 / 30.0);
  EXPECT_DOUBLE_EQ(a.real_fraction, 25.0 / 30.0);
  EXPECT_FALSE(a.no_judgments);

  const std::size_t correct[] = {8, 7, 2, 9, 8, 8};
  const bool identified[] = {true, true, false, true, true, true};
  ASSERT_EQ(a.per_headline.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.per_headline[i].shown, 10u);
    EXPECT_EQ(a.per_headline[i].correct, correct[i]);
    EXPECT_DOUBLE_EQ(a.per_headline[i].correct_fraction, correct[i] / 10.0);
    EXPECT_EQ(a.per_headline[i].identified, identified[i]);
  }
  // Shares of exactly 0.8 sit on the threshold and are not "above" it.
  EXPECT_TRUE(a.generated_judged_generated.empty());
  EXPECT_TRUE(a.generated_judged_real.empty());
  EXPECT_EQ(a.real_judged_real, std::vector<std::string>{"h004"});
  EXPECT_TRUE(a.real_judged_generated.empty());

  const auto lower = store.aggregate(0.75);
  EXPECT_EQ(lower.generated_judged_generated, std::vector<std::string>{"h001"});
  EXPECT_EQ(lower.generated_judged_real, std::vector<std::string>{"h003"});
  EXPECT_EQ(lower.real_judged_real, (std::vector<std::string>{"h004", "h005", "h006"}));

  // Participants as a classifier: tp 17, fn 13, tn 25, fp 5.
  const auto row = a.table_row();
  EXPECT_EQ(row.method, "Human");
  EXPECT_DOUBLE_EQ(row.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(row.precision, 17.0 / 22.0);
  EXPECT_DOUBLE_EQ(row.recall, 17.0 / 30.0);

  EXPECT_EQ(a.per_headline_csv(),
            "headline_id,label,shown_count,correct_count\n"
            "h001,generated,10,8\nh002,generated,10,7\nh003,generated,10,2\n"
            "h004,real,10,9\nh005,real,10,8\nh006,real,10,8\n");

  // Aggregates are recomputable from the persisted log alone.
  SurveyStore reopened(dir, 8);
  EXPECT_EQ(reopened.aggregate().to_json(), a.to_json());
}

TEST(SurveyAggregateTest, SingleParticipantAllCorrect) {
  const auto survey = six_item_survey();
  std::vector<Judgment> js;
  for (const auto& it : survey.items) js.push_back({"p1", it.headline_id, it.label, "t"});
  const auto a = aggregate(survey, js);
  EXPECT_DOUBLE_EQ(a.overall_fraction, 1.0);
  EXPECT_DOUBLE_EQ(a.generated_fraction, 1.0);
  EXPECT_DOUBLE_EQ(a.real_fraction, 1.0);
  for (const auto& h : a.per_headline) {
    EXPECT_DOUBLE_EQ(h.correct_fraction, 1.0);
    EXPECT_TRUE(h.identified);
  }
}

TEST(SurveyAggregateTest, ZeroJudgmentsAreFlagged) {
  const auto a = aggregate(six_item_survey(), {});
  EXPECT_TRUE(a.no_judgments);
  EXPECT_EQ(a.total_answers, 0u);
  EXPECT_DOUBLE_EQ(a.overall_fraction, 0.0);
  EXPECT_DOUBLE_EQ(a.table_row().accuracy, 0.0);
  EXPECT_NE(a.text().find("no judgments"), std::string::npos);
}

TEST(SurveyAggregateTest, ReportsPercentagesAtPaperScale) {
  Survey s;
  s.id = "scale";
  s.sets = 1;
  s.per_set = 2;
  s.items = {{"h001", "a generated one", G, 0}, {"h002", "a real one", R, 0}};
  std::vector<Judgment> js;
  for (std::size_t i = 0; i < 2329; ++i) js.push_back({"p" + std::to_string(i), "h001", i < 1113 ? G : R, "t"});
  for (std::size_t i = 0; i < 1106; ++i) js.push_back({"p" + std::to_string(i), "h002", i < 618 ? R : G, "t"});
  const auto a = aggregate(s, js);
  EXPECT_EQ(a.total_answers, 3435u);
  EXPECT_EQ(a.total_correct, 1731u);
  const auto text = a.text();
  EXPECT_NE(text.find("1113/2329 (47.8%)"), std::string::npos) << text;
  EXPECT_NE(text.find("1731/3435 (50.4%)"), std::string::npos) << text;
  EXPECT_NE(text.find("618/1106 (55.9%)"), std::string::npos) << text;
}

TEST(SurveyAggregateTest, CountInvariantsHoldForRandomSessions) {
  Rng rng(21);
  SurveyOptions opts;
  opts.seed = 4;
  const auto survey = create_survey(make_pool(120, 120), opts);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Judgment> js;
    const int participants = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int p = 0; p < participants; ++p)
      for (const auto& it : survey.items)
        if (rng() % 3 != 0) js.push_back({"p" + std::to_string(p), it.headline_id, rng() % 2 ? G : R, "t"});
    const auto a = aggregate(survey, js);
    std::size_t shown = 0;
    for (const auto& h : a.per_headline) {
      shown += h.shown;
      EXPECT_GE(h.correct_fraction, 0.0);
      EXPECT_LE(h.correct_fraction, 1.0);
    }
    EXPECT_EQ(shown, a.total_answers);
    EXPECT_EQ(a.generated_correct + a.real_correct, a.total_correct);
    EXPECT_EQ(a.generated_answers + a.real_answers, a.total_answers);
    EXPECT_EQ(a.confusion.total(), a.total_answers);
  }
}

class SurveyHttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fresh_dir("http");
    SurveyOptions opts;
    opts.id = "web";
    opts.seed = 9;
    survey_ = create_survey(make_pool(150, 150), opts);
    SurveyStore::create(dir_, survey_);
    store_ = std::make_unique<SurveyStore>(dir_, 10);
    server_ = std::make_unique<SurveyServer>(*store_, ServerOptions{.operator_token = "s3cret"});
    port_ = server_->bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen(); });
    server_->wait_until_ready();
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  fs::path dir_;
  Survey survey_;
  std::unique_ptr<SurveyStore> store_;
  std::unique_ptr<SurveyServer> server_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(SurveyHttpTest, FullSessionPersists93JudgmentsAndNeverLeaksLabels) {
  auto cli = client();
  auto created = cli.Post("/sessions");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const auto created_body = nlohmann::json::parse(created->body);
  EXPECT_FALSE(contains_key(created_body, "label"));
  const std::string sid = created_body.at("session_id");

  std::set<std::string> answered;
  for (int i = 0; i < 93; ++i) {
    auto next = cli.Get("/sessions/" + sid + "/next");
    ASSERT_TRUE(next);
    ASSERT_EQ(next->status, 200);
    const auto item = nlohmann::json::parse(next->body);
    EXPECT_FALSE(contains_key(item, "label"));
    ASSERT_TRUE(item.contains("headline_id") && item.contains("text") && item.contains("progress"));
    EXPECT_EQ(item["progress"]["answered"], i);
    EXPECT_EQ(item["progress"]["total"], 93);
    const std::string hid = item["headline_id"];
    answered.insert(hid);
    const std::string body = nlohmann::json{{"headline_id", hid}, {"answer", i % 2 ? "real" : "generated"}}.dump();
    auto posted = cli.Post("/sessions/" + sid + "/judgments", body, "application/json");
    ASSERT_TRUE(posted);
    ASSERT_EQ(posted->status, 201);
    EXPECT_FALSE(contains_key(nlohmann::json::parse(posted->body), "label"));
    // A double-click resubmits the same item and must not create a second judgment.
    auto again = cli.Post("/sessions/" + sid + "/judgments", body, "application/json");
    ASSERT_TRUE(again);
    EXPECT_EQ(again->status, 409);
    EXPECT_EQ(nlohmann::json::parse(again->body)["error"], "already answered");
  }
  auto done = cli.Get("/sessions/" + sid + "/next");
  ASSERT_TRUE(done);
  const auto done_body = nlohmann::json::parse(done->body);
  EXPECT_TRUE(done_body.value("done", false));
  EXPECT_FALSE(contains_key(done_body, "label"));
  EXPECT_EQ(answered.size(), 93u);
  EXPECT_EQ(count_lines(dir_ / "judgments.jsonl"), 93u);
  EXPECT_EQ(SurveyStore(dir_, 1).judgments().size(), 93u);
}

TEST_F(SurveyHttpTest, ValidationErrorsMapToStatusCodes) {
  auto cli = client();
  const std::string sid = nlohmann::json::parse(cli.Post("/sessions")->body).at("session_id");
  const std::string hid = survey_.items.front().headline_id;
  auto post = [&](const std::string& session, const std::string& body) {
    return cli.Post("/sessions/" + session + "/judgments", body, "application/json")->status;
  };
  EXPECT_EQ(post(sid, nlohmann::json{{"headline_id", hid}, {"answer", "unsure"}}.dump()), 400);
  EXPECT_EQ(post(sid, nlohmann::json{{"headline_id", "h999"}, {"answer", "real"}}.dump()), 400);
  EXPECT_EQ(post(sid, "not json"), 400);
  EXPECT_EQ(post(sid, nlohmann::json{{"answer", "real"}}.dump()), 400);
  EXPECT_EQ(post("abcdef", nlohmann::json{{"headline_id", hid}, {"answer", "real"}}.dump()), 404);
  EXPECT_EQ(cli.Get("/sessions/abcdef/next")->status, 404);
  EXPECT_EQ(store_->judgments().size(), 0u);
}

TEST_F(SurveyHttpTest, AggregateRequiresOperatorToken) {
  auto cli = client();
  const std::string sid = nlohmann::json::parse(cli.Post("/sessions")->body).at("session_id");
  const auto& item = survey_.items.front();
  cli.Post("/sessions/" + sid + "/judgments",
           nlohmann::json{{"headline_id", item.headline_id}, {"answer", corpus::to_string(item.label)}}.dump(),
           "application/json");

  EXPECT_EQ(cli.Get("/surveys/web/aggregate")->status, 401);
  EXPECT_EQ(cli.Get("/surveys/web/aggregate", {{"Authorization", "Bearer wrong"}})->status, 401);
  const httplib::Headers auth{{"Authorization", "Bearer s3cret"}};
  EXPECT_EQ(cli.Get("/surveys/other/aggregate", auth)->status, 404);
  auto agg = cli.Get("/surveys/web/aggregate", auth);
  ASSERT_EQ(agg->status, 200);
  const auto j = nlohmann::json::parse(agg->body);
  EXPECT_EQ(j["total_answers"], 1);
  EXPECT_EQ(j["total_correct"], 1);
  auto csv = cli.Get("/surveys/web/per_headline.csv", auth);
  ASSERT_EQ(csv->status, 200);
  EXPECT_EQ(csv->body.rfind("headline_id,label,shown_count,correct_count\n", 0), 0u);
  auto log = cli.Get("/surveys/web/judgments", auth);
  ASSERT_EQ(log->status, 200);
  EXPECT_EQ(nlohmann::json::parse(log->body).size(), 1u);
}

TEST_F(SurveyHttpTest, ConcurrentSessionsAllPersist) {
  std::vector<std::thread> participants;
  for (int p = 0; p < 4; ++p) {
    participants.emplace_back([this] {
      auto cli = client();
      const std::string sid = nlohmann::json::parse(cli.Post("/sessions")->body).at("session_id");
      while (true) {
        const auto item = nlohmann::json::parse(cli.Get("/sessions/" + sid + "/next")->body);
        if (item.value("done", false)) break;
        cli.Post("/sessions/" + sid + "/judgments",
                 nlohmann::json{{"headline_id", item["headline_id"]}, {"answer", "generated"}}.dump(),
                 "application/json");
      }
    });
  }
  for (auto& t : participants) t.join();
  EXPECT_EQ(count_lines(dir_ / "judgments.jsonl"), 4u * 93u);
  const auto a = store_->aggregate();
  EXPECT_EQ(a.sessions, 4u);
  for (const auto& h : a.per_headline) EXPECT_EQ(h.shown, 4u);
}
