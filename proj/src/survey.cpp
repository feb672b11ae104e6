#include "hldet/survey.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>
#include <unordered_set>

#include "hldet/text.hpp"

namespace hldet::survey {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

std::string percent(std::size_t num, std::size_t den) {
  char buf[64];
  if (den == 0) return std::to_string(num) + "/0 (undefined)";
  std::snprintf(buf, sizeof buf, "%zu/%zu (%.1f%%)", num, den, 100.0 * static_cast<double>(num) / static_cast<double>(den));
  return buf;
}

double fraction(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

/// Lines of a JSONL log; a torn final line (no trailing newline) is ignored.
std::vector<nlohmann::json> read_log(const fs::path& file) {
  std::vector<nlohmann::json> out;
  if (!fs::exists(file)) return out;
  const std::string data = read_file(file);
  std::size_t start = 0;
  while (true) {
    const auto nl = data.find('\n', start);
    if (nl == std::string::npos) break;
    if (nl > start) out.push_back(nlohmann::json::parse(data.substr(start, nl - start)));
    start = nl + 1;
  }
  return out;
}

template <class T>
void draw(std::vector<T>& from, std::size_t n, Rng& rng, std::vector<T>& to) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, from.size() - 1);
    std::swap(from[i], from[pick(rng)]);
    to.push_back(from[i]);
  }
  from.erase(from.begin(), from.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

const SurveyItem* Survey::find(const std::string& headline_id) const {
  for (const auto& it : items)
    if (it.headline_id == headline_id) return &it;
  return nullptr;
}

ordered_json Survey::to_json() const {
  ordered_json j{{"id", id},
                 {"sets", sets},
                 {"per_set", per_set},
                 {"seed", seed},
                 {"composition",
                  {{"generated", generated_items}, {"real", real_items}, {"random_fill", random_fill}}},
                 {"items", ordered_json::array()}};
  for (const auto& it : items)
    j["items"].push_back(
        {{"headline_id", it.headline_id}, {"text", it.text}, {"label", corpus::to_string(it.label)}, {"set", it.set}});
  return j;
}

Survey Survey::from_json(const nlohmann::json& j) {
  Survey s;
  s.id = j.at("id").get<std::string>();
  s.sets = j.at("sets").get<std::size_t>();
  s.per_set = j.at("per_set").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("composition");
  s.generated_items = c.at("generated").get<std::size_t>();
  s.real_items = c.at("real").get<std::size_t>();
  s.random_fill = c.at("random_fill").get<std::size_t>();
  for (const auto& it : j.at("items"))
    s.items.push_back({it.at("headline_id").get<std::string>(), it.at("text").get<std::string>(),
                       corpus::parse_label(it.at("label").get<std::string>()), it.at("set").get<std::size_t>()});
  return s;
}

Survey create_survey(const std::vector<corpus::LabeledExample>& pool, const SurveyOptions& opts) {
  const std::size_t total = opts.sets * opts.per_set;
  if (total == 0) throw ConfigError("survey needs at least one item");
  if (opts.generated + opts.real > total) throw ConfigError("per-label counts exceed the survey size");

  std::vector<corpus::LabeledExample> generated, real;
  std::unordered_set<std::string> seen;
  for (const auto& ex : pool)
    if (seen.insert(ex.text).second) (ex.label == Label::generated ? generated : real).push_back(ex);
  if (generated.size() + real.size() < total)
    throw DataError("insufficient pool: " + std::to_string(generated.size() + real.size()) + " distinct headlines for " +
                    std::to_string(total) + " survey items");
  if (generated.empty() || real.empty()) throw DataError("survey pool must contain both labels");
  if (generated.size() < opts.generated || real.size() < opts.real)
    throw DataError("insufficient pool for the requested real/generated composition");

  Rng rng(opts.seed);
  std::vector<corpus::LabeledExample> chosen;
  draw(generated, opts.generated, rng, chosen);
  draw(real, opts.real, rng, chosen);
  std::vector<corpus::LabeledExample> rest;
  rest.reserve(generated.size() + real.size());
  rest.insert(rest.end(), generated.begin(), generated.end());
  rest.insert(rest.end(), real.begin(), real.end());
  const std::size_t fill = total - chosen.size();
  draw(rest, fill, rng, chosen);
  std::shuffle(chosen.begin(), chosen.end(), rng);

  Survey s;
  s.id = opts.id;
  s.sets = opts.sets;
  s.per_set = opts.per_set;
  s.seed = opts.seed;
  s.random_fill = fill;
  char id[24];
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    std::snprintf(id, sizeof id, "h%03zu", i + 1);
    s.items.push_back({id, chosen[i].text, chosen[i].label, i / opts.per_set});
    (chosen[i].label == Label::generated ? s.generated_items : s.real_items) += 1;
  }
  return s;
}

SurveyAggregate aggregate(const Survey& survey, const std::vector<Judgment>& judgments, double threshold) {
  SurveyAggregate a;
  a.survey_id = survey.id;
  a.threshold = threshold;
  std::map<std::string, std::size_t> index;
  for (const auto& it : survey.items) {
    index[it.headline_id] = a.per_headline.size();
    a.per_headline.push_back({.headline_id = it.headline_id, .text = it.text, .label = it.label});
  }
  std::unordered_set<std::string> sessions;
  for (const auto& j : judgments) {
    const auto found = index.find(j.headline_id);
    if (found == index.end()) throw DataError("judgment for unknown headline " + j.headline_id);
    auto& h = a.per_headline[found->second];
    const bool correct = j.answer == h.label;
    sessions.insert(j.session_id);
    ++h.shown;
    h.correct += correct ? 1 : 0;
    h.answered_generated += j.answer == Label::generated ? 1 : 0;
    ++a.total_answers;
    a.total_correct += correct ? 1 : 0;
    if (h.label == Label::generated) {
      ++a.generated_answers;
      a.generated_correct += correct ? 1 : 0;
      (correct ? a.confusion.tp : a.confusion.fn) += 1;
    } else {
      ++a.real_answers;
      a.real_correct += correct ? 1 : 0;
      (correct ? a.confusion.tn : a.confusion.fp) += 1;
    }
  }
  a.sessions = sessions.size();
  a.no_judgments = a.total_answers == 0;
  a.overall_fraction = fraction(a.total_correct, a.total_answers);
  a.generated_fraction = fraction(a.generated_correct, a.generated_answers);
  a.real_fraction = fraction(a.real_correct, a.real_answers);
  for (auto& h : a.per_headline) {
    h.correct_fraction = fraction(h.correct, h.shown);
    h.identified = h.correct_fraction > 0.5;
    if (h.shown == 0) continue;
    const double share_generated = fraction(h.answered_generated, h.shown);
    const double share_real = fraction(h.shown - h.answered_generated, h.shown);
    if (h.label == Label::generated) {
      if (share_generated > threshold) a.generated_judged_generated.push_back(h.headline_id);
      if (share_real > threshold) a.generated_judged_real.push_back(h.headline_id);
    } else {
      if (share_real > threshold) a.real_judged_real.push_back(h.headline_id);
      if (share_generated > threshold) a.real_judged_generated.push_back(h.headline_id);
    }
  }
  return a;
}

ordered_json SurveyAggregate::to_json() const {
  ordered_json j{{"survey_id", survey_id},
                 {"sessions", sessions},
                 {"total_answers", total_answers},
                 {"total_correct", total_correct},
                 {"overall_fraction", overall_fraction},
                 {"generated", {{"correct", generated_correct}, {"answers", generated_answers},
                                {"fraction", generated_fraction}}},
                 {"real", {{"correct", real_correct}, {"answers", real_answers}, {"fraction", real_fraction}}},
                 {"no_judgments", no_judgments},
                 {"threshold", threshold},
                 {"generated_judged_generated", generated_judged_generated},
                 {"generated_judged_real", generated_judged_real},
                 {"real_judged_real", real_judged_real},
                 {"real_judged_generated", real_judged_generated},
                 {"per_headline", ordered_json::array()}};
  for (const auto& h : per_headline)
    j["per_headline"].push_back({{"headline_id", h.headline_id},
                                 {"text", h.text},
                                 {"label", corpus::to_string(h.label)},
                                 {"shown_count", h.shown},
                                 {"correct_count", h.correct},
                                 {"correct_fraction", h.correct_fraction},
                                 {"identified", h.identified}});
  const auto row = table_row();
  j["human_row"] = {{"accuracy", row.accuracy}, {"precision", row.precision}, {"recall", row.recall}};
  return j;
}

std::string SurveyAggregate::per_headline_csv() const {
  std::string out = "headline_id,label,shown_count,correct_count\n";
  for (const auto& h : per_headline)
    out += h.headline_id + "," + std::string(corpus::to_string(h.label)) + "," + std::to_string(h.shown) + "," +
           std::to_string(h.correct) + "\n";
  return out;
}

std::string SurveyAggregate::text() const {
  std::ostringstream os;
  std::size_t gen_identified = 0, gen_total = 0, real_identified = 0, real_total = 0;
  for (const auto& h : per_headline) {
    if (h.shown == 0) continue;
    auto [hit, tot] = h.label == Label::generated ? std::tie(gen_identified, gen_total)
                                                   : std::tie(real_identified, real_total);
    ++tot;
    hit += h.identified ? 1 : 0;
  }
  os << "survey " << survey_id << ": " << sessions << " sessions\n";
  if (no_judgments) os << "no judgments recorded; all fractions are 0 by convention\n";
  os << "correct overall:      " << percent(total_correct, total_answers) << "\n";
  os << "correct on generated: " << percent(generated_correct, generated_answers) << "\n";
  os << "correct on real:      " << percent(real_correct, real_answers) << "\n";
  os << "generated headlines identified by majority: " << percent(gen_identified, gen_total) << "\n";
  os << "real headlines identified by majority:      " << percent(real_identified, real_total) << "\n";
  char thr[16];
  std::snprintf(thr, sizeof thr, "%.0f%%", threshold * 100.0);
  os << "generated judged real by more than " << thr << ": " << generated_judged_real.size() << "\n";
  os << "generated judged generated by more than " << thr << ": " << generated_judged_generated.size() << "\n";
  os << "real judged real by more than " << thr << ": " << real_judged_real.size() << "\n";
  os << "real judged generated by more than " << thr << ": " << real_judged_generated.size() << "\n";
  return os.str();
}

eval::TableRow SurveyAggregate::table_row() const {
  eval::TableRow row{.method = "Human", .group_start = true};
  if (no_judgments) return row;
  const auto m = eval::metrics(confusion);
  row.accuracy = m.accuracy;
  row.precision = m.precision;
  row.recall = m.recall;
  return row;
}

void SurveyStore::create(const fs::path& dir, const Survey& survey) {
  const fs::path file = dir / "survey.json";
  const std::string body = survey.to_json().dump(2) + "\n";
  if (fs::exists(file)) {
    if (read_file(file) == body) return;
    throw ConfigError("a different survey already exists in " + dir.string());
  }
  fs::create_directories(dir);
  write_file(file, body);
}

SurveyStore::SurveyStore(fs::path dir, std::optional<std::uint64_t> session_seed) : dir_(std::move(dir)) {
  const fs::path file = dir_ / "survey.json";
  if (!fs::exists(file)) throw ConfigError("no survey in " + dir_.string() + "; run `hldet survey create` first");
  survey_ = Survey::from_json(nlohmann::json::parse(read_file(file)));
  if (session_seed) {
    rng_.seed(*session_seed);
  } else {
    std::random_device rd;
    rng_.seed((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }
  for (const auto& line : read_log(dir_ / "sessions.jsonl")) {
    Session s;
    s.order = line.at("order").get<std::vector<std::size_t>>();
    sessions_[line.at("session_id").get<std::string>()] = std::move(s);
  }
  for (const auto& line : read_log(dir_ / "judgments.jsonl")) {
    Judgment j{line.at("session_id").get<std::string>(), line.at("headline_id").get<std::string>(),
               corpus::parse_label(line.at("answer").get<std::string>()), line.at("timestamp").get<std::string>()};
    sessions_.at(j.session_id).answers[j.headline_id] = j.answer;
    judgments_.push_back(std::move(j));
  }
}

std::vector<std::size_t> SurveyStore::draw_order() {
  // Sets are shown in order; items within each set are shuffled per session.
  std::vector<std::size_t> order(survey_.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return survey_.items[a].set < survey_.items[b].set; });
  auto begin = order.begin();
  while (begin != order.end()) {
    const auto set = survey_.items[*begin].set;
    auto end = std::find_if(begin, order.end(), [&](std::size_t i) { return survey_.items[i].set != set; });
    std::shuffle(begin, end, rng_);
    begin = end;
  }
  return order;
}

void SurveyStore::append(const fs::path& file, const std::string& line) {
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + file.string());
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      ::close(fd);
      throw std::runtime_error("write failed for " + file.string());
    }
    done += static_cast<std::size_t>(n);
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw std::runtime_error("fsync failed for " + file.string());
}

std::string SurveyStore::create_session() {
  std::lock_guard lock(mu_);
  std::string id;
  do {
    id = hex64(rng_()) + hex64(rng_());
  } while (sessions_.count(id));
  Session s;
  s.order = draw_order();
  append(dir_ / "sessions.jsonl", nlohmann::json{{"session_id", id}, {"order", s.order}}.dump());
  sessions_[id] = std::move(s);
  return id;
}

const SurveyStore::Session& SurveyStore::session(const std::string& id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SurveyError(SurveyError::Kind::not_found, "unknown session");
  return it->second;
}

std::optional<NextItem> SurveyStore::next(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const auto& s = session(session_id);
  const Progress p{s.answers.size(), s.order.size()};
  for (auto idx : s.order) {
    const auto& item = survey_.items[idx];
    if (!s.answers.count(item.headline_id)) return NextItem{item.headline_id, item.text, p};
  }
  return std::nullopt;
}

Progress SurveyStore::progress(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const auto& s = session(session_id);
  return {s.answers.size(), s.order.size()};
}

Progress SurveyStore::record_judgment(const std::string& session_id, const std::string& headline_id,
                                      const std::string& answer) {
  if (answer != "real" && answer != "generated")
    throw SurveyError(SurveyError::Kind::invalid, "answer must be \"real\" or \"generated\"");
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw SurveyError(SurveyError::Kind::not_found, "unknown session");
  if (!survey_.find(headline_id)) throw SurveyError(SurveyError::Kind::invalid, "unknown headline");
  auto& s = it->second;
  if (s.answers.count(headline_id)) throw SurveyError(SurveyError::Kind::conflict, "already answered");
  Judgment j{session_id, headline_id, corpus::parse_label(answer), utc_now()};
  append(dir_ / "judgments.jsonl", nlohmann::json{{"session_id", j.session_id},
                                                  {"headline_id", j.headline_id},
                                                  {"answer", answer},
                                                  {"timestamp", j.timestamp}}
                                       .dump());
  s.answers[headline_id] = j.answer;
  judgments_.push_back(std::move(j));
  return {s.answers.size(), s.order.size()};
}

std::vector<Judgment> SurveyStore::judgments() const {
  std::lock_guard lock(mu_);
  return judgments_;
}

SurveyAggregate SurveyStore::aggregate(double threshold) const {
  std::vector<Judgment> snapshot;
  std::size_t session_count = 0;
  {
    std::lock_guard lock(mu_);
    snapshot = judgments_;
    session_count = sessions_.size();
  }
  auto a = survey::aggregate(survey_, snapshot, threshold);
  a.sessions = std::max(a.sessions, session_count);
  return a;
}

}  // namespace hldet::survey
