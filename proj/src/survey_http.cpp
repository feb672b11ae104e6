#include "hldet/survey_http.hpp"

#include <httplib.h>

namespace hldet::survey {

using nlohmann::ordered_json;

struct SurveyServer::Impl {
  SurveyStore& store;
  ServerOptions opts;
  httplib::Server server;

  Impl(SurveyStore& s, ServerOptions o) : store(s), opts(std::move(o)) {}

  static void reply(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, ordered_json{{"error", message}});
  }

  static ordered_json progress_json(const Progress& p) { return {{"answered", p.answered}, {"total", p.total}}; }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (opts.operator_token.empty()) {
      fail(res, 403, "operator endpoints are disabled");
      return false;
    }
    if (req.get_header_value("Authorization") != "Bearer " + opts.operator_token) {
      res.set_header("WWW-Authenticate", "Bearer");
      fail(res, 401, "unauthorized");
      return false;
    }
    return true;
  }

  bool known_survey(const httplib::Request& req, httplib::Response& res) const {
    if (req.matches[1] != store.survey().id) {
      fail(res, 404, "unknown survey");
      return false;
    }
    return true;
  }

  template <class F>
  void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const SurveyError& e) {
      const int status = e.kind() == SurveyError::Kind::not_found  ? 404
                         : e.kind() == SurveyError::Kind::conflict ? 409
                                                                   : 400;
      fail(res, status, e.what());
    } catch (const nlohmann::json::exception&) {
      fail(res, 400, "malformed JSON body");
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, ordered_json{{"session_id", store.create_session()}}); });
    });

    server.Get(R"(/sessions/([0-9a-f]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto item = store.next(req.matches[1]);
        if (!item) {
          reply(res, 200, ordered_json{{"done", true}, {"progress", progress_json(store.progress(req.matches[1]))}});
          return;
        }
        reply(res, 200,
              ordered_json{{"headline_id", item->headline_id},
                           {"text", item->text},
                           {"progress", progress_json(item->progress)}});
      });
    });

    server.Post(R"(/sessions/([0-9a-f]+)/judgments)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = nlohmann::json::parse(req.body);
        if (!body.is_object() || !body.contains("headline_id") || !body.contains("answer") ||
            !body["headline_id"].is_string() || !body["answer"].is_string())
          throw SurveyError(SurveyError::Kind::invalid, "body must be {\"headline_id\": str, \"answer\": str}");
        const auto p = store.record_judgment(req.matches[1], body["headline_id"], body["answer"]);
        reply(res, 201, ordered_json{{"accepted", true}, {"progress", progress_json(p)}});
      });
    });

    server.Get(R"(/surveys/([^/]+)/aggregate)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res) || !known_survey(req, res)) return;
      guarded(res, [&] { reply(res, 200, store.aggregate(opts.threshold).to_json()); });
    });

    server.Get(R"(/surveys/([^/]+)/judgments)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res) || !known_survey(req, res)) return;
      guarded(res, [&] {
        ordered_json out = ordered_json::array();
        for (const auto& j : store.judgments())
          out.push_back({{"session_id", j.session_id},
                         {"headline_id", j.headline_id},
                         {"answer", corpus::to_string(j.answer)},
                         {"timestamp", j.timestamp}});
        reply(res, 200, out);
      });
    });

    server.Get(R"(/surveys/([^/]+)/per_headline\.csv)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res) || !known_survey(req, res)) return;
      guarded(res, [&] { res.set_content(store.aggregate(opts.threshold).per_headline_csv(), "text/csv"); });
    });
  }
};

SurveyServer::SurveyServer(SurveyStore& store, ServerOptions opts)
    : impl_(std::make_unique<Impl>(store, std::move(opts))) {
  impl_->routes();
}

SurveyServer::~SurveyServer() { stop(); }

int SurveyServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool SurveyServer::listen() { return impl_->server.listen_after_bind(); }

void SurveyServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void SurveyServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace hldet::survey
