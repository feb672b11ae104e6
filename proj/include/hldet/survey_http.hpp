#pragma once

#include <memory>
#include <string>

#include "hldet/survey.hpp"

namespace hldet::survey {

struct ServerOptions {
  /// Bearer token for operator endpoints; empty disables them.
  std::string operator_token;
  double threshold = 0.80;
};

/// JSON API over a SurveyStore:
///   POST /sessions                      -> 201 {session_id}
///   GET  /sessions/{id}/next            -> 200 {headline_id, text, progress} | {done, progress}
///   POST /sessions/{id}/judgments       -> 201 {progress}; 409 "already answered"
///   GET  /surveys/{id}/aggregate        -> operator only
///   GET  /surveys/{id}/judgments        -> operator only, raw log
///   GET  /surveys/{id}/per_headline.csv -> operator only
class SurveyServer {
 public:
  SurveyServer(SurveyStore& store, ServerOptions opts);
  ~SurveyServer();
  SurveyServer(const SurveyServer&) = delete;
  SurveyServer& operator=(const SurveyServer&) = delete;

  /// Binds to host:port (port 0 picks a free one); returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hldet::survey
