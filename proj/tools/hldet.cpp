// Command-line entry point: build, generate, analyze, train-eval, survey and report.
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "hldet/common.hpp"
#include "hldet/pipeline.hpp"
#include "hldet/survey_http.hpp"

namespace {

hldet::survey::SurveyServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> specs;
  bool quiet = false;
  bool verbose = false;
};

hldet::app::PipelineConfig resolve(const CommonFlags& f) {
  auto cfg = f.config.empty() ? hldet::app::PipelineConfig{} : hldet::app::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.specs.empty()) cfg.classifiers.specs = f.specs;
  cfg.validate();
  hldet::set_log_level(f.quiet ? hldet::LogLevel::quiet
                               : (f.verbose ? hldet::LogLevel::debug : hldet::LogLevel::info));
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "top-level seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--spec", f.specs, "classifier spec to run (repeatable)")->take_all();
  cmd->add_flag("-q,--quiet", f.quiet, "suppress progress logs");
  cmd->add_flag("-v,--verbose", f.verbose, "per-epoch training logs");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace hldet::app;
  CLI::App app{"hldet: detecting machine-generated news headlines"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* build = app.add_subcommand("build", "corpus, generators and labeled dataset");
  auto* generate = app.add_subcommand("generate", "fine-tune the era generators and sample headlines");
  auto* analyze = app.add_subcommand("analyze", "word and part-of-speech comparison of real vs generated");
  auto* train_eval = app.add_subcommand("train-eval", "train and evaluate the selected classifiers");
  auto* report = app.add_subcommand("report", "combined text report of finished stages");
  auto* survey = app.add_subcommand("survey", "human judgment survey");
  survey->require_subcommand(1);
  auto* survey_create = survey->add_subcommand("create", "sample the survey items from the attacker-era test split");
  auto* survey_serve = survey->add_subcommand("serve", "serve the survey over HTTP");
  auto* survey_aggregate = survey->add_subcommand("aggregate", "aggregate and export persisted judgments");
  std::optional<int> port;
  std::string host, token;
  survey_serve->add_option("--port", port, "listen port (0 picks a free one)");
  survey_serve->add_option("--host", host, "listen address");
  survey_serve->add_option("--token", token, "operator bearer token (overrides the config)");
  for (auto* cmd : {build, generate, analyze, train_eval, report, survey_create, survey_serve, survey_aggregate})
    add_common(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(flags);
    if (build->parsed()) {
      const auto bundle = run_build(cfg);
      std::cout << "dataset " << bundle.hash() << ": train " << bundle.train.size() << ", dev " << bundle.dev.size()
                << ", test " << bundle.test.size() << '\n';
    } else if (generate->parsed()) {
      write_config_snapshot(cfg);
      const auto part = prepare_corpus(cfg);
      const auto sets = run_generate(cfg, part);
      std::cout << "generated " << sets.defender.size() << " defender-era and " << sets.attacker.size()
                << " attacker-era headlines in " << layout(cfg).generator_dir().string() << '\n';
    } else if (analyze->parsed()) {
      for (const auto& r : run_analyze(cfg)) std::cout << "[" << r.scope << " era]\n" << r.table() << '\n';
    } else if (train_eval->parsed()) {
      const auto outcome = run_train_eval(cfg);
      std::cout << outcome.table;
      if (!outcome.failures.empty()) return 1;
    } else if (survey_create->parsed()) {
      const auto s = run_survey_create(cfg);
      std::cout << "survey " << s.id << ": " << s.items.size() << " items (" << s.generated_items << " generated, "
                << s.real_items << " real, " << s.random_fill << " from the random fill) in "
                << layout(cfg).survey_dir(s.id).string() << '\n';
    } else if (survey_serve->parsed()) {
      hldet::survey::SurveyStore store(layout(cfg).survey_dir(cfg.survey.id));
      hldet::survey::SurveyServer server(
          store, {.operator_token = token.empty() ? cfg.survey.operator_token : token, .threshold = cfg.survey.threshold});
      const std::string bind_host = host.empty() ? cfg.survey.host : host;
      const int bound = server.bind(bind_host, port.value_or(cfg.survey.port));
      if (bound < 0) throw hldet::ConfigError("cannot bind " + bind_host);
      std::cout << "serving survey " << store.survey().id << " on http://" << bind_host << ":" << bound << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
    } else if (survey_aggregate->parsed()) {
      std::cout << run_survey_aggregate(cfg).text();
    } else if (report->parsed()) {
      std::cout << run_report(cfg);
    }
  } catch (const hldet::ConfigError& e) {
    std::cerr << "hldet: " << e.what() << '\n';
    return 2;
  } catch (const hldet::DataError& e) {
    std::cerr << "hldet: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hldet: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
