#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "interarec/eval_runner.hpp"
#include "interarec/http_api.hpp"
#include "interarec/http_clients.hpp"
#include "interarec/service.hpp"

namespace fs = std::filesystem;
using namespace interarec;

namespace {

struct Common {
  std::string data_dir = env_var("INTERAREC_DATA_DIR").value_or("interarec-data");
  std::string backend = "mock";
  std::string fixtures = env_var("INTERAREC_FIXTURES").value_or("fixtures");
};

std::unique_ptr<SummarizerBackend> make_backend(const Common& c) {
  if (c.backend == "live") {
    return std::make_unique<LiveBackend>(LiveBackend::from_env(ScreenshotStore(fs::path(c.data_dir) / "screenshots")));
  }
  if (c.backend != "mock") throw Error(Errc::InvalidConfig, "backend must be mock or live");
  return std::make_unique<MockBackend>(c.fixtures);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void print_table(const EvalReport& report) {
  std::cout << std::left << std::setw(14) << "model" << std::setw(8) << "rerank" << std::setw(10) << "train"
            << std::setw(8) << "window" << std::setw(20) << "screenshots" << std::right << std::setw(10) << "recall"
            << std::setw(10) << "mrr" << std::setw(7) << "n" << '\n';
  for (const auto& r : report.rows) {
    std::cout << std::left << std::setw(14) << r.model << std::setw(8) << (r.config.rerank ? "yes" : "no")
              << std::setw(10) << r.config.training_fraction << std::setw(8)
              << (r.config.session_window ? std::to_string(*r.config.session_window) : "full") << std::setw(20)
              << to_string(r.config.screenshot_kind) << std::right << std::fixed << std::setprecision(4)
              << std::setw(10) << r.recall_at_k << std::setw(10) << r.mrr_at_k << std::setw(7) << r.session_count
              << std::defaultfloat << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Screenshot-driven session recommender"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--data-dir", common.data_dir, "State directory (INTERAREC_DATA_DIR)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  int port = 8080;
  std::string host = "0.0.0.0";
  std::string model_kind;
  std::string train_file;
  std::string mnl_file;
  std::string ui_dir;
  serve->add_option("--port", port, "Listen port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--backend", common.backend, "Summarizer backend: mock|live");
  serve->add_option("--fixtures", common.fixtures, "Mock fixture root (INTERAREC_FIXTURES)");
  serve->add_option("--model", model_kind, "Session model for rerank mode: popularity|markov|sknn");
  serve->add_option("--train", train_file, "Session file used to train --model");
  serve->add_option("--mnl", mnl_file, "MNL parameter file to install");
  serve->add_option("--ui-dir", ui_dir, "Static console assets served under /ui");

  auto* import_cmd = app.add_subcommand("import-catalog", "Import a line-delimited JSON catalog");
  std::string catalog_file;
  import_cmd->add_option("file", catalog_file)->required();

  auto* summarize_cmd = app.add_subcommand("summarize", "Summarize a stored session's screenshots");
  std::string session_id;
  summarize_cmd->add_option("--session", session_id)->required();
  summarize_cmd->add_option("--backend", common.backend, "mock|live");
  summarize_cmd->add_option("--fixtures", common.fixtures, "Mock fixture root");

  auto* eval_cmd = app.add_subcommand("eval", "Run an experiment configuration");
  std::string config_file;
  eval_cmd->add_option("--config", config_file)->required();
  bool json_out = false;
  eval_cmd->add_flag("--json", json_out, "Print the report as JSON");

  auto* recommend_cmd = app.add_subcommand("recommend", "Produce recommendations for a stored session");
  std::string mode = "assortment";
  std::size_t k = 50;
  recommend_cmd->add_option("--session", session_id)->required();
  recommend_cmd->add_option("--mode", mode, "assortment|rerank");
  recommend_cmd->add_option("-k", k, "List length (rerank mode)");
  recommend_cmd->add_option("--backend", common.backend, "mock|live");
  recommend_cmd->add_option("--fixtures", common.fixtures, "Mock fixture root");
  recommend_cmd->add_option("--model", model_kind, "Session model for rerank mode");
  recommend_cmd->add_option("--train", train_file, "Session file used to train --model");

  auto* estimate_cmd = app.add_subcommand("estimate-mnl", "Fit MNL weights from a transaction file");
  std::string transactions_file;
  std::string out_file;
  bool install = false;
  estimate_cmd->add_option("file", transactions_file)->required();
  estimate_cmd->add_option("--out", out_file, "Write the parameter file here");
  estimate_cmd->add_flag("--install", install, "Store as the service's MNL parameters");

  auto* fixture_cmd = app.add_subcommand("fixture-key", "Print (or write) the mock fixture for a screenshot batch");
  std::vector<std::string> keys;
  std::string text_file;
  fixture_cmd->add_option("--keys", keys, "Screenshot keys in the batch")->required()->delimiter(',');
  fixture_cmd->add_option("--fixtures", common.fixtures, "Mock fixture root");
  fixture_cmd->add_option("--write", text_file, "Copy this response text into the fixture");

  CLI11_PARSE(app, argc, argv);

  try {
    auto train_into = [&](Service& service) {
      if (model_kind.empty()) return;
      auto kind = model_kind_from_string(model_kind);
      if (!kind) throw Error(Errc::InvalidConfig, "unknown model " + model_kind);
      if (train_file.empty()) throw Error(Errc::InvalidConfig, "--model needs --train <sessions.jsonl>");
      service.set_model(train_model(*kind, load_session_dataset(fs::path(train_file)).sessions));
    };

    if (*serve) {
      auto backend = make_backend(common);
      HashEmbedder hash;
      std::unique_ptr<HttpEmbedder> http_embedder;
      EmbeddingProvider* embedder = &hash;
      if (env_var("INTERAREC_EMBED_URL")) {
        http_embedder = std::make_unique<HttpEmbedder>(HttpEmbedder::from_env());
        embedder = http_embedder.get();
      }
      CachingProvider cached(*embedder);
      ServiceOptions options;
      options.data_dir = common.data_dir;
      Service service(options, *backend, cached);
      if (!mnl_file.empty()) service.set_mnl(mnl_from_json(nlohmann::json::parse(read_file(mnl_file))));
      train_into(service);
      httplib::Server server;
      register_routes(server, service, ui_dir);
      std::cerr << "listening on " << host << ':' << port << '\n';
      return server.listen(host, port) ? 0 : 1;
    }

    if (*import_cmd) {
      CatalogStore store(fs::path(common.data_dir) / "catalog");
      const auto snap = store.import_records(read_jsonl_file(catalog_file));
      std::cout << "imported " << snap->size() << " items (version " << snap->version() << ")\n";
      return 0;
    }

    if (*summarize_cmd || *recommend_cmd) {
      auto backend = make_backend(common);
      HashEmbedder embedder;
      ServiceOptions options;
      options.data_dir = common.data_dir;
      Service service(options, *backend, embedder);
      if (*summarize_cmd) {
        const auto summary = service.summary(session_id);
        if (!summary) {
          std::cout << nlohmann::json{{"session_id", session_id}, {"summary", nullptr}}.dump(2) << '\n';
          return 0;
        }
        const auto cat = service.catalog();
        const auto constraints = decompose(*summary, ColorVocabulary::from_catalog(*cat));
        std::cout << nlohmann::json{{"session_id", session_id},
                                    {"summary", summary->to_json()},
                                    {"constraints", to_json(constraints)}}
                         .dump(2)
                  << '\n';
        return 0;
      }
      train_into(service);
      auto m = mode_from_string(mode);
      if (!m) throw Error(Errc::InvalidConfig, "mode must be assortment or rerank");
      std::cout << to_json(service.orchestrate(session_id, *m, k)).dump(2) << '\n';
      return 0;
    }

    if (*eval_cmd) {
      const auto cfg = nlohmann::json::parse(read_file(config_file));
      const auto run = run_eval_file(cfg, fs::absolute(config_file).parent_path());
      for (const auto& e : run.excluded) {
        std::cerr << "excluded session '" << e.session_id << "' (line " << e.line << "): " << e.reason << '\n';
      }
      if (json_out) {
        std::cout << run.report.to_json().dump(2) << '\n';
      } else {
        print_table(run.report);
      }
      for (const auto& f : run.report_files) std::cerr << "report: " << f.string() << '\n';
      return 0;
    }

    if (*estimate_cmd) {
      std::vector<Transaction> transactions;
      for (const auto& j : read_jsonl_file(transactions_file)) transactions.push_back(transaction_from_json(j));
      const auto est = estimate_mnl(transactions);
      for (const auto& issue : est.issues) {
        std::cerr << to_string(issue.code) << ' ' << issue.item_id << " (unclamped " << issue.unclamped << ")\n";
      }
      const auto params = to_json(est.params).dump(2);
      if (!out_file.empty()) std::ofstream(out_file) << params << '\n';
      if (install) {
        KvStore(fs::path(common.data_dir) / "kv").put("config", "mnl", to_json(est.params));
      }
      std::cout << params << '\n';
      return 0;
    }

    if (*fixture_cmd) {
      std::vector<ScreenshotRef> batch;
      for (const auto& key : keys) batch.push_back({key, ScreenshotKind::FullPageViewport, 0});
      const auto prompt = build_prompt();
      if (!text_file.empty()) {
        std::cout << MockBackend::write_fixture(common.fixtures, prompt, batch, read_file(text_file)).string() << '\n';
      } else {
        std::cout << MockBackend::fixture_path(common.fixtures, fixture_key(prompt.instruction_text, batch)).string()
                  << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::BackendUnavailable ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
