#ifndef INTERAREC_EVAL_RUNNER_HPP
#define INTERAREC_EVAL_RUNNER_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/eval.hpp"
#include "interarec/http_clients.hpp"

namespace interarec {

struct EvalRun {
  EvalReport report;
  std::vector<std::filesystem::path> report_files;
  std::vector<ExcludedSession> excluded;
};

/// Runs an experiment file:
///   dataset, catalog        session / catalog files (relative to base_dir)
///   fixtures                mock summarizer root (default $INTERAREC_FIXTURES)
///   models                  ["popularity", "markov", "sknn",
///                            {"name": ..., "predictions": file}]
///   k, rerank, training_fraction, session_window, screenshot_kind, seed
///   sweep                   {field: [values...]}
///   batch_size, embed_dim, neighbors, report_dir, csv
inline EvalRun run_eval_file(const nlohmann::json& cfg, const std::filesystem::path& base_dir) {
  auto resolve = [&base_dir](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  if (!cfg.contains("dataset")) throw Error(Errc::InvalidConfig, "experiment config needs \"dataset\"");
  EvalRun run;
  std::optional<CatalogSnapshot> catalog;
  if (cfg.contains("catalog")) catalog = import_catalog(read_jsonl_file(resolve(cfg["catalog"].get<std::string>())));
  LoadOptions load;
  load.catalog = catalog ? &*catalog : nullptr;
  auto dataset = load_session_dataset(resolve(cfg["dataset"].get<std::string>()), load);
  run.excluded = dataset.excluded;

  ModelParams params;
  params.neighbors = cfg.value("neighbors", params.neighbors);
  std::vector<ModelSource> models;
  for (const auto& m : cfg.value("models", nlohmann::json::array({"popularity", "markov", "sknn"}))) {
    if (m.is_string()) {
      auto kind = model_kind_from_string(m.get<std::string>());
      if (!kind) throw Error(Errc::InvalidConfig, "unknown model " + m.dump());
      models.push_back(ModelSource::native(*kind, params));
    } else {
      models.push_back(ModelSource::external(m.at("name").get<std::string>(),
                                             read_predictions(resolve(m.at("predictions").get<std::string>()))));
    }
  }

  const auto configs = expand_sweep(cfg);
  const bool any_rerank = std::any_of(configs.begin(), configs.end(), [](const auto& c) { return c.rerank; });
  std::filesystem::path fixtures = cfg.contains("fixtures") ? resolve(cfg["fixtures"].get<std::string>())
                                                            : std::filesystem::path(env_var("INTERAREC_FIXTURES").value_or("."));
  MockBackend backend(fixtures);
  PipelineSummarySource summaries(backend, build_prompt(), {cfg.value("batch_size", std::size_t{10}), 1});
  HashEmbedder embedder(cfg.value("embed_dim", std::size_t{256}));
  CatalogSnapshot empty;
  EvalContext ctx{catalog ? &*catalog : &empty, &summaries, &embedder};
  if (any_rerank && !catalog) throw Error(Errc::InvalidConfig, "re-ranking needs \"catalog\"");

  run.report = run_experiments(configs, dataset.sessions, models, ctx);
  if (cfg.contains("report_dir")) run.report_files = run.report.append_to(resolve(cfg["report_dir"].get<std::string>()));
  if (cfg.contains("csv")) std::ofstream(resolve(cfg["csv"].get<std::string>())) << run.report.to_csv();
  return run;
}

}  // namespace interarec

#endif  // INTERAREC_EVAL_RUNNER_HPP
