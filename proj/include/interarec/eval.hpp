#ifndef INTERAREC_EVAL_HPP
#define INTERAREC_EVAL_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/rerank.hpp"
#include "interarec/session.hpp"
#include "interarec/session_models.hpp"
#include "interarec/summarizer.hpp"

namespace interarec {

/// 1 when truth is within the first min(k, |entries|) entries.
inline int recall_at_k(const RankedPredictions& predictions, std::string_view truth, std::size_t k) {
  const auto n = std::min(k, predictions.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (predictions.entries[i].item_id == truth) return 1;
  }
  return 0;
}

/// 1 / rank for a hit within the top k, else 0.
inline double mrr_at_k(const RankedPredictions& predictions, std::string_view truth, std::size_t k) {
  const auto n = std::min(k, predictions.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (predictions.entries[i].item_id == truth) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

struct EvalConfig {
  std::size_t k = 50;
  bool rerank = false;
  double training_fraction = 1.0;
  std::optional<std::size_t> session_window;  // nullopt = full history
  ScreenshotKind screenshot_kind = ScreenshotKind::FullPageViewport;
  std::uint64_t seed = 0;

  void check() const {
    if (k == 0) throw Error(Errc::InvalidConfig, "k must be >= 1");
    if (!(training_fraction > 0.0 && training_fraction <= 1.0)) {
      throw Error(Errc::InvalidConfig, "training_fraction must be in (0, 1]");
    }
    if (session_window && *session_window == 0) throw Error(Errc::InvalidConfig, "session_window must be >= 1");
  }
};

inline nlohmann::json to_json(const EvalConfig& c) {
  return {{"k", c.k},
          {"rerank", c.rerank},
          {"training_fraction", c.training_fraction},
          {"session_window", c.session_window ? nlohmann::json(*c.session_window) : nlohmann::json("full")},
          {"screenshot_kind", to_string(c.screenshot_kind)},
          {"seed", c.seed}};
}

inline EvalConfig eval_config_from_json(const nlohmann::json& j, EvalConfig base = {}) {
  EvalConfig c = base;
  c.k = j.value("k", c.k);
  c.rerank = j.value("rerank", c.rerank);
  c.training_fraction = j.value("training_fraction", c.training_fraction);
  if (auto it = j.find("session_window"); it != j.end()) {
    if (it->is_null() || (it->is_string() && (*it == "full" || *it == "FULL"))) {
      c.session_window.reset();
    } else {
      c.session_window = it->get<std::size_t>();
    }
  }
  if (auto it = j.find("screenshot_kind"); it != j.end()) {
    auto kind = screenshot_kind_from_string(it->get<std::string>());
    if (!kind) throw Error(Errc::InvalidConfig, "unknown screenshot_kind " + it->dump());
    c.screenshot_kind = *kind;
  }
  c.seed = j.value("seed", c.seed);
  c.check();
  return c;
}

inline std::string config_hash(const EvalConfig& c) { return sha256_hex(to_json(c).dump()).substr(0, 16); }

/// A model under evaluation: trained per run, or fixed predictions from an
/// external file keyed by session_id.
struct ModelSource {
  std::string name;
  std::variant<ModelKind, std::map<std::string, RankedPredictions>> source;
  ModelParams params;

  static ModelSource native(ModelKind kind, ModelParams params = {}) {
    return {std::string(to_string(kind)), kind, params};
  }
  static ModelSource external(std::string name, const std::vector<RankedPredictions>& predictions) {
    std::map<std::string, RankedPredictions> by_session;
    for (const auto& p : predictions) by_session[p.session_id] = p;
    return {std::move(name), std::move(by_session), {}};
  }
};

/// Supplies the keyword summary for a (window-truncated) test session.
class SummarySource {
 public:
  virtual ~SummarySource() = default;
  virtual std::optional<KeywordSummary> summary_for(const Session& session, ScreenshotKind kind) = 0;
};

/// Summaries through the regular summarizer pipeline, memoized per screenshot
/// set. Sessions without matching screenshots or fixtures yield nullopt.
class PipelineSummarySource : public SummarySource {
 public:
  PipelineSummarySource(SummarizerBackend& backend, PromptSpec prompt, SummarizeOptions options = {})
      : backend_(backend), prompt_(std::move(prompt)), options_(options) {}

  std::optional<KeywordSummary> summary_for(const Session& session, ScreenshotKind kind) override {
    std::vector<ScreenshotRef> refs;
    for (const auto& r : session.screenshots()) {
      if (r.kind == kind) refs.push_back(r);
    }
    if (refs.empty()) return std::nullopt;
    std::string key;
    for (const auto& r : refs) key += r.key + ',';
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::optional<KeywordSummary> summary;
    try {
      summary = summarize_screenshots(refs, backend_, prompt_, options_);
    } catch (const Error& e) {
      if (e.code() != Errc::MissingFixture) throw;
    }
    memo_.emplace(key, summary);
    return summary;
  }

 private:
  SummarizerBackend& backend_;
  PromptSpec prompt_;
  SummarizeOptions options_;
  std::map<std::string, std::optional<KeywordSummary>> memo_;
};

struct EvalRow {
  std::string model;
  EvalConfig config;
  double recall_at_k = 0.0;
  double mrr_at_k = 0.0;
  std::size_t session_count = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string dataset_digest;

  nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) rows_json.push_back(row_json(r));
    return {{"dataset_digest", dataset_digest}, {"rows", std::move(rows_json)}};
  }

  nlohmann::json row_json(const EvalRow& r) const {
    return {{"model", r.model},
            {"config", interarec::to_json(r.config)},
            {"config_hash", config_hash(r.config)},
            {"recall", r.recall_at_k},
            {"mrr", r.mrr_at_k},
            {"n", r.session_count},
            {"dataset_digest", dataset_digest}};
  }

  const EvalRow* find(std::string_view model, bool rerank) const {
    for (const auto& r : rows) {
      if (r.model == model && r.config.rerank == rerank) return &r;
    }
    return nullptr;
  }

  /// Appends each row to `<dir>/<config_hash>.jsonl`; returns the files touched.
  std::vector<std::filesystem::path> append_to(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    for (const auto& r : rows) {
      const auto path = dir / (config_hash(r.config) + ".jsonl");
      std::ofstream(path, std::ios::app) << row_json(r).dump() << '\n';
      if (std::find(files.begin(), files.end(), path) == files.end()) files.push_back(path);
    }
    return files;
  }

  /// Plot-ready table.
  std::string to_csv() const {
    std::ostringstream out;
    out << "model,rerank,training_fraction,session_window,screenshot_kind,k,seed,recall,mrr,n\n";
    for (const auto& r : rows) {
      out << r.model << ',' << (r.config.rerank ? "true" : "false") << ',' << r.config.training_fraction << ','
          << (r.config.session_window ? std::to_string(*r.config.session_window) : "full") << ','
          << to_string(r.config.screenshot_kind) << ',' << r.config.k << ',' << r.config.seed << ','
          << r.recall_at_k << ',' << r.mrr_at_k << ',' << r.session_count << '\n';
    }
    return out.str();
  }
};

struct EvalContext {
  const CatalogSnapshot* catalog = nullptr;
  SummarySource* summaries = nullptr;   // required when rerank is on
  EmbeddingProvider* embedder = nullptr;  // required when rerank is on
};

namespace detail {

/// Fisher-Yates with an unbiased bounded draw; identical on every platform.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(draw % bound)]);
  }
  return idx;
}

}  // namespace detail

struct Split {
  std::vector<Session> train;
  std::vector<Session> test;
};

/// Seeded 80/20 shuffle split.
inline Split train_test_split(const std::vector<Session>& dataset, std::uint64_t seed) {
  const auto perm = detail::seeded_permutation(dataset.size(), seed);
  const auto n_test = dataset.size() / 5;
  Split split;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    (i < perm.size() - n_test ? split.train : split.test).push_back(dataset[perm[i]]);
  }
  return split;
}

/// One row per model. The split depends only on the seed, so rows that differ
/// in training_fraction share the same test sessions; smaller fractions use a
/// prefix of the same shuffled training list.
inline EvalReport run_experiment(const EvalConfig& config, const std::vector<Session>& dataset,
                                 const std::vector<ModelSource>& models, const EvalContext& ctx) {
  config.check();
  if (dataset.empty()) throw Error(Errc::EmptyTestSplit, "dataset is empty");
  for (const auto& s : dataset) {
    if (s.events.empty() || !s.ground_truth_next) {
      throw Error(Errc::InvalidConfig, "session '" + s.session_id + "' is not an evaluation session");
    }
  }
  const auto split = train_test_split(dataset, config.seed);
  if (split.test.empty()) throw Error(Errc::EmptyTestSplit, "20% of " + std::to_string(dataset.size()) + " sessions is 0");
  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.training_fraction * static_cast<double>(split.train.size()) - 1e-9)));
  const std::vector<Session> train(split.train.begin(),
                                   split.train.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, split.train.size())));

  std::vector<std::optional<KeywordSummary>> summaries(split.test.size());
  if (config.rerank) {
    if (!ctx.summaries || !ctx.embedder || !ctx.catalog) {
      throw Error(Errc::MissingSummaries, "re-ranking needs a summary source, an embedder and a catalog");
    }
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      const auto& s = split.test[i];
      const auto windowed = config.session_window ? truncate_session(s, *config.session_window) : s;
      summaries[i] = ctx.summaries->summary_for(windowed, config.screenshot_kind);
      if (!summaries[i]) throw Error(Errc::MissingSummaries, "no summary for session '" + s.session_id + "'");
    }
  }

  EvalReport report;
  report.dataset_digest = dataset_digest(dataset);
  for (const auto& source : models) {
    std::optional<SessionModel> model;
    if (const auto* kind = std::get_if<ModelKind>(&source.source)) model = train_model(*kind, train, source.params);
    double recall_sum = 0.0;
    double mrr_sum = 0.0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      const auto& s = split.test[i];
      RankedPredictions pred;
      if (model) {
        pred = predict_topk(*model, s.item_ids(), config.k, s.session_id);
      } else {
        const auto& table = std::get<std::map<std::string, RankedPredictions>>(source.source);
        if (auto it = table.find(s.session_id); it != table.end()) pred = it->second;
        pred.k = config.k;
        if (pred.entries.size() > config.k) pred.entries.resize(config.k);
      }
      if (config.rerank) pred = rerank_topk(pred, *summaries[i], *ctx.catalog, *ctx.embedder);
      recall_sum += recall_at_k(pred, *s.ground_truth_next, config.k);
      mrr_sum += mrr_at_k(pred, *s.ground_truth_next, config.k);
    }
    const auto n = static_cast<double>(split.test.size());
    report.rows.push_back({source.name, config, recall_sum / n, mrr_sum / n, split.test.size()});
  }
  return report;
}

/// Runs every config in order and concatenates the rows.
inline EvalReport run_experiments(const std::vector<EvalConfig>& configs, const std::vector<Session>& dataset,
                                  const std::vector<ModelSource>& models, const EvalContext& ctx) {
  EvalReport all;
  for (const auto& c : configs) {
    auto r = run_experiment(c, dataset, models, ctx);
    all.dataset_digest = r.dataset_digest;
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
  }
  return all;
}

/// Expands a base config plus optional "sweep" arrays (cartesian product over
/// rerank, training_fraction, session_window, screenshot_kind, seed).
inline std::vector<EvalConfig> expand_sweep(const nlohmann::json& j) {
  const auto base = eval_config_from_json(j);
  std::vector<EvalConfig> out{base};
  if (!j.contains("sweep")) return out;
  for (const auto& [key, values] : j["sweep"].items()) {
    if (!values.is_array() || values.empty()) throw Error(Errc::InvalidConfig, "sweep." + key + " must be a nonempty array");
    std::vector<EvalConfig> next;
    for (const auto& c : out) {
      for (const auto& v : values) next.push_back(eval_config_from_json(nlohmann::json{{key, v}}, c));
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace interarec

#endif  // INTERAREC_EVAL_HPP
