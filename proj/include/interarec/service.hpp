#ifndef INTERAREC_SERVICE_HPP
#define INTERAREC_SERVICE_HPP

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/choice.hpp"
#include "interarec/constraints.hpp"
#include "interarec/kv_store.hpp"
#include "interarec/rerank.hpp"
#include "interarec/session.hpp"
#include "interarec/session_models.hpp"
#include "interarec/summarizer.hpp"

namespace interarec {

enum class RecommendationMode { Assortment, Rerank };

inline std::string_view to_string(RecommendationMode m) {
  return m == RecommendationMode::Assortment ? "assortment" : "rerank";
}

inline std::optional<RecommendationMode> mode_from_string(std::string_view s) {
  if (s == "assortment") return RecommendationMode::Assortment;
  if (s == "rerank") return RecommendationMode::Rerank;
  return std::nullopt;
}

/// Summary cache key: order-insensitive in the screenshot keys, sensitive to
/// the set and to the prompt.
inline std::string cache_key(std::vector<std::string> screenshot_keys, std::string_view prompt_digest) {
  std::sort(screenshot_keys.begin(), screenshot_keys.end());
  std::string material = "prompt:" + std::string(prompt_digest) + "\nshots:";
  for (std::size_t i = 0; i < screenshot_keys.size(); ++i) {
    if (i > 0) material += ',';
    material += screenshot_keys[i];
  }
  return sha256_hex(material);
}

struct RecommendedItem {
  std::string item_id;
  std::string title;
  Money price;
  double score = 0.0;  // cosine (rerank) or revenue share p_k * P(k|S) (assortment)
};

struct RecommendationResponse {
  std::string session_id;
  RecommendationMode mode = RecommendationMode::Assortment;
  std::vector<RecommendedItem> items;
  ConstraintSet constraints_used;
  std::string summary_digest;  // empty when no summary exists yet
  std::int64_t generated_at = 0;
};

inline nlohmann::json to_json(const RecommendationResponse& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& i : r.items) {
    items.push_back({{"item_id", i.item_id}, {"title", i.title}, {"price", i.price.value()}, {"score", i.score}});
  }
  return {{"session_id", r.session_id},
          {"mode", to_string(r.mode)},
          {"items", std::move(items)},
          {"constraints_used", to_json(r.constraints_used)},
          {"summary_digest", r.summary_digest},
          {"generated_at", r.generated_at}};
}

/// Thrown when constraints fail validation; carries the full report.
class ValidationRejectedError : public Error {
 public:
  explicit ValidationRejectedError(ValidationReport report)
      : Error(Errc::ValidationRejected, describe(report)), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  static std::string describe(const ValidationReport& r) {
    std::string out;
    for (const auto& i : r.issues) out += std::string(to_string(i.code)) + " (" + i.message + ") ";
    return out;
  }
  ValidationReport report_;
};

struct ServiceOptions {
  std::filesystem::path data_dir = "interarec-data";
  PromptSpec prompt = build_prompt();
  std::size_t batch_size = 10;
  std::size_t max_in_flight = 2;
  std::optional<std::size_t> max_cardinality;
  std::function<std::int64_t()> clock = [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
};

/// The recommendation pipeline: sessions in, summaries, constraints and
/// recommendations out. State lives under `data_dir`.
class Service {
 public:
  Service(ServiceOptions options, SummarizerBackend& backend, EmbeddingProvider& embedder)
      : options_(std::move(options)),
        kv_(options_.data_dir / "kv"),
        catalog_(options_.data_dir / "catalog"),
        screenshots_(options_.data_dir / "screenshots"),
        backend_(&backend),
        embedder_(&embedder) {
    if (auto p = kv_.get("config", "mnl")) mnl_ = mnl_from_json(*p);
  }

  const ServiceOptions& options() const { return options_; }
  KvStore& kv() { return kv_; }
  const ScreenshotStore& screenshots() const { return screenshots_; }
  std::shared_ptr<const CatalogSnapshot> catalog() const { return catalog_.snapshot(); }

  void set_backend(SummarizerBackend& backend) { backend_ = &backend; }

  std::shared_ptr<const CatalogSnapshot> import_catalog(const std::vector<ordered_json>& records) {
    return catalog_.import_records(records);
  }

  void set_mnl(MnlParameters params) {
    std::lock_guard lock(config_mu_);
    kv_.put("config", "mnl", to_json(params));
    mnl_ = std::move(params);
  }

  void set_model(SessionModel model) {
    std::lock_guard lock(config_mu_);
    model_ = std::make_shared<const SessionModel>(std::move(model));
  }

  Session create_session(std::optional<std::string> id = std::nullopt) {
    if (!id) id = "s-" + sha256_hex(std::to_string(options_.clock()) + ':' + std::to_string(++created_)).substr(0, 12);
    std::lock_guard lock(session_mutex(*id));
    if (auto existing = kv_.get("sessions", *id)) return session_from_json(*existing);
    Session s;
    s.session_id = *id;
    kv_.put("sessions", *id, to_json(s));
    return s;
  }

  Session get_session(std::string_view id) const {
    auto j = kv_.get("sessions", id);
    if (!j) throw Error(Errc::SessionNotFound, "no session '" + std::string(id) + "'");
    return session_from_json(*j);
  }

  std::vector<std::string> session_ids() const { return kv_.keys("sessions"); }

  /// Appends under the session's lock. A missing timestamp becomes
  /// max(now, last + 1).
  Session append(std::string_view id, InteractionEvent event, bool has_timestamp = true) {
    std::lock_guard lock(session_mutex(std::string(id)));
    auto s = get_session(id);
    if (!has_timestamp) {
      event.timestamp = options_.clock();
      if (!s.events.empty()) event.timestamp = std::max(event.timestamp, s.events.back().timestamp + 1);
    }
    if (event.screenshot && event.screenshot->captured_at == 0) event.screenshot->captured_at = event.timestamp;
    s = append_event(std::move(s), std::move(event));
    kv_.put("sessions", s.session_id, to_json(s));
    return s;
  }

  /// Summary of all screenshots in the session, reused from the cache when the
  /// screenshot set and prompt are unchanged. nullopt without screenshots.
  std::optional<KeywordSummary> summary(std::string_view id) {
    const auto s = get_session(id);
    return summary_of(s);
  }

  std::optional<KeywordSummary> summary_of(const Session& s) {
    const auto refs = s.screenshots();
    if (refs.empty()) return std::nullopt;
    std::vector<std::string> keys;
    for (const auto& r : refs) keys.push_back(r.key);
    const auto key = cache_key(keys, sha256_hex(options_.prompt.instruction_text));
    if (auto hit = kv_.get("summaries", key)) return KeywordSummary::from_json(*hit);
    auto summary = summarize_screenshots(refs, *backend_, options_.prompt, {options_.batch_size, options_.max_in_flight});
    kv_.put("summaries", key, summary.to_json());
    return summary;
  }

  /// Stores operator overrides after validating them on their own.
  ValidationReport set_overrides(std::string_view id, const ConstraintSet& overrides) {
    get_session(id);
    const auto cat = catalog();
    const auto vocab = ColorVocabulary::from_catalog(*cat);
    auto report = validate(overrides, *cat, &vocab);
    if (report.valid()) kv_.put("overrides", id, to_json(overrides));
    return report;
  }

  std::optional<ConstraintSet> stored_overrides(std::string_view id) const {
    auto j = kv_.get("overrides", id);
    if (!j) return std::nullopt;
    return constraints_from_json(*j);
  }

  /// Summary -> constraints (overrides replace individual fields) ->
  /// validation -> assortment optimization or session-model re-ranking.
  RecommendationResponse orchestrate(std::string_view id, RecommendationMode mode, std::size_t k,
                                     std::optional<ConstraintSet> overrides = std::nullopt) {
    std::lock_guard lock(session_mutex(std::string(id)));
    const auto s = get_session(id);
    const auto cat = catalog();
    const auto vocab = ColorVocabulary::from_catalog(*cat);
    const auto summary = summary_of(s);

    ConstraintSet constraints = summary ? decompose(*summary, vocab) : ConstraintSet{};
    if (!overrides) overrides = stored_overrides(id);
    if (overrides) {
      if (overrides->lowest_price) constraints.lowest_price = overrides->lowest_price;
      if (overrides->highest_price) constraints.highest_price = overrides->highest_price;
      if (overrides->color) constraints.color = overrides->color;
    }
    auto report = validate(constraints, *cat, &vocab);
    if (!report.valid()) throw ValidationRejectedError(std::move(report));

    RecommendationResponse response;
    response.session_id = s.session_id;
    response.mode = mode;
    response.constraints_used = constraints;
    response.summary_digest = summary ? summary->digest() : std::string{};

    if (mode == RecommendationMode::Assortment) {
      const auto params = mnl_for(*cat);
      const auto assortment = optimize_assortment(params, *cat, {constraints, options_.max_cardinality}, &vocab);
      for (const auto& item_id : assortment.items) {
        const auto& item = cat->at(item_id);
        response.items.push_back({item_id, item.title, item.price,
                                  item.price.value() * mnl_probability(params, assortment.items, item_id)});
      }
      std::stable_sort(response.items.begin(), response.items.end(),
                       [](const auto& a, const auto& b) { return a.score > b.score; });
    } else {
      std::shared_ptr<const SessionModel> model;
      {
        std::lock_guard config_lock(config_mu_);
        model = model_;
      }
      if (!model) throw Error(Errc::NoModelConfigured, "rerank mode needs a trained session model");
      if (s.events.empty()) throw Error(Errc::InvalidConfig, "session has no events to predict from");
      auto ranked = predict_topk(*model, s.item_ids(), k, s.session_id);
      if (summary) ranked = rerank_topk(ranked, *summary, *cat, *embedder_);
      for (const auto& e : ranked.entries) {
        const Item* item = cat->find(e.item_id);
        response.items.push_back({e.item_id, item ? item->title : std::string{}, item ? item->price : Money{}, e.score});
      }
    }
    response.generated_at = options_.clock();
    kv_.put("responses", s.session_id, to_json(response));
    return response;
  }

 private:
  /// Stored parameters, or weight 1 for every item when none are configured.
  MnlParameters mnl_for(const CatalogSnapshot& cat) const {
    std::lock_guard lock(config_mu_);
    if (mnl_) return *mnl_;
    MnlParameters uniform;
    for (const auto& item : cat.items()) uniform.v[item.item_id] = 1.0;
    return uniform;
  }

  std::mutex& session_mutex(const std::string& id) {
    std::lock_guard lock(locks_mu_);
    auto& m = session_locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  ServiceOptions options_;
  KvStore kv_;
  CatalogStore catalog_;
  ScreenshotStore screenshots_;
  SummarizerBackend* backend_;
  EmbeddingProvider* embedder_;

  mutable std::mutex config_mu_;
  std::optional<MnlParameters> mnl_;
  std::shared_ptr<const SessionModel> model_;

  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks_;
  std::atomic<std::uint64_t> created_{0};
};

}  // namespace interarec

#endif  // INTERAREC_SERVICE_HPP
