#ifndef INTERAREC_SESSION_MODELS_HPP
#define INTERAREC_SESSION_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "interarec/ranking.hpp"
#include "interarec/session.hpp"

namespace interarec {

enum class ModelKind { Popularity, Markov, Sknn };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Popularity: return "popularity";
    case ModelKind::Markov: return "markov";
    case ModelKind::Sknn: return "sknn";
  }
  return "unknown";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
  if (s == "popularity" || s == "pop") return ModelKind::Popularity;
  if (s == "markov") return ModelKind::Markov;
  if (s == "sknn") return ModelKind::Sknn;
  return std::nullopt;
}

struct ModelParams {
  std::size_t neighbors = 100;  // sknn neighborhood size
};

/// Desk-scale next-item predictor. Immutable once trained.
class SessionModel {
 public:
  SessionModel() = default;

  ModelKind kind() const { return kind_; }
  std::size_t trained_on() const { return trained_on_; }
  bool trained() const { return trained_on_ > 0; }

  friend SessionModel train_model(ModelKind kind, const std::vector<std::vector<std::string>>& sequences,
                                  const ModelParams& params);
  friend RankedPredictions predict_topk(const SessionModel& model, const std::vector<std::string>& prefix,
                                        std::size_t k, std::string session_id);

 private:
  using Scores = std::unordered_map<std::string, double>;

  static std::vector<ScoredItem> top(const Scores& scores, std::size_t k) {
    std::vector<ScoredItem> all;
    all.reserve(scores.size());
    for (const auto& [id, s] : scores) all.push_back({id, s});
    const auto cut = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut), all.end(),
                      [](const ScoredItem& a, const ScoredItem& b) {
                        return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
                      });
    all.resize(cut);
    return all;
  }

  Scores score_markov(const std::vector<std::string>& prefix, std::size_t k) const {
    Scores scores;
    if (auto it = transitions_.find(prefix.back()); it != transitions_.end()) scores = it->second;
    if (scores.size() >= k) return scores;
    // Popularity tail in a strictly lower band: counts / (max + 1) < 1 <= any transition count.
    const double band = max_popularity_ + 1.0;
    for (const auto& [id, count] : popularity_) {
      scores.try_emplace(id, count / band);
    }
    return scores;
  }

  Scores score_sknn(const std::vector<std::string>& prefix) const {
    std::set<std::string> query(prefix.begin(), prefix.end());
    std::map<std::size_t, double> overlap;
    for (const auto& id : query) {
      if (auto it = inverted_.find(id); it != inverted_.end()) {
        for (auto s : it->second) overlap[s] += 1.0;
      }
    }
    std::vector<std::pair<double, std::size_t>> neighbors;
    for (const auto& [s, common] : overlap) {
      const double sim = common / std::sqrt(static_cast<double>(query.size()) *
                                            static_cast<double>(sessions_[s].size()));
      neighbors.emplace_back(sim, s);
    }
    std::sort(neighbors.begin(), neighbors.end(),
              [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    if (neighbors.size() > params_.neighbors) neighbors.resize(params_.neighbors);
    Scores scores;
    for (const auto& [sim, s] : neighbors) {
      for (const auto& id : sessions_[s]) scores[id] += sim;
    }
    return scores;
  }

  ModelKind kind_ = ModelKind::Popularity;
  ModelParams params_;
  std::size_t trained_on_ = 0;
  Scores popularity_;
  double max_popularity_ = 0.0;
  std::unordered_map<std::string, Scores> transitions_;
  std::vector<std::vector<std::string>> sessions_;  // sorted distinct items per session
  std::unordered_map<std::string, std::vector<std::size_t>> inverted_;
};

inline SessionModel train_model(ModelKind kind, const std::vector<std::vector<std::string>>& sequences,
                                const ModelParams& params = {}) {
  if (sequences.empty()) throw Error(Errc::EmptyTrainingSet, "no training sessions");
  SessionModel m;
  m.kind_ = kind;
  m.params_ = params;
  for (const auto& seq : sequences) {
    if (seq.empty()) throw Error(Errc::EmptyTrainingSet, "training session without events");
    for (const auto& id : seq) m.popularity_[id] += 1.0;
    if (kind == ModelKind::Markov) {
      for (std::size_t j = 0; j + 1 < seq.size(); ++j) m.transitions_[seq[j]][seq[j + 1]] += 1.0;
    }
    if (kind == ModelKind::Sknn) {
      std::vector<std::string> items(seq.begin(), seq.end());
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      for (const auto& id : items) m.inverted_[id].push_back(m.sessions_.size());
      m.sessions_.push_back(std::move(items));
    }
  }
  for (const auto& [id, c] : m.popularity_) m.max_popularity_ = std::max(m.max_popularity_, c);
  m.trained_on_ = sequences.size();
  return m;
}

/// Trains on each session's full sequence (prefix plus held-out item).
inline SessionModel train_model(ModelKind kind, const std::vector<Session>& sessions, const ModelParams& params = {}) {
  std::vector<std::vector<std::string>> sequences;
  sequences.reserve(sessions.size());
  for (const auto& s : sessions) sequences.push_back(full_sequence(s));
  return train_model(kind, sequences, params);
}

/// Up to k distinct items by score, ties broken by item_id. Items already in
/// the prefix stay eligible.
inline RankedPredictions predict_topk(const SessionModel& model, const std::vector<std::string>& prefix,
                                      std::size_t k, std::string session_id = {}) {
  if (!model.trained()) throw Error(Errc::UntrainedModel, "model has not been trained");
  if (k == 0) throw Error(Errc::InvalidConfig, "k must be >= 1");
  if (prefix.empty()) throw Error(Errc::InvalidConfig, "prefix must be nonempty");
  SessionModel::Scores scores;
  switch (model.kind_) {
    case ModelKind::Popularity: scores = model.popularity_; break;
    case ModelKind::Markov: scores = model.score_markov(prefix, k); break;
    case ModelKind::Sknn: scores = model.score_sknn(prefix); break;
  }
  RankedPredictions out;
  out.session_id = std::move(session_id);
  out.k = k;
  out.entries = SessionModel::top(scores, k);
  return out;
}

/// Parses one prediction-file line and enforces list invariants.
inline RankedPredictions predictions_from_json(const nlohmann::json& j, std::size_t lineno) {
  auto bad = [lineno](const std::string& why) {
    return Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + why);
  };
  if (!j.is_object()) throw bad("expected an object");
  RankedPredictions p;
  const auto sid = j.contains("session_id") ? j["session_id"] : j.value("session", nlohmann::json());
  if (!sid.is_string()) throw bad("missing session_id");
  p.session_id = sid.get<std::string>();
  if (!j.contains("entries") || !j["entries"].is_array()) throw bad("missing entries");
  for (const auto& e : j["entries"]) {
    if (e.is_object() && e.contains("item_id") && e["item_id"].is_string() && e.contains("score") &&
        e["score"].is_number()) {
      p.entries.push_back({e["item_id"].get<std::string>(), e["score"].get<double>()});
    } else if (e.is_array() && e.size() == 2 && e[0].is_string() && e[1].is_number()) {
      p.entries.push_back({e[0].get<std::string>(), e[1].get<double>()});
    } else {
      throw bad("entry must be {item_id, score}");
    }
  }
  if (j.contains("k")) {
    if (!j["k"].is_number_unsigned() || j["k"].get<std::size_t>() == 0) throw bad("k must be a positive integer");
    p.k = j["k"].get<std::size_t>();
  } else {
    p.k = std::max<std::size_t>(p.entries.size(), 1);
  }
  try {
    check_invariants(p);
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) throw bad(e.what());
    throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
  }
  return p;
}

inline std::vector<RankedPredictions> read_predictions(std::istream& in) {
  std::vector<RankedPredictions> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": invalid JSON");
    out.push_back(predictions_from_json(j, lineno));
  }
  return out;
}

inline std::vector<RankedPredictions> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_predictions(in);
}

inline void write_predictions(std::ostream& out, const std::vector<RankedPredictions>& predictions) {
  for (const auto& p : predictions) out << to_json(p).dump() << '\n';
}

}  // namespace interarec

#endif  // INTERAREC_SESSION_MODELS_HPP
