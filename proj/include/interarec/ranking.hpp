#ifndef INTERAREC_RANKING_HPP
#define INTERAREC_RANKING_HPP

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "interarec/error.hpp"

namespace interarec {

struct ScoredItem {
  std::string item_id;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

/// Top-k list for one session, best first.
struct RankedPredictions {
  std::string session_id;
  std::vector<ScoredItem> entries;
  std::size_t k = 0;

  friend bool operator==(const RankedPredictions&, const RankedPredictions&) = default;
};

/// Throws UnsortedScores / DuplicateItem / InvalidConfig when the list breaks
/// its invariants.
inline void check_invariants(const RankedPredictions& p) {
  if (p.k == 0) throw Error(Errc::InvalidConfig, "k must be >= 1");
  if (p.entries.size() > p.k) {
    throw Error(Errc::InvalidConfig, "session '" + p.session_id + "' has more than k entries");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < p.entries.size(); ++i) {
    if (i > 0 && p.entries[i].score > p.entries[i - 1].score) {
      throw Error(Errc::UnsortedScores, "session '" + p.session_id + "' entry " + std::to_string(i));
    }
    if (!seen.insert(p.entries[i].item_id).second) {
      throw Error(Errc::DuplicateItem, "session '" + p.session_id + "' repeats '" + p.entries[i].item_id + "'");
    }
  }
}

inline nlohmann::json to_json(const RankedPredictions& p) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : p.entries) entries.push_back({{"item_id", e.item_id}, {"score", e.score}});
  return {{"session_id", p.session_id}, {"k", p.k}, {"entries", std::move(entries)}};
}

}  // namespace interarec

#endif  // INTERAREC_RANKING_HPP
