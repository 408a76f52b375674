#ifndef INTERAREC_CONSTRAINTS_HPP
#define INTERAREC_CONSTRAINTS_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/money.hpp"
#include "interarec/summarizer.hpp"

namespace interarec {

struct ConstraintSet {
  std::optional<Money> lowest_price;
  std::optional<Money> highest_price;
  std::optional<std::string> color;

  bool empty() const { return !lowest_price && !highest_price && !color; }

  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

inline nlohmann::json to_json(const ConstraintSet& c) {
  auto money = [](const std::optional<Money>& m) { return m ? nlohmann::json(m->value()) : nlohmann::json(nullptr); };
  return {{"lowest_price", money(c.lowest_price)},
          {"highest_price", money(c.highest_price)},
          {"color", c.color ? nlohmann::json(*c.color) : nlohmann::json(nullptr)}};
}

/// Decodes a constraint object (the function-call arguments or an operator
/// override). Wrong value types throw InvalidConfig; prices may be negative
/// here and are caught by validate().
inline ConstraintSet constraints_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "constraints must be a JSON object");
  ConstraintSet c;
  auto money = [&j](const char* key) -> std::optional<Money> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw Error(Errc::InvalidConfig, std::string(key) + " must be a number");
    return Money::from_double(it->get<double>());
  };
  c.lowest_price = money("lowest_price");
  c.highest_price = money("highest_price");
  if (auto it = j.find("color"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(Errc::InvalidConfig, "color must be a string");
    if (!detail::trim(it->get<std::string>()).empty()) c.color = detail::lower_ascii(detail::trim(it->get<std::string>()));
  }
  return c;
}

/// Function-call schema used for LLM-driven decomposition.
inline nlohmann::json constraint_function_schema() {
  return nlohmann::json::parse(R"({
    "name": "get_user_recommendations",
    "description": "Generate dynamic recommendations based on the summary of user behavior",
    "parameters": {
      "type": "object",
      "properties": {
        "lowest_price": {"type": "number", "description": "get lowest price preference of user."},
        "highest_price": {"type": "number", "description": "get highest price preference of user."},
        "color": {"type": "string", "description": "get color preference of user"}
      }
    }
  })");
}

namespace detail {

/// Lowercased alphanumeric tokens with their byte offsets.
inline std::vector<std::pair<std::string, std::size_t>> word_tokens(std::string_view text) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    const auto start = i;
    std::string tok;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
      tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    if (!tok.empty()) out.emplace_back(std::move(tok), start);
  }
  return out;
}

inline std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  for (auto& [w, pos] : word_tokens(text)) out.push_back(std::move(w));
  return out;
}

/// Index of the first whole-word occurrence of `phrase` in `words`.
inline std::optional<std::size_t> find_phrase(const std::vector<std::string>& words,
                                              const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > words.size()) return std::nullopt;
  for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/// Known color terms. Terms map to a canonical color; by default each term is
/// its own canonical form.
class ColorVocabulary {
 public:
  static const std::vector<std::string>& builtin_colors() {
    static const std::vector<std::string> kColors = {
        "black", "white", "red",   "green",  "blue",  "yellow", "orange", "purple", "pink",  "brown",
        "gray",  "grey",  "beige", "navy",   "teal",  "olive",  "maroon", "khaki",  "cream", "ivory",
        "gold",  "silver", "tan",  "burgundy", "lilac", "coral", "turquoise", "mint", "charcoal", "multicolor",
    };
    return kColors;
  }

  ColorVocabulary() {
    for (const auto& c : builtin_colors()) add(c);
    add_synonym("grey", "gray");
  }

  /// Built-in terms plus the distinct lowercase colors present in the catalog.
  static ColorVocabulary from_catalog(const CatalogSnapshot& catalog) {
    ColorVocabulary vocab;
    for (const auto& item : catalog.items()) {
      if (item.color && !detail::trim(*item.color).empty()) vocab.add(*item.color);
    }
    return vocab;
  }

  void add(std::string_view term) {
    const auto key = join(detail::words_of(term));
    if (key.empty()) return;
    canonical_.try_emplace(key, key);
  }

  void add_synonym(std::string_view term, std::string_view canonical) {
    const auto key = join(detail::words_of(term));
    const auto target = join(detail::words_of(canonical));
    if (key.empty() || target.empty()) return;
    canonical_[key] = target;
    canonical_.try_emplace(target, target);
  }

  /// First color term in the text (earliest position, longest at a tie),
  /// mapped to its canonical form.
  std::optional<std::string> first_match(std::string_view text) const {
    const auto words = detail::words_of(text);
    std::optional<std::pair<std::size_t, std::size_t>> best;  // (position, -length) ordering
    std::string best_term;
    for (const auto& [term, canon] : canonical_) {
      const auto phrase = detail::words_of(term);
      auto pos = detail::find_phrase(words, phrase);
      if (!pos) continue;
      if (!best || *pos < best->first || (*pos == best->first && phrase.size() > best->second)) {
        best = {*pos, phrase.size()};
        best_term = canon;
      }
    }
    if (!best) return std::nullopt;
    return best_term;
  }

  /// All terms that canonicalize to `color` (including itself).
  std::vector<std::string> spellings(std::string_view color) const {
    const auto target = join(detail::words_of(color));
    std::vector<std::string> out{target};
    for (const auto& [term, canon] : canonical_) {
      if (canon == target && term != target) out.push_back(term);
    }
    return out;
  }

 private:
  static std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out.push_back(' ');
      out += w;
    }
    return out;
  }

  std::map<std::string, std::string> canonical_;
};

/// Whole-word, case-insensitive color containment.
inline bool color_matches(const Item& item, std::string_view color, const ColorVocabulary* vocab = nullptr) {
  if (!item.color) return false;
  const auto words = detail::words_of(*item.color);
  std::vector<std::string> spellings = vocab ? vocab->spellings(color) : std::vector<std::string>{std::string(color)};
  for (const auto& s : spellings) {
    if (detail::find_phrase(words, detail::words_of(s))) return true;
  }
  return false;
}

/// Inclusive price band plus color match.
inline bool satisfies(const Item& item, const ConstraintSet& c, const ColorVocabulary* vocab = nullptr) {
  if (c.lowest_price && item.price < *c.lowest_price) return false;
  if (c.highest_price && item.price > *c.highest_price) return false;
  if (c.color && !color_matches(item, *c.color, vocab)) return false;
  return true;
}

inline ConstraintSet decompose(const KeywordSummary& summary, const ColorVocabulary& vocab = {}) {
  ConstraintSet c;
  if (auto low = summary.get(kLowestPrice)) c.lowest_price = parse_price(*low);
  if (auto high = summary.get(kHighestPrice)) c.highest_price = parse_price(*high);
  if (auto chars = summary.get(kProductCharacteristics)) c.color = vocab.first_match(*chars);
  return c;
}

enum class IssueCode { RangeViolation, ConsistencyViolation, ZeroMatch };

inline std::string_view to_string(IssueCode code) {
  switch (code) {
    case IssueCode::RangeViolation: return "RangeViolation";
    case IssueCode::ConsistencyViolation: return "ConsistencyViolation";
    case IssueCode::ZeroMatch: return "ZeroMatch";
  }
  return "Unknown";
}

struct ValidationIssue {
  IssueCode code;
  std::string message;
};

struct ValidationReport {
  enum class Status { Valid, Rejected } status = Status::Valid;
  std::vector<ValidationIssue> issues;

  bool valid() const { return status == Status::Valid; }
  bool has(IssueCode code) const {
    return std::any_of(issues.begin(), issues.end(), [code](const auto& i) { return i.code == code; });
  }
};

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& i : r.issues) issues.push_back({{"code", to_string(i.code)}, {"message", i.message}});
  return {{"status", r.valid() ? "valid" : "rejected"}, {"issues", std::move(issues)}};
}

/// Range and consistency checks; ZeroMatch is informational only.
inline ValidationReport validate(const ConstraintSet& c, const CatalogSnapshot& catalog,
                                 const ColorVocabulary* vocab = nullptr) {
  ValidationReport report;
  auto reject = [&report](IssueCode code, std::string msg) {
    report.status = ValidationReport::Status::Rejected;
    report.issues.push_back({code, std::move(msg)});
  };
  if (c.lowest_price && *c.lowest_price < Money{}) {
    reject(IssueCode::RangeViolation, "lowest_price " + c.lowest_price->to_string() + " is negative");
  }
  if (c.highest_price && *c.highest_price < Money{}) {
    reject(IssueCode::RangeViolation, "highest_price " + c.highest_price->to_string() + " is negative");
  }
  if (c.lowest_price && c.highest_price && *c.lowest_price > *c.highest_price) {
    reject(IssueCode::ConsistencyViolation, "lowest_price " + c.lowest_price->to_string() +
                                                " exceeds highest_price " + c.highest_price->to_string());
  }
  if (report.valid()) {
    const bool any = std::any_of(catalog.items().begin(), catalog.items().end(),
                                 [&](const Item& item) { return satisfies(item, c, vocab); });
    if (!any) report.issues.push_back({IssueCode::ZeroMatch, "no catalog item satisfies the constraints"});
  }
  return report;
}

}  // namespace interarec

#endif  // INTERAREC_CONSTRAINTS_HPP
