#ifndef INTERAREC_SUMMARIZER_HPP
#define INTERAREC_SUMMARIZER_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "interarec/digest.hpp"
#include "interarec/error.hpp"
#include "interarec/money.hpp"
#include "interarec/session.hpp"

namespace interarec {

inline const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> kCategories = {
      "Product Characteristics", "Lowest Price",   "Highest Price",
      "Brand Preference",        "Product Specifications",
      "User Reviews and Testimonials", "Comparisons", "Promotions",
  };
  return kCategories;
}

inline constexpr std::string_view kLowestPrice = "Lowest Price";
inline constexpr std::string_view kHighestPrice = "Highest Price";
inline constexpr std::string_view kProductCharacteristics = "Product Characteristics";

struct PromptSpec {
  std::vector<std::string> categories;
  std::string instruction_text;
};

/// Keyword prompt asking for a per-category preference summary in JSON.
inline PromptSpec build_prompt(const std::vector<std::string>& categories = default_categories()) {
  if (categories.empty()) throw Error(Errc::EmptyCategoryList, "prompt needs at least one category");
  std::string list;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].empty()) throw Error(Errc::EmptyCategoryList, "category names must be nonempty");
    if (i > 0) list += ", ";
    list += categories[i];
  }
  PromptSpec spec;
  spec.categories = categories;
  spec.instruction_text =
      "What can you infer from the images below with regards to a user preference in the "
      "following categories? " + list +
      ". Write a response that contains the above information as a JSON object keyed by "
      "category. If any of the categorical information is unavailable, mark it as not available.";
  return spec;
}

/// Splits refs into consecutive batches; only the last may be short.
inline std::vector<std::vector<ScreenshotRef>> batch_screenshots(const std::vector<ScreenshotRef>& refs,
                                                                 std::size_t batch_size) {
  if (batch_size == 0) throw Error(Errc::InvalidBatchSize, "batch size must be >= 1");
  std::vector<std::vector<ScreenshotRef>> batches;
  for (std::size_t i = 0; i < refs.size(); i += batch_size) {
    const auto end = std::min(refs.size(), i + batch_size);
    batches.emplace_back(refs.begin() + static_cast<std::ptrdiff_t>(i),
                         refs.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// Per-category summary. Every default category is always present; a
/// std::nullopt value means ABSENT.
class KeywordSummary {
 public:
  using Entry = std::pair<std::string, std::optional<std::string>>;

  KeywordSummary() {
    for (const auto& c : default_categories()) entries_.emplace_back(c, std::nullopt);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::pair<std::string, std::string>>& extras() const { return extras_; }

  std::optional<std::string> get(std::string_view category) const {
    for (const auto& [name, value] : entries_) {
      if (name == category) return value;
    }
    for (const auto& [name, value] : extras_) {
      if (name == category) return value;
    }
    return std::nullopt;
  }

  void set(std::string_view category, std::optional<std::string> value) {
    if (value && is_not_available(*value)) value.reset();
    for (auto& [name, v] : entries_) {
      if (name == category) {
        v = std::move(value);
        return;
      }
    }
    for (auto& [name, v] : extras_) {
      if (name == category) {
        if (value) v = *value;
        return;
      }
    }
    if (value) extras_.emplace_back(std::string(category), *value);
  }

  bool all_absent() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return !e.second; }) &&
           extras_.empty();
  }

  std::size_t source_batch_count = 0;
  std::vector<std::string> raw_texts;

  nlohmann::json to_json() const {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& [name, value] : entries_) {
      cats.push_back({{"category", name}, {"value", value ? nlohmann::json(*value) : nlohmann::json(nullptr)}});
    }
    nlohmann::json extra = nlohmann::json::array();
    for (const auto& [name, value] : extras_) extra.push_back({{"category", name}, {"value", value}});
    return {{"categories", std::move(cats)},
            {"extras", std::move(extra)},
            {"source_batch_count", source_batch_count},
            {"raw_texts", raw_texts}};
  }

  static KeywordSummary from_json(const nlohmann::json& j) {
    KeywordSummary s;
    for (const auto& e : j.at("categories")) {
      const auto& v = e.at("value");
      s.set(e.at("category").get<std::string>(),
            v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>()));
    }
    for (const auto& e : j.value("extras", nlohmann::json::array())) {
      s.extras_.emplace_back(e.at("category").get<std::string>(), e.at("value").get<std::string>());
    }
    s.source_batch_count = j.value("source_batch_count", std::size_t{0});
    s.raw_texts = j.value("raw_texts", std::vector<std::string>{});
    return s;
  }

  /// Digest of the category values (raw texts excluded).
  std::string digest() const {
    auto j = to_json();
    j.erase("raw_texts");
    return sha256_hex(j.dump());
  }

  friend bool operator==(const KeywordSummary&, const KeywordSummary&) = default;

 private:
  std::vector<Entry> entries_;
  std::vector<std::pair<std::string, std::string>> extras_;
};

namespace detail {

inline std::string normalize_key(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '"' || c == '\'' || c == '*' || c == '`') continue;
    out.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return std::string(trim(out));
}

inline std::optional<std::string> flatten_value(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string()) return v.get<std::string>();
  if (v.is_object()) {
    std::string out;
    for (const auto& [k, inner] : v.items()) {
      auto text = flatten_value(inner);
      if (!text) continue;
      if (!out.empty()) out += "; ";
      out += k + ": " + *text;
    }
    return out.empty() ? std::nullopt : std::optional<std::string>(out);
  }
  if (v.is_array()) {
    std::string out;
    for (const auto& inner : v) {
      auto text = flatten_value(inner);
      if (!text) continue;
      if (!out.empty()) out += ", ";
      out += *text;
    }
    return out.empty() ? std::nullopt : std::optional<std::string>(out);
  }
  return v.dump();
}

/// Returns the end (one past '}') of a balanced object starting at `open`.
inline std::optional<std::size_t> match_object(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

inline std::optional<nlohmann::ordered_json> first_json_object(std::string_view raw) {
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
    auto end = match_object(raw, pos);
    if (!end) continue;
    auto parsed = nlohmann::ordered_json::parse(raw.substr(pos, *end - pos), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses a backend response. Only the first well-formed JSON object is read;
/// surrounding prose and code fences are kept in raw_texts only.
inline KeywordSummary parse_summary_text(std::string_view raw) {
  if (detail::trim(raw).empty()) throw Error(Errc::SummaryParseError, "empty response");
  auto obj = detail::first_json_object(raw);
  if (!obj) throw Error(Errc::SummaryParseError, "no JSON object in response");
  if (obj->empty()) throw Error(Errc::SummaryParseError, "JSON object is empty");

  KeywordSummary summary;
  std::set<std::string> seen;
  for (const auto& [key, value] : obj->items()) {
    const auto norm = detail::normalize_key(key);
    std::string target;
    for (const auto& cat : default_categories()) {
      if (detail::lower_ascii(cat) == norm) target = cat;
    }
    if (target.empty()) target = std::string(detail::trim(key));
    if (!seen.insert(target).second) continue;
    summary.set(target, detail::flatten_value(value));
  }
  summary.source_batch_count = 1;
  summary.raw_texts.emplace_back(raw);
  return summary;
}

namespace detail {

inline std::optional<std::string> merge_price(const std::vector<std::string>& values, bool lowest) {
  std::optional<std::pair<Money, std::string>> best;
  for (const auto& v : values) {
    auto p = parse_price(v);
    if (!p) continue;
    if (!best || (lowest ? *p < best->first : *p > best->first) || (*p == best->first && v < best->second)) {
      best = {{*p, v}};
    }
  }
  if (best) return best->second;
  return std::nullopt;
}

inline std::optional<std::string> merge_text(const std::vector<std::string>& values) {
  std::string out;
  std::set<std::string> seen;
  for (const auto& v : values) {
    if (!seen.insert(v).second) continue;
    if (!out.empty()) out += "; ";
    out += v;
  }
  return out.empty() ? std::nullopt : std::optional<std::string>(out);
}

}  // namespace detail

/// Price bounds merge by numeric min/max; text merges by distinct
/// concatenation; ABSENT yields to any present value.
inline KeywordSummary merge_summaries(const std::vector<KeywordSummary>& parts) {
  if (parts.size() == 1) return parts.front();
  KeywordSummary merged;
  std::vector<std::string> names;
  for (const auto& c : default_categories()) names.push_back(c);
  for (const auto& p : parts) {
    for (const auto& [name, value] : p.extras()) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
  }
  for (const auto& name : names) {
    std::vector<std::string> values;
    for (const auto& p : parts) {
      if (auto v = p.get(name)) values.push_back(*v);
    }
    std::optional<std::string> value;
    if (name == kLowestPrice || name == kHighestPrice) {
      value = detail::merge_price(values, name == kLowestPrice);
      if (!value) value = detail::merge_text(values);
    } else {
      value = detail::merge_text(values);
    }
    merged.set(name, value);
  }
  for (const auto& p : parts) {
    merged.source_batch_count += p.source_batch_count;
    merged.raw_texts.insert(merged.raw_texts.end(), p.raw_texts.begin(), p.raw_texts.end());
  }
  return merged;
}

enum class BackendIdentity { Live, Mock };

/// Multimodal summarization service: prompt plus a batch of screenshots in,
/// raw response text out.
class SummarizerBackend {
 public:
  virtual ~SummarizerBackend() = default;
  virtual BackendIdentity identity() const = 0;
  virtual std::string complete(const PromptSpec& prompt, const std::vector<ScreenshotRef>& batch) = 0;
};

/// Key under which the mock backend looks up its canned response.
inline std::string fixture_key(std::string_view prompt_text, const std::vector<ScreenshotRef>& batch) {
  std::vector<std::string> keys;
  for (const auto& r : batch) keys.push_back(r.key);
  std::sort(keys.begin(), keys.end());
  std::string material(prompt_text);
  material += '\n';
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0) material += ',';
    material += keys[i];
  }
  return sha256_hex(material);
}

/// Deterministic backend reading `<root>/fixture/<key>.txt`.
class MockBackend : public SummarizerBackend {
 public:
  explicit MockBackend(std::filesystem::path root) : root_(std::move(root)) {}

  BackendIdentity identity() const override { return BackendIdentity::Mock; }

  static std::filesystem::path fixture_path(const std::filesystem::path& root, std::string_view key) {
    return root / "fixture" / (std::string(key) + ".txt");
  }

  std::string complete(const PromptSpec& prompt, const std::vector<ScreenshotRef>& batch) override {
    calls_.fetch_add(1);
    {
      std::lock_guard lock(mu_);
      batch_sizes_.push_back(batch.size());
    }
    const auto path = fixture_path(root_, fixture_key(prompt.instruction_text, batch));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MissingFixture, "no fixture at " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  /// Writes a fixture so that `complete(prompt, batch)` returns `text`.
  static std::filesystem::path write_fixture(const std::filesystem::path& root, const PromptSpec& prompt,
                                             const std::vector<ScreenshotRef>& batch, std::string_view text) {
    const auto path = fixture_path(root, fixture_key(prompt.instruction_text, batch));
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    return path;
  }

  std::size_t call_count() const { return calls_.load(); }
  std::vector<std::size_t> batch_sizes() const {
    std::lock_guard lock(mu_);
    return batch_sizes_;
  }

 private:
  std::filesystem::path root_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::vector<std::size_t> batch_sizes_;
};

struct SummarizeOptions {
  std::size_t batch_size = 10;
  std::size_t max_in_flight = 2;
};

/// Batches the session's screenshots, summarizes each batch (at most
/// `max_in_flight` concurrently) and merges the parsed results in batch order.
inline KeywordSummary summarize_screenshots(const std::vector<ScreenshotRef>& refs, SummarizerBackend& backend,
                                            const PromptSpec& prompt, const SummarizeOptions& options = {}) {
  if (refs.empty()) throw Error(Errc::NoScreenshots, "nothing to summarize");
  const auto batches = batch_screenshots(refs, options.batch_size);
  std::vector<std::optional<KeywordSummary>> parts(batches.size());
  std::vector<std::exception_ptr> errors(batches.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < batches.size(); i = next.fetch_add(1)) {
      try {
        const auto raw = backend.complete(prompt, batches[i]);
        try {
          parts[i] = parse_summary_text(raw);
        } catch (const Error& e) {
          throw Error(e.code(), "batch " + std::to_string(i) + ": " + e.what());
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min(std::max<std::size_t>(options.max_in_flight, 1), batches.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  std::vector<KeywordSummary> ready;
  ready.reserve(parts.size());
  for (auto& p : parts) ready.push_back(std::move(*p));
  return merge_summaries(ready);
}

inline KeywordSummary summarize_session(const Session& session, SummarizerBackend& backend,
                                        const PromptSpec& prompt, std::size_t batch_size = 10,
                                        std::size_t max_in_flight = 2) {
  return summarize_screenshots(session.screenshots(), backend, prompt, {batch_size, max_in_flight});
}

}  // namespace interarec

#endif  // INTERAREC_SUMMARIZER_HPP
