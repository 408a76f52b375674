#ifndef INTERAREC_RERANK_HPP
#define INTERAREC_RERANK_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/digest.hpp"
#include "interarec/ranking.hpp"
#include "interarec/summarizer.hpp"

namespace interarec {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const { return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0)); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Text embedding service. Non-zero vectors are unit-norm.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

/// Lowercases, splits on runs of non-alphanumeric ASCII (bytes >= 0x80 are
/// kept inside tokens), buckets tokens by FNV-1a mod dim and L2-normalizes.
inline EmbeddingVector hash_embed(std::string_view text, std::size_t dim = 256) {
  if (dim == 0) throw Error(Errc::DimensionMismatch, "dim must be >= 1");
  EmbeddingVector out{std::vector<double>(dim, 0.0)};
  auto is_token_byte = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    out.values[fnv1a64(token) % dim] += 1.0;
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  const double n = out.norm();
  if (n > 0.0) {
    for (auto& v : out.values) v /= n;
  }
  return out;
}

class HashEmbedder : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::string id() const override { return "hash-" + std::to_string(dim_); }
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) override { return hash_embed(text, dim_); }

 private:
  std::size_t dim_;
};

/// Cosine similarity; 0 when either vector is zero.
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw Error(Errc::DimensionMismatch, std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double dot = std::inner_product(u.values.begin(), u.values.end(), v.values.begin(), 0.0);
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

/// Memoizes another provider per text, optionally backed by a line-delimited
/// cache file of {text_hash, dim, values}.
class CachingProvider : public EmbeddingProvider {
 public:
  explicit CachingProvider(EmbeddingProvider& inner, std::optional<std::filesystem::path> cache_file = std::nullopt)
      : inner_(inner), cache_file_(std::move(cache_file)) {
    if (cache_file_ && std::filesystem::exists(*cache_file_)) {
      std::ifstream in(*cache_file_);
      std::string line;
      while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || j.value("dim", std::size_t{0}) != inner_.dim()) continue;
        cache_[j.at("text_hash").get<std::string>()] = EmbeddingVector{j.at("values").get<std::vector<double>>()};
      }
    }
  }

  std::string id() const override { return inner_.id(); }
  std::size_t dim() const override { return inner_.dim(); }

  EmbeddingVector embed(std::string_view text) override {
    const auto key = sha256_hex(std::string(inner_.id()) + '\n' + std::string(text));
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    auto v = inner_.embed(text);
    std::lock_guard lock(mu_);
    cache_.emplace(key, v);
    if (cache_file_) {
      std::ofstream out(*cache_file_, std::ios::app);
      out << nlohmann::json{{"text_hash", key}, {"dim", v.dim()}, {"values", v.values}}.dump() << '\n';
    }
    return v;
  }

  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }

 private:
  EmbeddingProvider& inner_;
  std::optional<std::filesystem::path> cache_file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::size_t hits_ = 0;
};

/// Non-ABSENT default-category values in category order, joined by ". ".
inline std::string summary_text(const KeywordSummary& summary) {
  std::string out;
  for (const auto& [name, value] : summary.entries()) {
    if (!value || detail::trim(*value).empty()) continue;
    if (!out.empty()) out += ". ";
    out += detail::trim(*value);
  }
  return out;
}

/// Reorders a top-k list by cosine between the summary and each item's
/// attribute text. Ties keep the incoming order; unknown items embed as "".
inline RankedPredictions rerank_topk(const RankedPredictions& predictions, const KeywordSummary& summary,
                                     const CatalogSnapshot& catalog, EmbeddingProvider& provider) {
  RankedPredictions out;
  out.session_id = predictions.session_id;
  out.k = predictions.k;
  if (predictions.entries.empty()) return out;
  const auto query = provider.embed(summary_text(summary));
  std::vector<ScoredItem> scored;
  scored.reserve(predictions.entries.size());
  for (const auto& e : predictions.entries) {
    const Item* item = catalog.find(e.item_id);
    const auto text = item ? attribute_text(*item) : std::string{};
    scored.push_back({e.item_id, cosine(query, provider.embed(text))});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });
  out.entries = std::move(scored);
  return out;
}

}  // namespace interarec

#endif  // INTERAREC_RERANK_HPP
