#ifndef INTERAREC_CATALOG_HPP
#define INTERAREC_CATALOG_HPP

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "interarec/error.hpp"
#include "interarec/money.hpp"

namespace interarec {

using ordered_json = nlohmann::ordered_json;

struct Item {
  std::string item_id;
  std::string title;
  std::optional<std::string> brand;
  std::optional<std::string> color;
  Money price;
  std::vector<std::pair<std::string, std::string>> extra_attrs;

  friend bool operator==(const Item&, const Item&) = default;
};

/// Immutable, insertion-ordered item universe.
class CatalogSnapshot {
 public:
  CatalogSnapshot() = default;

  CatalogSnapshot(std::vector<Item> items, std::uint64_t version)
      : items_(std::move(items)), version_(version) {
    index_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].item_id.empty()) throw Error(Errc::MissingField, "item without item_id");
      if (!index_.emplace(items_[i].item_id, i).second) {
        throw Error(Errc::DuplicateId, "duplicate item_id '" + items_[i].item_id + "'");
      }
      if (items_[i].price < Money{}) {
        throw Error(Errc::InvalidPrice, "negative price for '" + items_[i].item_id + "'");
      }
    }
  }

  const std::vector<Item>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::uint64_t version() const { return version_; }

  const Item* find(std::string_view item_id) const {
    auto it = index_.find(std::string(item_id));
    return it == index_.end() ? nullptr : &items_[it->second];
  }

  const Item& at(std::string_view item_id) const {
    if (const auto* item = find(item_id)) return *item;
    throw Error(Errc::UnknownItem, "item '" + std::string(item_id) + "' not in catalog");
  }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t version_ = 0;
};

/// Space-joined title, brand, color, two-decimal price, then extra attribute
/// values in map order. Absent or empty fields are skipped.
inline std::string attribute_text(const Item& item) {
  std::string out;
  auto add = [&out](std::string_view part) {
    auto t = detail::trim(part);
    if (t.empty()) return;
    if (!out.empty()) out.push_back(' ');
    out.append(t);
  };
  add(item.title);
  if (item.brand) add(*item.brand);
  if (item.color) add(*item.color);
  add(item.price.to_string());
  for (const auto& [key, value] : item.extra_attrs) add(value);
  return out;
}

/// Decodes one catalog record.
inline Item item_from_json(const ordered_json& rec) {
  if (!rec.is_object()) throw Error(Errc::MissingField, "catalog record is not an object");
  auto id = rec.find("item_id");
  if (id == rec.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw Error(Errc::MissingField, "record has no item_id");
  }
  Item item;
  item.item_id = id->get<std::string>();
  auto price = rec.find("price");
  if (price == rec.end() || price->is_null()) {
    throw Error(Errc::MissingField, "record '" + item.item_id + "' has no price");
  }
  if (!price->is_number()) {
    throw Error(Errc::InvalidPrice, "price of '" + item.item_id + "' is not a number");
  }
  const double amount = price->get<double>();
  if (!std::isfinite(amount) || amount < 0.0) {
    throw Error(Errc::InvalidPrice, "price of '" + item.item_id + "' must be finite and >= 0");
  }
  item.price = Money::from_double(amount);
  auto text_field = [&rec](const char* key) -> std::optional<std::string> {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return std::nullopt;
    return it->is_string() ? it->get<std::string>() : it->dump();
  };
  item.title = text_field("title").value_or("");
  item.brand = text_field("brand");
  item.color = text_field("color");
  if (auto attrs = rec.find("attrs"); attrs != rec.end() && attrs->is_object()) {
    for (const auto& [key, value] : attrs->items()) {
      item.extra_attrs.emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return item;
}

/// Canonical single-line encoding of an item (price always rendered with two
/// decimals so file round-trips are exact).
inline std::string item_to_line(const Item& item) {
  auto str = [](const std::string& s) { return ordered_json(s).dump(); };
  std::string line = "{\"item_id\":" + str(item.item_id) + ",\"price\":" + item.price.to_string();
  if (!item.title.empty()) line += ",\"title\":" + str(item.title);
  if (item.brand) line += ",\"brand\":" + str(*item.brand);
  if (item.color) line += ",\"color\":" + str(*item.color);
  if (!item.extra_attrs.empty()) {
    ordered_json attrs = ordered_json::object();
    for (const auto& [k, v] : item.extra_attrs) attrs[k] = v;
    line += ",\"attrs\":" + attrs.dump();
  }
  line += "}";
  return line;
}

inline CatalogSnapshot import_catalog(const std::vector<ordered_json>& records, std::uint64_t previous_version = 0) {
  std::vector<Item> items;
  items.reserve(records.size());
  for (const auto& rec : records) items.push_back(item_from_json(rec));
  return CatalogSnapshot(std::move(items), previous_version + 1);
}

/// Parses line-delimited JSON; blank lines are skipped.
inline std::vector<ordered_json> parse_jsonl(std::istream& in) {
  std::vector<ordered_json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ordered_json> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return parse_jsonl(in);
}

inline std::string export_catalog(const CatalogSnapshot& snapshot) {
  std::string out;
  for (const auto& item : snapshot.items()) {
    out += item_to_line(item);
    out += '\n';
  }
  return out;
}

/// Persistent catalog: single writer, any number of snapshot readers.
class CatalogStore {
 public:
  explicit CatalogStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    load();
  }

  std::shared_ptr<const CatalogSnapshot> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  std::shared_ptr<const CatalogSnapshot> import_records(const std::vector<ordered_json>& records) {
    std::lock_guard lock(mu_);
    auto next = std::make_shared<const CatalogSnapshot>(import_catalog(records, current_->version()));
    const auto tmp = dir_ / "catalog.jsonl.tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << export_catalog(*next);
      if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, dir_ / "catalog.jsonl");
    std::ofstream(dir_ / "catalog.version", std::ios::trunc) << next->version() << '\n';
    current_ = std::move(next);
    return current_;
  }

 private:
  void load() {
    const auto file = dir_ / "catalog.jsonl";
    std::uint64_t version = 0;
    if (std::ifstream vin(dir_ / "catalog.version"); vin) vin >> version;
    if (!std::filesystem::exists(file)) {
      current_ = std::make_shared<const CatalogSnapshot>(std::vector<Item>{}, version);
      return;
    }
    auto records = read_jsonl_file(file);
    current_ = std::make_shared<const CatalogSnapshot>(import_catalog(records, version == 0 ? 0 : version - 1));
  }

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::shared_ptr<const CatalogSnapshot> current_;
};

}  // namespace interarec

#endif  // INTERAREC_CATALOG_HPP
