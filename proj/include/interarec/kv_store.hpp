#ifndef INTERAREC_KV_STORE_HPP
#define INTERAREC_KV_STORE_HPP

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interarec/error.hpp"

namespace interarec {

/// On-disk key-value store: one JSON file per key under `<root>/<namespace>/`.
/// Writes go through a temp file and rename.
class KvStore {
 public:
  explicit KvStore(std::filesystem::path root) : root_(std::move(root)) { std::filesystem::create_directories(root_); }

  const std::filesystem::path& root() const { return root_; }

  std::optional<nlohmann::json> get(std::string_view ns, std::string_view key) const {
    std::lock_guard lock(mu_);
    std::ifstream in(path(ns, key));
    if (!in) return std::nullopt;
    return nlohmann::json::parse(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  }

  void put(std::string_view ns, std::string_view key, const nlohmann::json& value) {
    std::lock_guard lock(mu_);
    const auto file = path(ns, key);
    std::filesystem::create_directories(file.parent_path());
    auto tmp = file;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << value.dump() << '\n';
      if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
  }

  bool erase(std::string_view ns, std::string_view key) {
    std::lock_guard lock(mu_);
    return std::filesystem::remove(path(ns, key));
  }

  std::vector<std::string> keys(std::string_view ns) const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    const auto dir = root_ / std::string(ns);
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() > 5 && name.ends_with(".json")) out.push_back(decode(name.substr(0, name.size() - 5)));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static std::string encode(std::string_view key) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : key) {
      if (std::isalnum(c) || c == '-' || c == '_') {
        out.push_back(static_cast<char>(c));
      } else {
        out.push_back('%');
        out.push_back(kHex[c >> 4]);
        out.push_back(kHex[c & 0xF]);
      }
    }
    return out.empty() ? "%" : out;
  }

  static std::string decode(std::string_view name) {
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
      if (name[i] == '%' && i + 2 < name.size()) {
        out.push_back(static_cast<char>(std::stoi(std::string(name.substr(i + 1, 2)), nullptr, 16)));
        i += 2;
      } else if (name[i] != '%') {
        out.push_back(name[i]);
      }
    }
    return out;
  }

  std::filesystem::path path(std::string_view ns, std::string_view key) const {
    return root_ / std::string(ns) / (encode(key) + ".json");
  }

  std::filesystem::path root_;
  mutable std::mutex mu_;
};

}  // namespace interarec

#endif  // INTERAREC_KV_STORE_HPP
