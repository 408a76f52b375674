#ifndef INTERAREC_SESSION_HPP
#define INTERAREC_SESSION_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "interarec/catalog.hpp"
#include "interarec/digest.hpp"
#include "interarec/error.hpp"

namespace interarec {

enum class ScreenshotKind { FullPageViewport, ItemImageOnly };

inline std::string_view to_string(ScreenshotKind kind) {
  return kind == ScreenshotKind::FullPageViewport ? "full_page_viewport" : "item_image_only";
}

inline std::optional<ScreenshotKind> screenshot_kind_from_string(std::string_view s) {
  if (s == "full_page_viewport") return ScreenshotKind::FullPageViewport;
  if (s == "item_image_only") return ScreenshotKind::ItemImageOnly;
  return std::nullopt;
}

struct ScreenshotRef {
  std::string key;
  ScreenshotKind kind = ScreenshotKind::FullPageViewport;
  std::int64_t captured_at = 0;

  friend bool operator==(const ScreenshotRef&, const ScreenshotRef&) = default;
};

struct InteractionEvent {
  std::string item_id;
  std::int64_t timestamp = 0;  // ms since epoch
  std::optional<ScreenshotRef> screenshot;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct Session {
  std::string session_id;
  std::vector<InteractionEvent> events;
  std::optional<std::string> ground_truth_next;

  std::vector<std::string> item_ids() const {
    std::vector<std::string> ids;
    ids.reserve(events.size());
    for (const auto& e : events) ids.push_back(e.item_id);
    return ids;
  }

  std::vector<ScreenshotRef> screenshots() const {
    std::vector<ScreenshotRef> refs;
    for (const auto& e : events) {
      if (e.screenshot) refs.push_back(*e.screenshot);
    }
    return refs;
  }

  friend bool operator==(const Session&, const Session&) = default;
};

inline Session append_event(Session session, InteractionEvent event) {
  if (event.timestamp < 0) {
    throw Error(Errc::OutOfOrderTimestamp, "negative timestamp");
  }
  if (!session.events.empty() && event.timestamp <= session.events.back().timestamp) {
    throw Error(Errc::OutOfOrderTimestamp,
                "timestamp " + std::to_string(event.timestamp) + " not after " +
                    std::to_string(session.events.back().timestamp));
  }
  session.events.push_back(std::move(event));
  return session;
}

/// Keeps the final min(last_m, t) events.
inline Session truncate_session(Session session, std::size_t last_m) {
  if (last_m == 0) throw Error(Errc::InvalidWindow, "session window must be >= 1");
  if (session.events.size() > last_m) {
    session.events.erase(session.events.begin(),
                         session.events.end() - static_cast<std::ptrdiff_t>(last_m));
  }
  return session;
}

// JSON encoding used by the service store and dataset digests.

inline nlohmann::json to_json(const ScreenshotRef& ref) {
  return {{"key", ref.key}, {"kind", to_string(ref.kind)}, {"captured_at", ref.captured_at}};
}

inline ScreenshotRef screenshot_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("key") || !j["key"].is_string() || j["key"].get<std::string>().empty()) {
    throw Error(Errc::MissingField, "screenshot needs a nonempty key");
  }
  ScreenshotRef ref;
  ref.key = j["key"].get<std::string>();
  if (auto it = j.find("kind"); it != j.end()) {
    auto kind = it->is_string() ? screenshot_kind_from_string(it->get<std::string>()) : std::nullopt;
    if (!kind) throw Error(Errc::MissingField, "unknown screenshot kind " + it->dump());
    ref.kind = *kind;
  }
  ref.captured_at = j.value("captured_at", std::int64_t{0});
  return ref;
}

inline nlohmann::json to_json(const Session& s) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : s.events) {
    nlohmann::json je = {{"item_id", e.item_id}, {"timestamp", e.timestamp}};
    if (e.screenshot) je["screenshot"] = to_json(*e.screenshot);
    events.push_back(std::move(je));
  }
  nlohmann::json j = {{"session_id", s.session_id}, {"events", std::move(events)}};
  if (s.ground_truth_next) j["ground_truth_next"] = *s.ground_truth_next;
  return j;
}

inline Session session_from_json(const nlohmann::json& j) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  for (const auto& je : j.at("events")) {
    InteractionEvent e;
    e.item_id = je.at("item_id").get<std::string>();
    e.timestamp = je.at("timestamp").get<std::int64_t>();
    if (je.contains("screenshot")) e.screenshot = screenshot_from_json(je["screenshot"]);
    s.events.push_back(std::move(e));
  }
  if (j.contains("ground_truth_next")) s.ground_truth_next = j["ground_truth_next"].get<std::string>();
  return s;
}

/// Content-addressed directory of `<key>.png` screenshot files.
class ScreenshotStore {
 public:
  explicit ScreenshotStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(std::string_view key) const { return dir_ / (std::string(key) + ".png"); }
  bool contains(std::string_view key) const { return std::filesystem::exists(path_for(key)); }

  /// Stores bytes under their SHA-256 and returns the key.
  std::string put(std::string_view bytes) const {
    auto key = sha256_hex(bytes);
    std::filesystem::create_directories(dir_);
    const auto path = path_for(key);
    if (!std::filesystem::exists(path)) {
      std::ofstream out(path, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    }
    return key;
  }

  std::string read(std::string_view key) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) throw Error(Errc::MissingScreenshotKey, "no screenshot stored under '" + std::string(key) + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

 private:
  std::filesystem::path dir_;
};

struct LoadOptions {
  bool strict = false;  // require every screenshot key to exist in `screenshots`
  std::optional<ScreenshotStore> screenshots;
  const CatalogSnapshot* catalog = nullptr;  // unknown item ids only warn
};

struct ExcludedSession {
  std::string session_id;
  std::size_t line = 0;
  std::string reason;
};

struct DatasetLoad {
  std::vector<Session> sessions;
  std::vector<ExcludedSession> excluded;
  std::vector<std::string> warnings;
};

/// Decodes one raw session line; the full item sequence becomes events.
inline Session raw_session_from_json(const nlohmann::json& j, std::size_t lineno) {
  auto bad = [lineno](const std::string& why) {
    return Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + why);
  };
  if (!j.is_object()) throw bad("expected an object");
  if (!j.contains("session_id") || !j["session_id"].is_string()) throw bad("missing session_id");
  if (!j.contains("items") || !j["items"].is_array()) throw bad("missing items array");
  const auto& items = j["items"];
  const nlohmann::json* shots = j.contains("screenshots") ? &j["screenshots"] : nullptr;
  const nlohmann::json* stamps = j.contains("timestamps") ? &j["timestamps"] : nullptr;
  if (shots && (!shots->is_array() || shots->size() != items.size())) {
    throw bad("screenshots must align 1:1 with items");
  }
  if (stamps && (!stamps->is_array() || stamps->size() != items.size())) {
    throw bad("timestamps must align 1:1 with items");
  }
  Session s;
  s.session_id = j["session_id"].get<std::string>();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].is_string()) throw bad("item ids must be strings");
    InteractionEvent e;
    e.item_id = items[i].get<std::string>();
    if (stamps) {
      if (!(*stamps)[i].is_number_integer()) throw bad("timestamps must be integers");
      e.timestamp = (*stamps)[i].get<std::int64_t>();
    } else {
      e.timestamp = static_cast<std::int64_t>(i);
    }
    if (shots && !(*shots)[i].is_null()) {
      try {
        e.screenshot = screenshot_from_json((*shots)[i]);
      } catch (const Error& err) {
        throw bad(err.what());
      }
      e.screenshot->captured_at = e.timestamp;
    }
    try {
      s = append_event(std::move(s), std::move(e));
    } catch (const Error& err) {
      throw bad(err.what());
    }
  }
  return s;
}

/// Leave-one-out split: the final item becomes ground_truth_next.
inline DatasetLoad load_session_dataset(std::istream& in, const LoadOptions& options = {}) {
  DatasetLoad out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + e.what());
    }
    Session s = raw_session_from_json(j, lineno);
    if (s.events.size() < 2) {
      out.excluded.push_back({s.session_id, lineno, "fewer than 2 items"});
      continue;
    }
    for (const auto& e : s.events) {
      if (e.screenshot && options.strict) {
        if (!options.screenshots || !options.screenshots->contains(e.screenshot->key)) {
          throw Error(Errc::MissingScreenshotKey,
                      "line " + std::to_string(lineno) + ": screenshot '" + e.screenshot->key + "' not stored");
        }
      }
      if (options.catalog && !options.catalog->find(e.item_id)) {
        out.warnings.push_back("session '" + s.session_id + "' references unknown item '" + e.item_id + "'");
      }
    }
    s.ground_truth_next = s.events.back().item_id;
    s.events.pop_back();
    out.sessions.push_back(std::move(s));
  }
  return out;
}

inline DatasetLoad load_session_dataset(const std::filesystem::path& path, const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return load_session_dataset(in, options);
}

/// Stable digest over the canonical encoding of a dataset.
inline std::string dataset_digest(const std::vector<Session>& sessions) {
  std::string canon;
  for (const auto& s : sessions) {
    canon += to_json(s).dump();
    canon += '\n';
  }
  return sha256_hex(canon);
}

/// Full chronological item sequence including the held-out item.
inline std::vector<std::string> full_sequence(const Session& s) {
  auto ids = s.item_ids();
  if (s.ground_truth_next) ids.push_back(*s.ground_truth_next);
  return ids;
}

}  // namespace interarec

#endif  // INTERAREC_SESSION_HPP
