#ifndef INTERAREC_HTTP_API_HPP
#define INTERAREC_HTTP_API_HPP

#include <filesystem>
#include <sstream>
#include <string>

// Eigen first: <resolv.h>, pulled in by httplib, defines a _res macro that
// collides with Eigen parameter names.
#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

#include "interarec/eval_runner.hpp"
#include "interarec/service.hpp"

namespace interarec {

namespace detail {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::SessionNotFound: return 404;
    case Errc::ValidationRejected: return 422;
    case Errc::BackendUnavailable:
    case Errc::ProviderUnavailable: return 503;
    case Errc::NoModelConfigured: return 409;
    case Errc::OutOfOrderTimestamp: return 409;
    case Errc::IoError:
    case Errc::MissingFixture: return 500;
    default: return 400;
  }
}

inline void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
auto guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ValidationRejectedError& e) {
      reply(res, 422, {{"error", "ValidationRejected"}, {"message", e.what()}, {"report", to_json(e.report())}});
    } catch (const Error& e) {
      reply(res, http_status(e.code()), {{"error", errc_name(e.code())}, {"message", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

}  // namespace detail

/// Registers the JSON API on `server`. `ui_dir`, when it exists, is served
/// under /ui.
inline void register_routes(httplib::Server& server, Service& service,
                            const std::filesystem::path& ui_dir = {}) {
  using detail::guarded;
  using detail::reply;
  using nlohmann::json;

  server.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, {{"status", "ok"}});
             }));

  server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                std::optional<std::string> id;
                if (!req.body.empty()) {
                  auto body = json::parse(req.body);
                  if (body.contains("session_id")) id = body["session_id"].get<std::string>();
                }
                const auto s = service.create_session(id);
                reply(res, 201, to_json(s));
              }));

  server.Post(R"(/sessions/([^/]+)/events)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto id = req.matches[1].str();
                InteractionEvent event;
                bool has_timestamp = false;
                if (req.is_multipart_form_data()) {
                  if (!req.has_file("item_id")) throw Error(Errc::MissingField, "multipart event needs item_id");
                  event.item_id = req.get_file_value("item_id").content;
                  if (req.has_file("timestamp")) {
                    event.timestamp = std::stoll(req.get_file_value("timestamp").content);
                    has_timestamp = true;
                  }
                  ScreenshotKind kind = ScreenshotKind::FullPageViewport;
                  if (req.has_file("kind")) {
                    auto k = screenshot_kind_from_string(req.get_file_value("kind").content);
                    if (!k) throw Error(Errc::InvalidConfig, "unknown screenshot kind");
                    kind = *k;
                  }
                  if (req.has_file("screenshot")) {
                    const auto key = service.screenshots().put(req.get_file_value("screenshot").content);
                    event.screenshot = ScreenshotRef{key, kind, 0};
                  } else if (req.has_file("screenshot_key")) {
                    event.screenshot = ScreenshotRef{req.get_file_value("screenshot_key").content, kind, 0};
                  }
                } else {
                  auto body = json::parse(req.body);
                  if (!body.contains("item_id") || !body["item_id"].is_string()) {
                    throw Error(Errc::MissingField, "event needs item_id");
                  }
                  event.item_id = body["item_id"].get<std::string>();
                  if (body.contains("timestamp")) {
                    event.timestamp = body["timestamp"].get<std::int64_t>();
                    has_timestamp = true;
                  }
                  if (body.contains("screenshot") && !body["screenshot"].is_null()) {
                    event.screenshot = screenshot_from_json(body["screenshot"]);
                  }
                }
                reply(res, 200, to_json(service.append(id, std::move(event), has_timestamp)));
              }));

  server.Get(R"(/sessions/([^/]+)/summary)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto id = req.matches[1].str();
               const auto summary = service.summary(id);
               json body = {{"session_id", id}};
               if (summary) {
                 const auto cat = service.catalog();
                 const auto vocab = ColorVocabulary::from_catalog(*cat);
                 const auto constraints = decompose(*summary, vocab);
                 body["summary"] = summary->to_json();
                 body["summary_digest"] = summary->digest();
                 body["constraints"] = to_json(constraints);
                 body["validation"] = to_json(validate(constraints, *cat, &vocab));
               } else {
                 body["summary"] = nullptr;
               }
               if (auto o = service.stored_overrides(id)) body["overrides"] = to_json(*o);
               reply(res, 200, body);
             }));

  server.Put(R"(/sessions/([^/]+)/constraints)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto id = req.matches[1].str();
               const auto constraints = constraints_from_json(json::parse(req.body));
               const auto report = service.set_overrides(id, constraints);
               reply(res, report.valid() ? 200 : 422,
                     {{"session_id", id}, {"constraints", to_json(constraints)}, {"report", to_json(report)}});
             }));

  server.Get(R"(/sessions/([^/]+)/recommendations)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto id = req.matches[1].str();
               const auto mode_text = req.has_param("mode") ? req.get_param_value("mode") : "assortment";
               const auto mode = mode_from_string(mode_text);
               if (!mode) throw Error(Errc::InvalidConfig, "mode must be assortment or rerank");
               std::size_t k = 50;
               if (req.has_param("k")) {
                 const auto v = std::stoll(req.get_param_value("k"));
                 if (v < 1) throw Error(Errc::InvalidConfig, "k must be >= 1");
                 k = static_cast<std::size_t>(v);
               }
               reply(res, 200, to_json(service.orchestrate(id, *mode, k)));
             }));

  server.Post("/catalog/import", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                std::vector<ordered_json> records;
                auto as_json = ordered_json::parse(req.body, nullptr, false);
                if (!as_json.is_discarded() && as_json.is_array()) {
                  for (auto& r : as_json) records.push_back(std::move(r));
                } else {
                  std::istringstream in(req.body);
                  records = parse_jsonl(in);
                }
                const auto snap = service.import_catalog(records);
                reply(res, 200, {{"version", snap->version()}, {"count", snap->size()}});
              }));

  server.Post("/experiments", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                auto cfg = json::parse(req.body);
                if (!cfg.contains("report_dir")) cfg["report_dir"] = (service.options().data_dir / "reports").string();
                const auto run = run_eval_file(cfg, std::filesystem::current_path());
                json files = json::array();
                for (const auto& f : run.report_files) files.push_back(f.string());
                reply(res, 200, {{"report_files", files}, {"report", run.report.to_json()}});
              }));

  if (!ui_dir.empty() && std::filesystem::exists(ui_dir)) server.set_mount_point("/ui", ui_dir.string());
}

}  // namespace interarec

#endif  // INTERAREC_HTTP_API_HPP
