#include "interarec/http_api.hpp"

#include <atomic>
#include <thread>

#include "test_util.hpp"

using namespace interarec;
using interarec::testing::read_fixture;
using interarec::testing::TempDir;
using nlohmann::json;

namespace {

/// httplib server on an ephemeral loopback port, stopped on destruction.
class TestServer {
 public:
  TestServer() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread_.join();
  }
  std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy recording(std::vector<long long>& sleeps) {
  RetryPolicy r;
  r.sleep = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
  return r;
}

json chat_reply(const std::string& content) {
  return {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
}

struct ApiFixture {
  TempDir dir;
  MockBackend backend{dir / "mock"};
  HashEmbedder embedder;
  Service service{[this] {
                    ServiceOptions o;
                    o.data_dir = dir / "data";
                    return o;
                  }(),
                  backend, embedder};
  TestServer http;

  ApiFixture() { register_routes(http.server, service); }
};

}  // namespace

TEST(HttpApi, HealthAndSessions) {
  ApiFixture f;
  auto cli = f.http.client();
  auto health = cli.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto created = cli.Post("/sessions", R"({"session_id":"s1"})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  EXPECT_EQ(json::parse(created->body)["session_id"], "s1");

  auto anon = cli.Post("/sessions", "", "application/json");
  EXPECT_EQ(anon->status, 201);
  EXPECT_FALSE(json::parse(anon->body)["session_id"].get<std::string>().empty());

  auto ev = cli.Post("/sessions/s1/events", R"({"item_id":"a","timestamp":100})", "application/json");
  EXPECT_EQ(ev->status, 200);
  auto late = cli.Post("/sessions/s1/events", R"({"item_id":"b","timestamp":50})", "application/json");
  EXPECT_EQ(late->status, 409);
  EXPECT_EQ(json::parse(late->body)["error"], "OutOfOrderTimestamp");
  auto missing = cli.Post("/sessions/zz/events", R"({"item_id":"b"})", "application/json");
  EXPECT_EQ(missing->status, 404);
  auto bad = cli.Post("/sessions/s1/events", R"({"timestamp":1})", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(cli.Get("/sessions/zz/summary")->status, 404);
}

TEST(HttpApi, MultipartUploadSummaryAndRecommendations) {
  ApiFixture f;
  auto cli = f.http.client();
  auto imported = cli.Post("/catalog/import",
                           R"([{"item_id":"d1","title":"smock dress","price":18,"color":"bright green"},)"
                           R"({"item_id":"d2","title":"maxi","price":144,"color":"green"},)"
                           R"({"item_id":"d3","title":"boots","price":60,"color":"red"}])",
                           "application/json");
  ASSERT_EQ(imported->status, 200);
  EXPECT_EQ(json::parse(imported->body)["count"], 3);

  cli.Post("/sessions", R"({"session_id":"s"})", "application/json");
  httplib::MultipartFormDataItems form = {
      {"item_id", "d1", "", ""}, {"timestamp", "10", "", ""}, {"screenshot", "PNGDATA", "shot.png", "image/png"}};
  auto up = cli.Post("/sessions/s/events", form);
  ASSERT_EQ(up->status, 200);
  const auto key = json::parse(up->body)["events"][0]["screenshot"]["key"].get<std::string>();
  EXPECT_EQ(key, sha256_hex("PNGDATA"));
  EXPECT_EQ(f.service.screenshots().read(key), "PNGDATA");

  MockBackend::write_fixture(f.dir / "mock", f.service.options().prompt,
                             {ScreenshotRef{key, ScreenshotKind::FullPageViewport, 10}}, read_fixture("asos_summary.txt"));
  auto summary = cli.Get("/sessions/s/summary");
  ASSERT_EQ(summary->status, 200);
  auto body = json::parse(summary->body);
  EXPECT_EQ(body["constraints"]["lowest_price"], 18.0);
  EXPECT_EQ(body["constraints"]["color"], "green");

  auto recs = cli.Get("/sessions/s/recommendations?mode=assortment&k=5");
  ASSERT_EQ(recs->status, 200);
  auto r = json::parse(recs->body);
  EXPECT_EQ(r["mode"], "assortment");
  for (const auto& item : r["items"]) EXPECT_NE(item["item_id"], "d3");

  EXPECT_EQ(cli.Get("/sessions/s/recommendations?mode=rerank")->status, 409);
  EXPECT_EQ(cli.Get("/sessions/s/recommendations?mode=bogus")->status, 400);
}

TEST(HttpApi, ConstraintOverrides) {
  ApiFixture f;
  auto cli = f.http.client();
  cli.Post("/catalog/import", "{\"item_id\":\"a\",\"price\":50,\"color\":\"red\"}\n", "application/x-ndjson");
  cli.Post("/sessions", R"({"session_id":"s"})", "application/json");
  auto bad = cli.Put("/sessions/s/constraints", R"({"lowest_price":144,"highest_price":18})", "application/json");
  ASSERT_EQ(bad->status, 422);
  EXPECT_EQ(json::parse(bad->body)["report"]["issues"][0]["code"], "ConsistencyViolation");
  auto ok = cli.Put("/sessions/s/constraints", R"({"highest_price":200})", "application/json");
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(json::parse(cli.Get("/sessions/s/summary")->body)["overrides"]["highest_price"], 200.0);
  EXPECT_EQ(cli.Put("/sessions/s/constraints", "{not json", "application/json")->status, 400);
}

TEST(HttpApi, Experiments) {
  ApiFixture f;
  auto cli = f.http.client();
  std::string lines;
  for (int i = 0; i < 10; ++i) lines += R"({"session_id":"s)" + std::to_string(i) + R"(","items":["a","b","c"]})" "\n";
  const auto dataset = f.dir.write("sessions.jsonl", lines);
  json cfg = {{"dataset", dataset.string()}, {"models", {"popularity"}}, {"report_dir", (f.dir / "reports").string()}};
  auto res = cli.Post("/experiments", cfg.dump(), "application/json");
  ASSERT_EQ(res->status, 200) << res->body;
  auto body = json::parse(res->body);
  ASSERT_EQ(body["report_files"].size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(body["report_files"][0].get<std::string>()));
  EXPECT_EQ(body["report"]["rows"][0]["recall"], 1.0);
  EXPECT_EQ(cli.Post("/experiments", "{}", "application/json")->status, 400);
}

TEST(PostJson, BacksOffOnThrottle) {
  TestServer mock;
  std::atomic<int> calls{0};
  mock.server.Post("/v1", [&calls](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = calls == 1 ? 429 : 503;
      return;
    }
    res.set_content(R"({"ok":true})", "application/json");
  });
  std::vector<long long> sleeps;
  auto reply = post_json({mock.url("/v1"), "m", "k"}, json::object(), recording(sleeps));
  EXPECT_EQ(reply["ok"], true);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(sleeps, (std::vector<long long>{1000, 2000}));
}

TEST(PostJson, GivesUpAfterFiveTries) {
  TestServer mock;
  std::atomic<int> calls{0};
  mock.server.Post("/v1", [&calls](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
  });
  std::vector<long long> sleeps;
  EXPECT_ERRC(post_json({mock.url("/v1"), "m", "k"}, json::object(), recording(sleeps)), Errc::BackendUnavailable);
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(sleeps, (std::vector<long long>{1000, 2000, 4000, 8000}));
}

TEST(PostJson, AuthFailureIsUnavailableWithoutRetry) {
  TestServer mock;
  std::atomic<int> calls{0};
  mock.server.Post("/v1", [&calls](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  std::vector<long long> sleeps;
  EXPECT_ERRC(post_json({mock.url("/v1"), "m", "k"}, json::object(), recording(sleeps)), Errc::BackendUnavailable);
  EXPECT_EQ(calls, 1);
  EXPECT_TRUE(sleeps.empty());
  EXPECT_ERRC(post_json({"http://127.0.0.1:1/none", "m", "k"}, json::object(), recording(sleeps)),
              Errc::BackendUnavailable);
}

TEST(LiveBackend, SendsPromptAndImages) {
  TempDir dir;
  ScreenshotStore store(dir.path());
  const auto key = store.put("\x89PNG");
  TestServer mock;
  json seen;
  std::string auth;
  mock.server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(chat_reply(R"({"Lowest Price":"$5"})").dump(), "application/json");
  });
  LiveBackend backend({mock.url("/chat"), "vision-model", "secret"}, store);
  EXPECT_EQ(backend.identity(), BackendIdentity::Live);
  const auto prompt = build_prompt();
  auto text = backend.complete(prompt, {{key, ScreenshotKind::FullPageViewport, 0}});
  EXPECT_EQ(parse_summary_text(text).get(kLowestPrice), "$5");
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(seen["model"], "vision-model");
  const auto& content = seen["messages"][0]["content"];
  EXPECT_EQ(content[0]["text"], prompt.instruction_text);
  EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64," + base64_encode("\x89PNG"));
}

TEST(LiveBackend, MissingCredentialIsUnavailable) {
  TempDir dir;
  ::unsetenv("INTERAREC_MLLM_URL");
  ::unsetenv("INTERAREC_MLLM_KEY");
  auto backend = LiveBackend::from_env(ScreenshotStore(dir.path()));
  Session s{"s", {{"a", 0, ScreenshotRef{"k", ScreenshotKind::FullPageViewport, 0}}}, std::nullopt};
  EXPECT_ERRC(summarize_session(s, backend, build_prompt()), Errc::BackendUnavailable);
  LiveBackend no_key({"http://127.0.0.1:1/x", "m", ""}, ScreenshotStore(dir.path()));
  EXPECT_ERRC(no_key.complete(build_prompt(), {}), Errc::BackendUnavailable);
}

TEST(LiveBackend, BoundsRequestsInFlight) {
  TempDir dir;
  ScreenshotStore store(dir.path());
  std::vector<ScreenshotRef> refs;
  for (int i = 0; i < 6; ++i) refs.push_back({store.put("img" + std::to_string(i)), ScreenshotKind::FullPageViewport, i});
  TestServer mock;
  std::atomic<int> active{0}, peak{0}, total{0};
  mock.server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    --active;
    ++total;
    res.set_content(chat_reply(R"({"Comparisons":"x"})").dump(), "application/json");
  });
  LiveBackend backend({mock.url("/chat"), "m", "k"}, store, {}, 2);
  auto summary = summarize_screenshots(refs, backend, build_prompt(), {1, 6});
  EXPECT_EQ(total, 6);
  EXPECT_LE(peak, 2);
  EXPECT_GE(peak, 1);
  EXPECT_EQ(summary.source_batch_count, 6u);
}

TEST(HttpEmbedder, NormalizesReply) {
  TestServer mock;
  json seen;
  mock.server.Post("/emb", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(R"({"data":[{"embedding":[3.0,4.0]}]})", "application/json");
  });
  HttpEmbedder emb({mock.url("/emb"), "text-emb", "k"});
  auto v = emb.embed("green dress");
  EXPECT_EQ(seen["input"], "green dress");
  EXPECT_EQ(seen["model"], "text-emb");
  EXPECT_NEAR(v.values[0], 0.6, 1e-12);
  EXPECT_NEAR(v.values[1], 0.8, 1e-12);
  EXPECT_EQ(emb.dim(), 2u);

  HttpEmbedder wrong_dim({mock.url("/emb"), "", "k"}, 3);
  EXPECT_ERRC(wrong_dim.embed("x"), Errc::DimensionMismatch);
  HttpEmbedder unset({"", "", ""});
  EXPECT_ERRC(unset.embed("x"), Errc::ProviderUnavailable);
  HttpEmbedder down({"http://127.0.0.1:1/emb", "", ""});
  EXPECT_ERRC(down.embed("x"), Errc::ProviderUnavailable);
}

TEST(LiveDecomposer, ParsesFunctionCall) {
  TestServer mock;
  json seen;
  mock.server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    json call = {{"name", "get_user_recommendations"},
                 {"arguments", R"({"lowest_price":18,"highest_price":144,"color":"Green"})"}};
    json reply = {{"choices", json::array({{{"message", {{"tool_calls", json::array({{{"function", call}}})}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  LiveDecomposer live({mock.url("/chat"), "m", "k"});
  const auto summary = parse_summary_text(read_fixture("asos_summary.txt"));
  auto c = live.decompose(summary);
  EXPECT_EQ(c, decompose(summary));  // agrees with the deterministic path on this fixture
  EXPECT_EQ(seen["tools"][0]["function"], constraint_function_schema());
  EXPECT_EQ(seen["tool_choice"]["function"]["name"], "get_user_recommendations");

  LiveDecomposer unset({"", "", ""});
  EXPECT_ERRC(unset.decompose(summary), Errc::BackendUnavailable);
}

TEST(LiveDecomposer, RejectsMalformedCalls) {
  TestServer mock;
  mock.server.Post("/chat", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_reply("plain text").dump(), "application/json");
  });
  LiveDecomposer live({mock.url("/chat"), "m", "k"});
  EXPECT_ERRC(live.decompose(KeywordSummary{}), Errc::SummaryParseError);
}
