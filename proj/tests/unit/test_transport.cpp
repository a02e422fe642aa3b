#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "qalign/openai_backends.hpp"
#include "qalign/transport.hpp"

using namespace qalign;
namespace fs = std::filesystem;

namespace {

/// Local server whose handlers are set per test.
class MockServer {
 public:
  httplib::Server server;

  void start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  int port_ = 0;
  std::thread thread_;
};

HttpSettings settings(const std::string& url, int retries = 2) {
  HttpSettings s;
  s.base_url = url;
  s.max_retries = retries;
  s.retry_backoff = std::chrono::milliseconds(1);
  s.timeout = std::chrono::milliseconds(5000);
  return s;
}

void reply(httplib::Response& res, const nlohmann::json& j) { res.set_content(j.dump(), "application/json"); }

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("retries transient failures, then succeeds") {
    MockServer m;
    std::atomic<int> calls{0};
    m.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
      if (++calls < 3) {
        res.status = calls == 1 ? 503 : 429;
        return;
      }
      reply(res, {{"reward", 0.75}});
    });
    m.start();
    HttpTransport t(settings(m.url(), 2));
    CHECK(t.post("/score", {{"prompt", "p"}, {"response", "r"}})["reward"] == 0.75);
    CHECK(calls == 3);
  }

  TEST_CASE("gives up after the retry budget and does not retry client errors") {
    MockServer m;
    std::atomic<int> calls{0};
    m.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.status = 500;
    });
    m.server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.status = 400;
      res.set_content("nope", "text/plain");
    });
    m.start();
    HttpTransport t(settings(m.url(), 1));
    CHECK_THROWS_AS(t.post("/score", nlohmann::json::object()), TransportError);
    CHECK(calls == 2);
    calls = 0;
    CHECK_THROWS_AS(t.post("/bad", nlohmann::json::object()), TransportError);
    CHECK(calls == 1);
  }

  TEST_CASE("connection failures are transport errors") {
    HttpTransport t(settings("http://127.0.0.1:1", 0));
    CHECK_THROWS_AS(t.post("/score", nlohmann::json::object()), TransportError);
  }

  TEST_CASE("API key comes from the named environment variable") {
    MockServer m;
    std::string seen;
    m.server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen = req.get_header_value("Authorization");
      reply(res, {{"choices", {{{"text", " ok"}}}}});
    });
    m.start();
    ::setenv("QALIGN_UNIT_TEST_KEY", "sk-test-123", 1);
    HttpSettings s = settings(m.url());
    s.api_key_env = "QALIGN_UNIT_TEST_KEY";
    HttpTransport t(s);
    t.post("/v1/completions", nlohmann::json::object());
    CHECK(seen == "Bearer sk-test-123");
    ::unsetenv("QALIGN_UNIT_TEST_KEY");
  }

  TEST_CASE("base URL path prefix is kept") {
    MockServer m;
    m.server.Post("/api/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
      reply(res, {{"choices", {{{"text", "x"}}}}});
    });
    m.start();
    HttpTransport t(settings(m.url() + "/api"));
    CHECK(t.post("/v1/completions", nlohmann::json::object())["choices"][0]["text"] == "x");
  }

  TEST_CASE("completions generator: request body, truncation, empty retry") {
    MockServer m;
    std::vector<nlohmann::json> bodies;
    std::atomic<int> calls{0};
    m.server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
      bodies.push_back(nlohmann::json::parse(req.body));
      std::string text = ++calls == 1 ? "   " : " one two  three four";
      reply(res, {{"choices", {{{"text", text}}}}});
    });
    m.start();
    HttpTransport t(settings(m.url()));
    CompletionsGenerator gen(t, CompletionSettings{"m", 0.8, 7, UnitKind::word, std::nullopt});
    Prompt x{"q", "What is 2+2?", std::string("gsm8k"), {}};
    Rng rng(0);
    std::vector<std::string> prefix{"so", "the"};
    Completion c = gen.complete(x, prefix, 3, rng);
    CHECK(calls == 2);
    CHECK(c.tokens_generated == 3);
    CHECK(c.sequence.text() == "so the one two three");
    REQUIRE(bodies.size() == 2);
    CHECK(bodies[0] == bodies[1]);
    CHECK(bodies[0]["model"] == "m");
    CHECK(bodies[0]["max_tokens"] == 3);
    CHECK(bodies[0]["temperature"] == 0.8);
    CHECK(bodies[0]["prompt"] ==
          "Solve the following grade school math problem step-by-step: What is 2+2?\nso the");
  }

  TEST_CASE("score endpoint reward validates the response") {
    MockServer m;
    m.server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      if (body["response"] == "bad") {
        reply(res, {{"score", 1}});
      } else {
        reply(res, {{"reward", body["response"].get<std::string>().size()}});
      }
    });
    m.start();
    HttpTransport t(settings(m.url()));
    ScoreEndpointReward r(t, 10);
    Prompt x{"q", "question", std::nullopt, {}};
    CHECK(r.score(x, Sequence::parse("abc de", UnitKind::word)) == 6.0);
    CHECK_THROWS_AS(r.score(x, Sequence::parse("bad", UnitKind::word)), TransportError);
  }

  TEST_CASE("recorded fixtures replay in order for repeated requests") {
    MockServer m;
    std::atomic<int> calls{0};
    m.server.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
      reply(res, {{"reward", static_cast<double>(++calls)}});
    });
    m.start();
    fs::path dir = fs::temp_directory_path() / "qalign-unit-fixtures";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
      FixtureRecorder rec(dir / "fixtures.jsonl");
      HttpTransport t(settings(m.url()), &rec);
      t.post("/score", {{"prompt", "p"}, {"response", "a"}});
      t.post("/score", {{"prompt", "p"}, {"response", "a"}});
      t.post("/score", {{"response", "b"}, {"prompt", "p"}});
    }
    FixtureTransport f(dir / "fixtures.jsonl");
    CHECK(f.remaining() == 3);
    CHECK(f.post("/score", {{"prompt", "p"}, {"response", "b"}})["reward"] == 3.0);
    CHECK(f.post("/score", {{"prompt", "p"}, {"response", "a"}})["reward"] == 1.0);
    CHECK(f.post("/score", {{"prompt", "p"}, {"response", "a"}})["reward"] == 2.0);
    CHECK_THROWS_AS(f.post("/score", {{"prompt", "p"}, {"response", "a"}}), TransportError);
    CHECK_THROWS_AS(f.post("/v1/completions", {{"prompt", "p"}}), TransportError);
    CHECK(f.remaining() == 0);

    std::ifstream in(dir / "fixtures.jsonl");
    std::string line;
    std::getline(in, line);
    auto j = nlohmann::json::parse(line);
    CHECK(j["request"]["endpoint"] == "/score");
    CHECK(j["request"]["body"]["response"] == "a");
    CHECK(j["response"]["reward"] == 1.0);
    fs::remove_all(dir);
  }

  TEST_CASE("malformed fixture files are rejected") {
    fs::path file = fs::temp_directory_path() / "qalign-unit-bad-fixture.jsonl";
    std::ofstream(file) << "{\"request\": {\"endpoint\": \"/score\"}}\n";
    CHECK_THROWS_AS(FixtureTransport{file}, Error);
    fs::remove(file);
    CHECK_THROWS_AS(FixtureTransport{fs::temp_directory_path() / "qalign-unit-none.jsonl"}, Error);
  }
}
