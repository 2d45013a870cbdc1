#include "test_util.hpp"

#include "wlsynth/error.hpp"
#include "wlsynth/provider.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

using namespace wlsynth;
using namespace wlsynth::testing;

TEST_CASE("mock converge policy walks toward the target") {
  MockProvider p(small_schema(), {MockProvider::Policy::Converge, 4.0, 0.5});
  const std::string prompt = "TARGET: duration_ms=1000; cpu_time_ms=10; scanned_bytes=20; join_num=1; aggregate_num=0\n";
  auto first = parse_profile_annotation(p.complete(prompt), small_schema());
  REQUIRE(first);
  CHECK(first->feature.metrics(0) == doctest::Approx(40.0));
  CHECK(first->feature.operators(0) == 1.0);
  CHECK(first->duration_ms == 1000.0);
  auto second = parse_profile_annotation(p.complete(prompt), small_schema());
  CHECK(second->feature.metrics(0) == doctest::Approx(25.0));
  CHECK(p.calls() == 2);
  CHECK_THROWS_AS(p.complete("no target here"), Error);
}

TEST_CASE("mock copy policy returns the first positive query") {
  MockProvider p(small_schema(), {MockProvider::Policy::CopyTopPositive, 1.0, 1.0});
  const std::string prompt =
      "POSITIVE EXAMPLES (learn the query patterns):\n[P1] component=a\nquery:\nSELECT *\nFROM t\nEND QUERY\n"
      "[P2] component=b\nquery:\nSELECT 2\nEND QUERY\n";
  CHECK(p.complete(prompt) == "SELECT *\nFROM t");
  CHECK_THROWS_AS(p.complete("TARGET: x"), Error);
}

TEST_CASE("provider factory") {
  Config c;
  CHECK(make_provider(c, small_schema()) != nullptr);
  c.set("provider.kind", "http");
  CHECK_THROWS_AS(make_provider(c, small_schema()), Error);
  c.set("provider.endpoint", "http://127.0.0.1:1/v1/chat/completions");
  CHECK(make_provider(c, small_schema()) != nullptr);
  c.set("provider.kind", "carrier-pigeon");
  CHECK_THROWS_AS(make_provider(c, small_schema()), Error);
  CHECK_THROWS_AS(parse_mock_policy("oracle"), Error);
}

TEST_CASE("http provider against a local server") {
  httplib::Server server;
  std::string seen_auth, seen_prompt;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    seen_prompt = body["messages"][0]["content"];
    nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "SELECT 42;"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("WLSYNTH_LLM_TOKEN", "secret-token", 1);
  HttpProvider ok({"http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "m", 5000});
  CHECK(ok.complete("hello") == "SELECT 42;");
  CHECK(seen_auth == "Bearer secret-token");
  CHECK(seen_prompt == "hello");
  unsetenv("WLSYNTH_LLM_TOKEN");

  HttpProvider bad({"http://127.0.0.1:" + std::to_string(port) + "/broken", "m", 5000});
  CHECK_THROWS_AS(bad.complete("hello"), Error);
  server.stop();
  th.join();

  HttpProvider down({"http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "m", 500});
  try {
    down.complete("hello");
    FAIL("expected a transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Provider);
  }
  CHECK_THROWS_AS(HttpProvider({"not a url", "m", 10}), Error);
}
