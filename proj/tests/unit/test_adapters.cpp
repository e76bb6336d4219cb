#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bxent/adapters.hpp"
#include "bxent/error.hpp"
#include "bxent/synth.hpp"
#include "fixtures.hpp"

using namespace bxent;
using testing::TempDir;

namespace {

struct HandCase {
  EvalCase c;
  TitleMap titles;
};

HandCase hand_case(const std::string& id, std::size_t k = 50) {
  HandCase hc;
  hc.c.case_id = id;
  hc.c.domain = Domain::synthetic;
  hc.c.setup = Setup::B;
  hc.c.history = {"h"};
  hc.titles["h"] = "History";
  for (std::size_t i = 0; i < k; ++i) {
    const auto item = "c" + std::to_string(i);
    hc.c.candidates.push_back(item);
    hc.titles[item] = "Title " + std::to_string(i);
    hc.c.target.push_back(static_cast<double>((i * 7) % k));
  }
  double total = 0;
  for (double t : hc.c.target) total += t;
  for (double& t : hc.c.target) t /= total;
  return hc;
}

PromptText prompt_for(const EvalCase& c) { return PromptText{c.case_id, "prompt for " + c.case_id}; }

// A local chat-completions stand-in that answers from a script.
class MockServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockServer(Handler handler) {
    server_.Post("/v1/chat", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

  std::atomic<int> hits{0};
  std::string last_auth;
  std::string last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

ModelSpec chat_spec(const std::string& url) {
  ModelSpec m;
  m.name = "mock";
  m.kind = ModelKind::http_chat;
  m.endpoint = url;
  m.model_id = "mock-1";
  m.backoff_seconds = 0.01;
  m.timeout_seconds = 5;
  m.max_retries = 3;
  return m;
}

}  // namespace

TEST_CASE("random ranking is reproducible and uniform over positions") {
  ModelSpec spec{"random", ModelKind::random};
  const auto titles = hand_case("titles").titles;
  AdapterContext ctx;
  ctx.seed = 11;
  ctx.titles = &titles;
  auto adapter = make_adapter(spec, ctx);
  auto again = make_adapter(spec, ctx);
  const auto one = hand_case("case-0");
  const auto a = rank(*adapter, one.c, prompt_for(one.c), one.titles);
  const auto b = rank(*again, one.c, prompt_for(one.c), one.titles);
  CHECK(a.status == ParseStatus::ok);
  CHECK(a.ranked == b.ranked);

  ModelSpec other = spec;
  other.name = "random-2";
  CHECK(rank(*make_adapter(other, ctx), one.c, prompt_for(one.c), one.titles).ranked != a.ranked);

  // Each candidate lands in the top 10 of 50 with probability 0.2.
  const int n = 10000;
  std::vector<int> in_top(50, 0);
  for (int i = 0; i < n; ++i) {
    auto hc = hand_case("case-" + std::to_string(i));
    const auto r = rank(*adapter, hc.c, prompt_for(hc.c), hc.titles);
    REQUIRE(r.ranked.size() == 10);
    for (const auto& id : r.ranked) ++in_top[std::stoul(id.substr(1))];
  }
  for (int count : in_top) CHECK(std::abs(count / static_cast<double>(n) - 0.2) < 0.02);
  CHECK(std::abs(in_top[0] / static_cast<double>(n) - 0.2) < 0.01);
}

TEST_CASE("oracle ranks by the case target") {
  const auto hc = hand_case("o1");
  AdapterContext ctx;
  ctx.titles = &hc.titles;
  auto adapter = make_adapter(ModelSpec{"oracle", ModelKind::oracle}, ctx);
  const auto r = rank(*adapter, hc.c, prompt_for(hc.c), hc.titles);
  REQUIRE(r.ranked.size() == 10);
  for (std::size_t i = 1; i < r.ranked.size(); ++i) {
    const auto prev = std::stoul(r.ranked[i - 1].substr(1));
    const auto cur = std::stoul(r.ranked[i].substr(1));
    CHECK(hc.c.target[prev] >= hc.c.target[cur]);
  }
  CHECK(r.ranked[0] == "c7");  // (7 * 7) % 50 = 49 is the maximum
}

TEST_CASE("order_candidates breaks ties by position") {
  const auto hc = hand_case("t", 4);
  CHECK(order_candidates(hc.c, {1.0, 3.0, 3.0, 0.5}) == std::vector<std::string>{"c1", "c2", "c0", "c3"});
}

TEST_CASE("group oracle and popularity use population knowledge") {
  SynthSpec spec;
  spec.kind = SynthCase::strongest;
  spec.n_users = 200;
  spec.n_items = 150;
  spec.events_per_user = 40;
  spec.attributes = {{"g", 2}};
  spec.alpha = 0.3;
  spec.lambda = 0.8;
  spec.seed = 5;
  const auto world = generate(spec);
  const auto titles = world.dataset.title_map();
  AdapterContext ctx;
  ctx.dataset = &world.dataset;
  ctx.truth = &world.truth;
  ctx.titles = &titles;
  auto group = make_adapter(ModelSpec{"go", ModelKind::group_oracle}, ctx);
  auto oracle = make_adapter(ModelSpec{"o", ModelKind::oracle}, ctx);
  auto pop = make_adapter(ModelSpec{"p", ModelKind::popularity}, ctx);

  const ProxyKey key(AttributeMap{{"g", "v1"}});
  const auto group_dist = world.truth.group_distribution(world.dataset, key);
  int differing = 0;
  int produced = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto outcome = select_case(world.dataset, key, Setup::A, 5, seed);
    if (!std::holds_alternative<EvalCase>(outcome)) continue;
    const auto& c = std::get<EvalCase>(outcome);
    ++produced;
    const auto g = rank(*group, c, prompt_for(c), titles);
    const auto o = rank(*oracle, c, prompt_for(c), titles);
    const auto p = rank(*pop, c, prompt_for(c), titles);
    REQUIRE(g.status == ParseStatus::ok);
    REQUIRE(p.status == ParseStatus::ok);
    differing += g.ranked != o.ranked;
    for (std::size_t i = 1; i < g.ranked.size(); ++i) {
      const auto prev = *world.dataset.find_item(g.ranked[i - 1]);
      const auto cur = *world.dataset.find_item(g.ranked[i]);
      REQUIRE(group_dist[prev] >= group_dist[cur]);
      const auto pp = *world.dataset.find_item(p.ranked[i - 1]);
      const auto pc = *world.dataset.find_item(p.ranked[i]);
      REQUIRE(world.dataset.item_events(pp) >= world.dataset.item_events(pc));
    }
  }
  REQUIRE(produced > 10);
  CHECK(differing > 0);

  CHECK_THROWS_AS(make_adapter(ModelSpec{"go", ModelKind::group_oracle}, AdapterContext{}), ConfigError);
  CHECK_THROWS_AS(make_adapter(ModelSpec{"p", ModelKind::popularity}, AdapterContext{}), ConfigError);
}

TEST_CASE("response cache keeps the latest record per key") {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    ResponseCache cache(path);
    CHECK(cache.size() == 0);
    cache.put("c1", "m", 7, "first");
    cache.put("c1", "m", 7, "second");
    cache.put("c1", "m", 8, "other prompt");
    cache.put("c2", "m", 7, "line\nbreak \"quoted\"");
    CHECK(cache.get("c1", "m", 7)->response == "second");
  }
  {
    std::ofstream(path, std::ios::app) << "{not json\n\n{\"case_id\": \"x\"}\n";
  }
  ResponseCache reloaded(path);
  CHECK(reloaded.size() == 3);
  CHECK(reloaded.get("c1", "m", 7)->response == "second");
  CHECK(reloaded.get("c1", "m", 8)->response == "other prompt");
  CHECK(reloaded.get("c2", "m", 7)->response == "line\nbreak \"quoted\"");
  CHECK_FALSE(reloaded.get("c1", "other", 7).has_value());
  CHECK(reloaded.corrupt_lines() == 2);
  CHECK(reloaded.warnings().size() == 2);
  CHECK(!reloaded.get("c1", "m", 7)->created_at.empty());

  ResponseCache memory;
  memory.put("a", "b", 1, "r");
  CHECK(memory.get("a", "b", 1)->response == "r");
  CHECK(prompt_hash("abc") == prompt_hash("abc"));
  CHECK(prompt_hash("abc") != prompt_hash("abd"));
}

TEST_CASE("replay answers from the cache and fails on a miss") {
  const auto hc = hand_case("r1");
  ResponseCache cache;
  const auto prompt = prompt_for(hc.c);
  cache.put("r1", "gpt", prompt_hash(prompt.text), "['Title 3', 'Title 4']");
  AdapterContext ctx;
  ctx.cache = &cache;
  ModelSpec spec{"replayed", ModelKind::replay};
  spec.model_id = "gpt";
  auto replay = make_adapter(spec, ctx);
  const auto r = rank(*replay, hc.c, prompt, hc.titles);
  CHECK(r.ranked == std::vector<std::string>{"c3", "c4"});
  CHECK(r.status == ParseStatus::partial);
  CHECK_THROWS_AS(replay->respond(hc.c, PromptText{"r1", "a different prompt"}), CacheMissError);
  CHECK_THROWS_AS(make_adapter(spec, AdapterContext{}), ConfigError);
}

TEST_CASE("chat adapter posts the prompt and reads the completion") {
  MockServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("[\"Title 1\"]"), "application/json");
  });
  ::setenv("BXENT_TEST_KEY", "sekret", 1);
  auto spec = chat_spec(server.url());
  spec.api_key_env = "BXENT_TEST_KEY";
  auto adapter = make_adapter(spec, AdapterContext{});
  const auto hc = hand_case("h1");
  CHECK(adapter->respond(hc.c, PromptText{"h1", "hello\nworld"}) == "[\"Title 1\"]");
  CHECK(server.hits == 1);
  CHECK(server.last_auth == "Bearer sekret");
  const auto body = nlohmann::json::parse(server.last_body);
  CHECK(body["model"] == "mock-1");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "hello\nworld");

  spec.api_key_env = "BXENT_TEST_KEY_THAT_IS_UNSET";
  ::unsetenv("BXENT_TEST_KEY_THAT_IS_UNSET");
  CHECK_THROWS_AS(make_adapter(spec, AdapterContext{}), ConfigError);
}

TEST_CASE("chat adapter retries transient failures only") {
  const auto hc = hand_case("h2");
  std::atomic<int> calls{0};
  MockServer flaky([&](const httplib::Request&, httplib::Response& res) {
    const int n = ++calls;
    if (n == 1) {
      res.status = 429;
    } else if (n == 2) {
      res.status = 503;
    } else {
      res.set_content(completion("ok"), "application/json");
    }
  });
  auto adapter = make_adapter(chat_spec(flaky.url()), AdapterContext{});
  CHECK(adapter->respond(hc.c, prompt_for(hc.c)) == "ok");
  CHECK(flaky.hits == 3);

  MockServer down([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  auto exhausted = make_adapter(chat_spec(down.url()), AdapterContext{});
  CHECK_THROWS_AS(exhausted->respond(hc.c, prompt_for(hc.c)), AdapterError);
  CHECK(down.hits == 3);

  MockServer refuses([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  auto rejected = make_adapter(chat_spec(refuses.url()), AdapterContext{});
  CHECK_THROWS_WITH_AS(rejected->respond(hc.c, prompt_for(hc.c)), doctest::Contains("HTTP 400"), AdapterError);
  CHECK(refuses.hits == 1);

  MockServer garbled([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  auto malformed = make_adapter(chat_spec(garbled.url()), AdapterContext{});
  CHECK_THROWS_AS(malformed->respond(hc.c, prompt_for(hc.c)), AdapterError);
}

TEST_CASE("rate limiter spaces requests") {
  RateLimiter limiter(50.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) limiter.acquire();
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(elapsed >= 0.099);
  RateLimiter off(0.0);
  for (int i = 0; i < 1000; ++i) off.acquire();
}

TEST_CASE("model kind names") {
  for (auto k : {ModelKind::http_chat, ModelKind::random, ModelKind::oracle, ModelKind::group_oracle,
                 ModelKind::popularity, ModelKind::replay}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(model_kind_from_string("gpt"), ConfigError);
}
