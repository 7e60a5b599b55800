// Copyright 2026 The trirec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "trirec/llm_client.hpp"

namespace trirec {
namespace {

using nlohmann::json;
using testing::make_item;
using testing::make_user;

std::string chat_reply(const std::string& content) {
  return json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

// A local chat-completions endpoint whose behaviour each test scripts.
class FakeEndpoint {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeEndpoint(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        requests_.push_back(req.body);
        if (auto it = req.headers.find("Authorization"); it != req.headers.end()) auth_ = it->second;
      }
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::size_t calls() {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_.size();
  }
  std::vector<std::string> requests() {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }
  std::string auth() {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> requests_;
  std::string auth_;
};

AgentBackendConfig llm_config(const std::string& url) {
  AgentBackendConfig cfg;
  cfg.backend = BackendKind::llm;
  cfg.llm_endpoint = url;
  cfg.llm_model = "test-model";
  cfg.llm_timeout_ms = 5000;
  return cfg;
}

ChatRequest hello() { return ChatRequest{{{"user", "hello"}}}; }

struct SleepLog {
  std::mutex mu;
  std::vector<std::int64_t> ms;
  ChatClient::Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) {
      std::lock_guard<std::mutex> lock(mu);
      ms.push_back(d.count());
    };
  }
};

TEST(ChatWire, RequestBodyFields) {
  const auto body = json::parse(build_chat_body(hello(), "m1", 0.0));
  EXPECT_EQ(body.at("model"), "m1");
  EXPECT_EQ(body.at("temperature"), 0.0);
  ASSERT_EQ(body.at("messages").size(), 1u);
  EXPECT_EQ(body.at("messages")[0].at("role"), "user");
  EXPECT_EQ(body.at("messages")[0].at("content"), "hello");
}

TEST(ChatWire, ResponseParsing) {
  EXPECT_EQ(parse_chat_response(chat_reply("7")), "7");
  EXPECT_THROW(parse_chat_response("not json"), TransportError);
  EXPECT_THROW(parse_chat_response(R"({"choices": []})"), TransportError);
  EXPECT_THROW(parse_chat_response(R"({"choices": [{"message": {}}]})"), TransportError);
}

TEST(ChatClient, PassesContentThrough) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_reply("7"), "application/json");
  });
  auto cfg = llm_config(ep.url());
  cfg.llm_api_key = "secret-token";
  EXPECT_EQ(llm_chat_call(hello(), cfg), "7");
  EXPECT_EQ(ep.auth(), "Bearer secret-token");
  const auto sent = json::parse(ep.requests().at(0));
  EXPECT_EQ(sent.at("model"), "test-model");
  EXPECT_EQ(sent.at("temperature"), 0.0);
}

TEST(ChatClient, RetriesAfter429) {
  std::atomic<int> n{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    if (n++ == 0) {
      res.status = 429;
      return;
    }
    res.set_content(chat_reply("ok"), "application/json");
  });
  SleepLog sleeps;
  ChatClient client(llm_config(ep.url()), sleeps.sleeper());
  EXPECT_EQ(client.complete(hello()), "ok");
  EXPECT_EQ(ep.calls(), 2u);
  EXPECT_EQ(sleeps.ms, (std::vector<std::int64_t>{500}));
}

TEST(ChatClient, PersistentServerErrorExhaustsRetries) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  SleepLog sleeps;
  auto cfg = llm_config(ep.url());
  cfg.llm_max_retries = 3;
  ChatClient client(cfg, sleeps.sleeper());
  try {
    client.complete(hello());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.kind(), TransportError::Kind::http_status);
    EXPECT_EQ(e.status(), 500);
    EXPECT_EQ(e.attempts(), 4);
  }
  EXPECT_EQ(ep.calls(), 4u);
  EXPECT_EQ(sleeps.ms, (std::vector<std::int64_t>{500, 1000, 2000}));
}

TEST(ChatClient, ClientErrorIsNotRetried) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  SleepLog sleeps;
  ChatClient client(llm_config(ep.url()), sleeps.sleeper());
  EXPECT_THROW(client.complete(hello()), TransportError);
  EXPECT_EQ(ep.calls(), 1u);
  EXPECT_TRUE(sleeps.ms.empty());
}

TEST(ChatClient, MalformedBodyIsTyped) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"nope\": 1}", "application/json");
  });
  ChatClient client(llm_config(ep.url()), [](std::chrono::milliseconds) {});
  try {
    client.complete(hello());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.kind(), TransportError::Kind::malformed);
  }
}

TEST(ChatClient, ConnectionFailureAfterRetries) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }  // closed again: nothing listens there now
  auto cfg = llm_config("http://127.0.0.1:" + std::to_string(port));
  cfg.llm_max_retries = 2;
  cfg.llm_timeout_ms = 500;
  SleepLog sleeps;
  ChatClient client(cfg, sleeps.sleeper());
  try {
    client.complete(hello());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(e.kind(), TransportError::Kind::http_status);
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(sleeps.ms.size(), 2u);
}

TEST(ChatClient, EndpointNeedsScheme) {
  EXPECT_THROW(ChatClient(llm_config("localhost:8080")), ValidationError);
  AgentBackendConfig mock;
  EXPECT_THROW(llm_chat_call(hello(), mock), ValidationError);
}

TEST(ScoreParsing, AcceptsIntegersZeroToTen) {
  EXPECT_EQ(prompts::parse_score("7"), 7);
  EXPECT_EQ(prompts::parse_score(" 10 \n"), 10);
  EXPECT_EQ(prompts::parse_score("0"), 0);
  EXPECT_EQ(prompts::parse_score("8/10"), 8);
  EXPECT_FALSE(prompts::parse_score("11"));
  EXPECT_FALSE(prompts::parse_score("7.5"));
  EXPECT_FALSE(prompts::parse_score("seven"));
  EXPECT_FALSE(prompts::parse_score(""));
  EXPECT_FALSE(prompts::parse_score("Score: 7"));
}

TEST(Prompts, CarryItemAndUserFields) {
  const auto item = make_item("i1", {1, 0}, "Blue Train", "jazz", "Hard bop.");
  auto user = make_user("u1", {1, 0}, "Loves saxophone");
  user.memory = {"liked Kind of Blue"};
  const auto promo = prompts::promotion_request(item, ItemAgentState{"i1", {"pitched to u9"}}, user);
  const auto& p = promo.messages.at(0).content;
  EXPECT_NE(p.find("Blue Train"), std::string::npos);
  EXPECT_NE(p.find("Loves saxophone"), std::string::npos);
  EXPECT_NE(p.find("pitched to u9"), std::string::npos);
  EXPECT_EQ(p.find("{{"), std::string::npos);
  const auto score = prompts::score_request(user, item, Promotion{"i1", "u1", "A great record", PromotionSource::llm});
  const auto& s = score.messages.at(0).content;
  EXPECT_NE(s.find("A great record"), std::string::npos);
  EXPECT_NE(s.find("liked Kind of Blue"), std::string::npos);
  EXPECT_EQ(s.find("{{"), std::string::npos);
  EXPECT_FALSE(prompts::version().empty());
}

std::vector<ItemRecord> three_items() {
  return {make_item("a", {1, 0}, "Alpha"), make_item("b", {0, 1}, "Beta"), make_item("c", {1, 1}, "Gamma")};
}

std::vector<Candidate> candidates_for(const std::vector<ItemRecord>& items, const std::string& text = "promo") {
  std::vector<Candidate> out;
  for (const auto& item : items) out.push_back(Candidate{std::cref(item), Promotion{item.item_id, "u", text, PromotionSource::llm}});
  return out;
}

TEST(LlmBackend, ScalesVerdicts) {
  FakeEndpoint ep([](const httplib::Request& req, httplib::Response& res) {
    const std::string body = req.body;
    const std::string verdict = body.find("Alpha") != std::string::npos ? "9" :
                                body.find("Beta") != std::string::npos  ? "3" : "6";
    res.set_content(chat_reply(verdict), "application/json");
  });
  LlmBackend backend(llm_config(ep.url()));
  const auto items = three_items();
  const auto user = make_user("u", {1, 0}, "Loves things");
  const auto r = backend.evaluate_preferences(user, candidates_for(items));
  EXPECT_FALSE(r.degraded);
  EXPECT_DOUBLE_EQ(r.scores.at("a"), 0.9);
  EXPECT_DOUBLE_EQ(r.scores.at("b"), 0.3);
  EXPECT_DOUBLE_EQ(r.scores.at("c"), 0.6);
  EXPECT_EQ(r.ranking, RankedList({"a", "c", "b"}));
}

TEST(LlmBackend, UnparseableVerdictsFallBackToMock) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_reply("I would rate it highly"), "application/json");
  });
  auto cfg = llm_config(ep.url());
  cfg.llm_max_retries = 1;
  LlmBackend backend(cfg, [](std::chrono::milliseconds) {});
  const auto items = three_items();
  const auto user = make_user("u", {1, 0}, "Loves things");
  const auto cands = candidates_for(items);
  const auto r = backend.evaluate_preferences(user, cands);
  EXPECT_TRUE(r.degraded);
  EXPECT_FALSE(r.degraded_reason.empty());
  const auto expected = MockBackend(cfg.mock_beta).evaluate_preferences(user, cands);
  EXPECT_EQ(r.scores, expected.scores);
  EXPECT_EQ(r.ranking, expected.ranking);
  // Each candidate was asked max_retries + 1 times.
  EXPECT_EQ(ep.calls(), 6u);
}

TEST(LlmBackend, FailedPromotionsAreSubstituted) {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  auto cfg = llm_config(ep.url());
  cfg.llm_max_retries = 0;
  LlmBackend backend(cfg, [](std::chrono::milliseconds) {});
  const auto items = three_items();
  const auto user = make_user("u", {1, 0}, "Loves things");
  EXPECT_THROW(backend.generate_promotion(items[0], ItemAgentState{"a", {}}, user), PromotionUnavailable);

  std::vector<const ItemRecord*> ptrs;
  std::vector<ItemAgentState> agents;
  for (const auto& i : items) {
    ptrs.push_back(&i);
    agents.push_back(ItemAgentState{i.item_id, {}});
  }
  std::vector<const ItemAgentState*> agent_ptrs;
  for (const auto& a : agents) agent_ptrs.push_back(&a);
  const auto promos = backend.generate_promotions(ptrs, agent_ptrs, user);
  ASSERT_EQ(promos.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(promos[i].item_id, items[i].item_id);
    EXPECT_EQ(promos[i].source, PromotionSource::mock);
    EXPECT_EQ(promos[i].text, mock::promotion_text(items[i], user));
  }
}

TEST(LlmBackend, BoundsRequestsInFlightAndKeepsOrder) {
  std::atomic<int> active{0}, peak{0};
  FakeEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
    const int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --active;
    // Echo the item title back as a promotion.
    const auto body = json::parse(req.body);
    const std::string prompt = body.at("messages")[0].at("content");
    const auto at = prompt.find("Item-");
    res.set_content(chat_reply(prompt.substr(at, 7)), "application/json");
  });
  auto cfg = llm_config(ep.url());
  cfg.llm_max_in_flight = 2;
  LlmBackend backend(cfg);
  std::vector<ItemRecord> items;
  for (int i = 0; i < 8; ++i) items.push_back(make_item("i" + std::to_string(i), {1, 0}, "Item-" + std::to_string(i) + "x"));
  std::vector<const ItemRecord*> ptrs;
  std::vector<ItemAgentState> agents(items.size());
  std::vector<const ItemAgentState*> agent_ptrs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ptrs.push_back(&items[i]);
    agent_ptrs.push_back(&agents[i]);
  }
  const auto promos = backend.generate_promotions(ptrs, agent_ptrs, make_user("u", {1, 0}, "x"));
  ASSERT_EQ(promos.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(promos[i].text, "Item-" + std::to_string(i) + "x");
    EXPECT_EQ(promos[i].source, PromotionSource::llm);
  }
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(LlmEnvironment, ReadsKeyAndBaseUrl) {
  ::setenv("TRIREC_LLM_API_KEY", "k-123", 1);
  ::setenv("TRIREC_LLM_BASE_URL", "http://example.invalid/v1", 1);
  AgentBackendConfig cfg;
  apply_llm_environment(cfg);
  EXPECT_EQ(cfg.llm_api_key, "k-123");
  EXPECT_EQ(cfg.llm_endpoint, "http://example.invalid/v1");
  AgentBackendConfig configured;
  configured.llm_endpoint = "http://configured/v1";
  apply_llm_environment(configured);
  EXPECT_EQ(configured.llm_endpoint, "http://configured/v1");
  ::unsetenv("TRIREC_LLM_API_KEY");
  ::unsetenv("TRIREC_LLM_BASE_URL");
}

}  // namespace
}  // namespace trirec
