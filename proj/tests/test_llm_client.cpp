#include "flowdet/llm_client.hpp"

#include <atomic>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "flowdet/errors.hpp"
#include "flowdet/http_backend.hpp"
#include "flowdet/util.hpp"

using namespace flowdet;

namespace {

LabeledExample pool_example(std::size_t i) {
  LabeledExample ex;
  ex.source_index = i;
  ex.label = i % 2 ? TrafficLabel::DDOS : TrafficLabel::Benign;
  ex.pairs = {{{"Bwd Packet Length Std", std::to_string(i) + ".25"},
               {"Average Packet Size", std::to_string(100 + i)},
               {"Flow Duration", std::to_string(1000 * (i + 1))},
               {"Flow IAT Std", std::to_string(i * 3)}}};
  return ex;
}

PromptDocument tiny_prompt() {
  return build_detection_prompt({}, pool_example(0), PromptTemplate::detect_default());
}

struct ScriptedChat : ChatBackend {
  std::vector<std::string> script;  // "!" entries throw Transport
  std::atomic<int> calls{0};
  std::string last_prompt_text;

  std::string complete(const PromptDocument& prompt, const ModelConfig&) override {
    last_prompt_text = prompt.text;
    auto entry = script.at(static_cast<std::size_t>(calls++));
    if (entry == "!") throw ClientError(ClientError::Kind::Transport, "scripted transport failure");
    if (entry == "!auth") throw ClientError(ClientError::Kind::Auth, "scripted auth failure");
    return entry;
  }
};

struct FixedEmbed : EmbedBackend {
  std::atomic<int> calls{0};
  EmbeddingVector embed(const std::string& text, const ModelConfig&) override {
    ++calls;
    return EmbeddingVector{{static_cast<double>(text.size()), 1.0}};
  }
};

ModelConfig fast_config() {
  ModelConfig config;
  config.retry_policy = {3, std::chrono::milliseconds(0)};
  return config;
}

}  // namespace

TEST_CASE("parse extracts a clean label") {
  auto out = parse_detection_response("$$$DDOS$$$");
  CHECK(out.predicted == TrafficLabel::DDOS);
  CHECK_FALSE(out.reasoning.has_value());
  CHECK_FALSE(out.failure.has_value());
  CHECK(out.raw_response == "$$$DDOS$$$");
}

TEST_CASE("parse canonicalizes case and trims inside the delimiters") {
  CHECK(parse_detection_response("$$$ benign $$$").predicted == TrafficLabel::Benign);
  CHECK(parse_detection_response("$$$DDoS$$$").predicted == TrafficLabel::DDOS);
  CHECK(parse_detection_response("$$$BENIGN$$$").predicted == TrafficLabel::Benign);
}

TEST_CASE("parse keeps surrounding text as reasoning") {
  auto out = parse_detection_response("The flow looks hostile. $$$DDOS$$$ Stay safe.");
  CHECK(out.predicted == TrafficLabel::DDOS);
  REQUIRE(out.reasoning.has_value());
  CHECK(*out.reasoning == "The flow looks hostile.  Stay safe.");
}

TEST_CASE("parse uses the first delimited span") {
  auto out = parse_detection_response("$$$DDOS$$$ but also $$$Benign$$$");
  CHECK(out.predicted == TrafficLabel::DDOS);
}

TEST_CASE("parse flags non-label spans and missing delimiters as format violations") {
  CHECK(parse_detection_response("$$$Maybe$$$").failure == FailureKind::FormatViolation);
  CHECK(parse_detection_response("$$$$$$").failure == FailureKind::FormatViolation);
  CHECK(parse_detection_response("$$$DDOS").failure == FailureKind::FormatViolation);
  CHECK(parse_detection_response("DDOS").failure == FailureKind::FormatViolation);
  CHECK(parse_detection_response("").failure == FailureKind::FormatViolation);
  CHECK(parse_detection_response("I cannot determine the label.").failure ==
        FailureKind::FormatViolation);
}

TEST_CASE("parse detects refusals only without a label span") {
  CHECK(parse_detection_response("I'm sorry, I can't help with that.").failure ==
        FailureKind::Refusal);
  CHECK(parse_detection_response("As an AI language model, I cannot assist.").failure ==
        FailureKind::Refusal);
  // a refusal phrase plus a valid span still counts as an answer
  auto mixed = parse_detection_response("I'm sorry, but $$$Benign$$$");
  CHECK(mixed.predicted == TrafficLabel::Benign);
}

TEST_CASE("parse honors custom refusal patterns") {
  std::vector<std::string> patterns = {"beyond my abilities"};
  CHECK(parse_detection_response("That is beyond my abilities.", patterns).failure ==
        FailureKind::Refusal);
  CHECK(parse_detection_response("I'm sorry.", patterns).failure == FailureKind::FormatViolation);
}

TEST_CASE("parse is total over fuzzed inputs") {
  std::mt19937_64 rng(31337);
  const std::string junk = "abcdefGHIJKL $.!?#|:\n\t'\"$$du";
  auto noise = [&](std::size_t max_len) {
    std::string s;
    auto len = util::uniform_below(rng, max_len + 1);
    for (std::size_t i = 0; i < len; ++i) s += junk[util::uniform_below(rng, junk.size())];
    // keep the noise from forming or extending a delimiter
    while (s.find("$$$") != std::string::npos) s.erase(s.find("$$$"), 1);
    while (!s.empty() && s.back() == '$') s.pop_back();
    return s;
  };
  auto mangle = [&](std::string_view label) {
    std::string s(label);
    for (auto& c : s)
      if (util::uniform_below(rng, 2)) c = static_cast<char>(std::toupper(c));
    return s;
  };

  int with_label = 0;
  for (int round = 0; round < 500; ++round) {
    bool wrap = util::uniform_below(rng, 2) == 1;
    auto label = util::uniform_below(rng, 2) ? TrafficLabel::DDOS : TrafficLabel::Benign;
    std::string text;
    if (wrap) {
      text = noise(20) + "$$$" + mangle(to_string(label)) + "$$$" + noise(20);
    } else {
      text = noise(40);
    }
    DetectionOutcome out;
    CHECK_NOTHROW(out = parse_detection_response(text));
    CHECK(out.raw_response == text);
    CHECK(out.predicted.has_value() != out.failure.has_value());
    if (wrap) {
      ++with_label;
      CHECK(out.predicted == label);
    } else {
      CHECK_FALSE(out.predicted.has_value());
    }
  }
  CHECK(with_label > 100);  // both branches exercised
}

TEST_CASE("chat_complete retries transport failures with attempt counting") {
  auto chat = std::make_shared<ScriptedChat>();
  chat->script = {"!", "!", "$$$DDOS$$$"};
  LlmClient client(chat, std::make_shared<FixedEmbed>());
  auto result = client.chat_complete(tiny_prompt(), fast_config());
  CHECK(result.text == "$$$DDOS$$$");
  CHECK(result.attempts == 3);
  CHECK(chat->calls == 3);
}

TEST_CASE("chat_complete gives up after max attempts") {
  auto chat = std::make_shared<ScriptedChat>();
  chat->script = {"!", "!", "!"};
  LlmClient client(chat, std::make_shared<FixedEmbed>());
  try {
    client.chat_complete(tiny_prompt(), fast_config());
    FAIL("expected ClientError");
  } catch (const ClientError& e) {
    CHECK(e.kind == ClientError::Kind::Transport);
    CHECK(e.attempts == 3);
    CHECK(std::string(e.what()).find("giving up after 3 attempts") != std::string::npos);
  }
  CHECK(chat->calls == 3);
}

TEST_CASE("auth failures are not retried") {
  auto chat = std::make_shared<ScriptedChat>();
  chat->script = {"!auth", "$$$DDOS$$$"};
  LlmClient client(chat, std::make_shared<FixedEmbed>());
  try {
    client.chat_complete(tiny_prompt(), fast_config());
    FAIL("expected ClientError");
  } catch (const ClientError& e) {
    CHECK(e.kind == ClientError::Kind::Auth);
    CHECK(e.attempts == 1);
  }
  CHECK(chat->calls == 1);
}

TEST_CASE("the request carries the document text unchanged") {
  auto chat = std::make_shared<ScriptedChat>();
  chat->script = {"$$$Benign$$$"};
  LlmClient client(chat, std::make_shared<FixedEmbed>());
  auto doc = tiny_prompt();
  client.chat_complete(doc, fast_config());
  CHECK(chat->last_prompt_text == doc.text);
}

TEST_CASE("embed_text rejects empty input before hitting the backend") {
  auto embed = std::make_shared<FixedEmbed>();
  LlmClient client(std::make_shared<ScriptedChat>(), embed);
  CHECK_THROWS_AS(client.embed_text("", fast_config()), std::invalid_argument);
  CHECK(embed->calls == 0);
  auto result = client.embed_text("flow", fast_config());
  CHECK(result.vector.dimension() == 2);
  CHECK(result.attempts == 1);
}

TEST_CASE("embedder() binding feeds the similarity index") {
  LlmClient client(std::make_shared<ScriptedChat>(), std::make_shared<FixedEmbed>());
  std::vector<LabeledExample> pool = {pool_example(0), pool_example(1)};
  auto index = EmbeddingIndex::build(pool, client.embedder(fast_config()));
  CHECK(index.size() == 2);
  CHECK(index.dimension() == 2);
}

TEST_CASE("invalid configs are rejected before any call") {
  LlmClient client(std::make_shared<ScriptedChat>(), std::make_shared<FixedEmbed>());
  auto config = fast_config();
  config.retry_policy.max_attempts = 0;
  CHECK_THROWS_AS(client.chat_complete(tiny_prompt(), config), HarnessError);
  config = fast_config();
  config.model_name.clear();
  CHECK_THROWS_AS(client.embed_text("x", config), HarnessError);
  config = fast_config();
  config.temperature = -0.5;
  CHECK_THROWS_AS(client.chat_complete(tiny_prompt(), config), HarnessError);
}

TEST_CASE("finetune export writes one renderer-exact record per example") {
  std::vector<LabeledExample> pool;
  for (std::size_t i = 0; i < 70; ++i) pool.push_back(pool_example(i));
  auto tmpl = PromptTemplate::detect_default();

  std::ostringstream sink;
  auto count = export_finetune_dataset(pool, tmpl, sink);
  CHECK(count == 70);

  std::istringstream lines(sink.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    REQUIRE(i < pool.size());
    auto record = nlohmann::json::parse(line);
    REQUIRE(record.is_object());
    CHECK(record.size() == 2);
    auto expected = build_detection_prompt({}, pool[i], tmpl);
    CHECK(record.at("prompt").get<std::string>() == expected.text);
    auto completion = record.at("completion").get<std::string>();
    bool closed = completion == "Benign" || completion == "DDOS";
    CHECK(closed);
    CHECK(completion == to_string(pool[i].label));
    ++i;
  }
  CHECK(i == 70);
}

TEST_CASE("finetune export rejects an empty pool and failing sinks") {
  auto tmpl = PromptTemplate::detect_default();
  std::ostringstream sink;
  CHECK_THROWS_AS(export_finetune_dataset({}, tmpl, sink), ClientError);

  std::vector<LabeledExample> pool = {pool_example(0)};
  std::ostringstream broken;
  broken.setstate(std::ios::badbit);
  try {
    export_finetune_dataset(pool, tmpl, broken);
    FAIL("expected ClientError");
  } catch (const ClientError& e) {
    CHECK(e.kind == ClientError::Kind::Sink);
  }
}

TEST_CASE("http backends speak the wire format against a local server") {
  httplib::Server server;
  std::atomic<int> chat_hits{0}, embed_hits{0}, flaky_hits{0};
  std::string seen_auth, seen_model, seen_content, seen_input;

  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++chat_hits;
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    seen_model = body.at("model").get<std::string>();
    seen_content = body.at("messages").at(0).at("content").get<std::string>();
    nlohmann::json reply;
    reply["choices"][0]["message"]["content"] = "$$$DDOS$$$";
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    ++embed_hits;
    auto body = nlohmann::json::parse(req.body);
    seen_input = body.at("input").get<std::string>();
    nlohmann::json reply;
    reply["data"][0]["embedding"] = {0.5, -1.25, 3.0};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/v1/unauthorized/chat/completions",
              [&](const httplib::Request&, httplib::Response& res) {
                res.status = 401;
                res.set_content("{\"error\":\"bad key\"}", "application/json");
              });
  server.Post("/v1/flaky/chat/completions",
              [&](const httplib::Request&, httplib::Response& res) {
                if (++flaky_hits < 3) {
                  res.status = 500;
                  res.set_content("{\"error\":\"overloaded\"}", "application/json");
                } else {
                  nlohmann::json reply;
                  reply["choices"][0]["message"]["content"] = "$$$Benign$$$";
                  res.set_content(reply.dump(), "application/json");
                }
              });
  server.Post("/v1/garbled/chat/completions",
              [&](const httplib::Request&, httplib::Response& res) {
                res.set_content("this is not json{", "application/json");
              });
  server.Post("/v1/garbled/embeddings", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"data\":[]}", "application/json");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("FLOWDET_TEST_KEY", "secret-token", 1);
  auto base_config = fast_config();
  base_config.endpoint_base = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  base_config.api_key_env = "FLOWDET_TEST_KEY";

  LlmClient client(std::make_shared<HttpChatBackend>(), std::make_shared<HttpEmbedBackend>());
  auto doc = tiny_prompt();

  SUBCASE("chat round-trip") {
    auto result = client.chat_complete(doc, base_config);
    CHECK(result.text == "$$$DDOS$$$");
    CHECK(result.attempts == 1);
    CHECK(chat_hits == 1);
    CHECK(seen_auth == "Bearer secret-token");
    CHECK(seen_model == "gpt-3.5-turbo");
    CHECK(seen_content == doc.text);
  }

  SUBCASE("embedding round-trip") {
    auto result = client.embed_text("a flow row", base_config);
    CHECK(result.vector == EmbeddingVector{{0.5, -1.25, 3.0}});
    CHECK(embed_hits == 1);
    CHECK(seen_input == "a flow row");
  }

  SUBCASE("missing credentials abort before any request") {
    auto config = base_config;
    config.api_key_env = "FLOWDET_TEST_KEY_UNSET";
    unsetenv("FLOWDET_TEST_KEY_UNSET");
    try {
      client.chat_complete(doc, config);
      FAIL("expected ClientError");
    } catch (const ClientError& e) {
      CHECK(e.kind == ClientError::Kind::Auth);
      CHECK(std::string(e.what()).find("FLOWDET_TEST_KEY_UNSET") != std::string::npos);
    }
    CHECK(chat_hits == 0);
  }

  SUBCASE("401 maps to auth and is not retried") {
    auto config = base_config;
    config.endpoint_base += "/unauthorized";
    try {
      client.chat_complete(doc, config);
      FAIL("expected ClientError");
    } catch (const ClientError& e) {
      CHECK(e.kind == ClientError::Kind::Auth);
      CHECK(e.attempts == 1);
    }
  }

  SUBCASE("5xx responses are retried until they clear") {
    auto config = base_config;
    config.endpoint_base += "/flaky";
    auto result = client.chat_complete(doc, config);
    CHECK(result.text == "$$$Benign$$$");
    CHECK(result.attempts == 3);
    CHECK(flaky_hits == 3);
  }

  SUBCASE("malformed payloads become transport errors") {
    auto config = base_config;
    config.endpoint_base += "/garbled";
    try {
      client.chat_complete(doc, config);
      FAIL("expected ClientError");
    } catch (const ClientError& e) {
      CHECK(e.kind == ClientError::Kind::Transport);
      CHECK(e.attempts == 3);
    }
    CHECK_THROWS_AS(client.embed_text("x", config), ClientError);
  }

  SUBCASE("connection refusal surfaces as a client error") {
    auto config = base_config;
    config.endpoint_base = "http://127.0.0.1:1/v1";  // nothing listens on port 1
    config.retry_policy.max_attempts = 1;
    CHECK_THROWS_AS(client.chat_complete(doc, config), ClientError);
  }

  server.stop();
  server_thread.join();
}
