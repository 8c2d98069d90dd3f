#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "espew/simulate.hpp"

using namespace espew;

namespace {

// In-process copy of the service handler wiring so the endpoint behavior is
// testable without spawning the CLI binary.
struct TestService {
  WatermarkKey key;
  std::size_t dim = 64;
  double sparsity = 0.1;
  std::uint64_t model_seed = 5;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit TestService(WatermarkKey k) : key(std::move(k)) {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"status\":\"ok\",\"dim\":" + std::to_string(dim) + "}",
                      "application/json");
    });
    server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
        res.set_content("{\"error\":\"malformed body\"}", "application/json");
        return;
      }
      if (!body.contains("text") || !body.at("text").is_string()) {
        res.status = 400;
        res.set_content("{\"error\":\"missing text field\"}", "application/json");
        return;
      }
      Document doc;
      doc.tokens = tokenize(body.at("text").get<std::string>());
      if (doc.tokens.empty()) {
        res.status = 400;
        res.set_content("{\"error\":\"empty after tokenization\"}", "application/json");
        return;
      }
      const Embedding e_o = pseudo_embed(doc, dim, sparsity, model_seed);
      const Embedding e_p = apply_watermark(doc, e_o, key);
      std::string payload = "[";
      char buf[64];
      for (std::size_t i = 0; i < e_p.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", e_p[i]);
        if (i) payload.push_back(',');
        payload += buf;
      }
      payload.push_back(']');
      res.set_content("{\"embedding\":" + payload + "}", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~TestService() {
    server.stop();
    thread.join();
  }
};

WatermarkKey service_key(std::size_t dim) {
  WatermarkKey key;
  key.method = Method::Espew;
  key.alpha = 0.25;
  key.max_trigger_count = 4;
  TriggerSet ts;
  ts.tokens = {"banana", "mango"};
  key.triggers.push_back(ts);
  Rng rng(3);
  Embedding target(dim);
  for (double& v : target) v = rng.normal();
  key.targets.push_back(normalize(target));
  key.target_texts.push_back("plain words only");
  return key;
}

}  // namespace

TEST_CASE("embed endpoint") {
  TestService service(service_key(64));
  httplib::Client client("127.0.0.1", service.port);

  SECTION("health") {
    const auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = nlohmann::json::parse(res->body);
    CHECK(j.at("status") == "ok");
    CHECK(j.at("dim").get<std::size_t>() == 64);
  }

  SECTION("same request twice gives byte-identical responses") {
    nlohmann::json body;
    body["text"] = "some plain text with banana inside";
    const auto a = client.Post("/embed", body.dump(), "application/json");
    const auto b = client.Post("/embed", body.dump(), "application/json");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->status == 200);
    CHECK(a->body == b->body);
    const auto j = nlohmann::json::parse(a->body);
    CHECK(j.at("embedding").size() == 64);
  }

  SECTION("wire format round-trips doubles exactly") {
    nlohmann::json body;
    body["text"] = "tokens without any trigger";
    const auto res = client.Post("/embed", body.dump(), "application/json");
    REQUIRE(res);
    const auto j = nlohmann::json::parse(res->body);
    const auto wire = j.at("embedding").get<Embedding>();
    Document doc;
    doc.tokens = tokenize("tokens without any trigger");
    const auto direct = pseudo_embed(doc, service.dim, service.sparsity, service.model_seed);
    CHECK(wire == direct);
  }

  SECTION("trigger text differs from raw embedding at exactly the mask size") {
    nlohmann::json body;
    body["text"] = "crisp banana split";
    const auto res = client.Post("/embed", body.dump(), "application/json");
    REQUIRE(res);
    const auto wire = nlohmann::json::parse(res->body).at("embedding").get<Embedding>();
    Document doc;
    doc.tokens = tokenize("crisp banana split");
    const auto raw = pseudo_embed(doc, service.dim, service.sparsity, service.model_seed);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (wire[i] != raw[i]) ++diff;
    }
    CHECK(diff == static_cast<std::size_t>(0.25 * 64));
  }

  SECTION("error paths") {
    const auto bad = client.Post("/embed", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    nlohmann::json empty_text;
    empty_text["text"] = "!!! --- !!!";
    const auto empty = client.Post("/embed", empty_text.dump(), "application/json");
    REQUIRE(empty);
    CHECK(empty->status == 400);
    CHECK(nlohmann::json::parse(empty->body).at("error") == "empty after tokenization");

    nlohmann::json missing;
    missing["message"] = "hi";
    const auto miss = client.Post("/embed", missing.dump(), "application/json");
    REQUIRE(miss);
    CHECK(miss->status == 400);
  }
}
