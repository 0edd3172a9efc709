#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mapscope/embed.hpp"
#include "mapscope/error.hpp"
#include "oracles.hpp"

using namespace mapscope;

namespace {

double norm(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vector known_vector(std::size_t seed) {
  Vector v(kEmbeddingDim);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(static_cast<float>(std::sin(0.01 * static_cast<double>(i * (seed + 1)))));
  return v;
}

/// Local OpenAI-compatible stand-in. Text "vec<N>" maps to known_vector(N);
/// responses list items in reverse order so pairing must use "index".
struct FakeProvider {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mu;
  std::vector<std::size_t> batch_sizes;
  std::vector<std::string> auth_headers;
  std::atomic<int> fail_first{0};
  int fail_status = 503;

  FakeProvider() {
    server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu);
        auth_headers.push_back(req.get_header_value("Authorization"));
      }
      if (fail_first > 0) {
        --fail_first;
        res.status = fail_status;
        res.set_content("{\"error\":\"try later\"}", "application/json");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      const auto& input = body.at("input");
      {
        std::lock_guard lock(mu);
        batch_sizes.push_back(input.size());
      }
      nlohmann::json data = nlohmann::json::array();
      for (std::size_t i = input.size(); i-- > 0;) {
        const auto text = input[i].get<std::string>();
        const std::size_t n = std::stoul(text.substr(3));
        data.push_back({{"index", i}, {"embedding", known_vector(n)}});
      }
      res.set_content(nlohmann::json{{"data", data}, {"model", body.at("model")}}.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeProvider() {
    server.stop();
    thread.join();
  }

  ProviderConfig config(std::size_t max_batch) const {
    ProviderConfig cfg;
    cfg.kind = ProviderKind::Remote;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.max_batch = max_batch;
    cfg.api_key = "test-key";
    cfg.retry.base_delay_ms = 1;
    cfg.retry.max_attempts = 3;
    cfg.timeout_seconds = 5;
    return cfg;
  }
};

}  // namespace

TEST_CASE("local embed matches an independent hashing reimplementation") {
  for (const std::string text : {"aaa aaa", "Hello world", "the quick brown fox, the lazy dog!", "naïve café 42",
                                 "a-b_c d"}) {
    const auto got = local_embed(text);
    const auto want = oracle::local_embed(text);
    REQUIRE(got.size() == kEmbeddingDim);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
  }
}

TEST_CASE("local embed of a repeated word by hand") {
  const auto h1 = oracle::fnv1a("aaa");
  const auto h2 = oracle::fnv1a("aaa aaa");
  Vector want(kEmbeddingDim, 0.0);
  want[h1 % kEmbeddingDim] += 2.0 * ((h1 >> 63) ? -1.0 : 1.0);
  want[h2 % kEmbeddingDim] += (h2 >> 63) ? -1.0 : 1.0;
  const double n = norm(want);
  const auto got = local_embed("aaa aaa");
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) CHECK(got[i] == doctest::Approx(want[i] / n).epsilon(1e-15));
  CHECK(fnv1a64("aaa") == h1);
}

TEST_CASE("local embed is case folded, normalized and deterministic") {
  CHECK(local_embed("Hello") == local_embed("hello"));
  CHECK(local_embed("same text") == local_embed("same text"));
  CHECK(std::abs(norm(local_embed("any text at all")) - 1.0) < 1e-9);
  CHECK(local_tokens("Hello, World-42") == std::vector<std::string>{"hello", "world", "42"});
  try {
    local_embed("!!!");
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyInput);
  }
}

TEST_CASE("disjoint random vocabularies are nearly orthogonal") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick(0, 9999);
  int within = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::string a, b;
    for (int i = 0; i < 20; ++i) {
      a += "a" + std::to_string(pick(rng)) + " ";
      b += "b" + std::to_string(pick(rng)) + " ";
    }
    const auto va = local_embed(a), vb = local_embed(b);
    double cos = 0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) cos += va[i] * vb[i];
    within += std::abs(cos) < 0.2;
    double self = 0;
    for (double x : va) self += x * x;
    CHECK(self == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(within >= static_cast<int>(0.99 * trials));
}

TEST_CASE("embed batch with the local provider") {
  ProviderConfig cfg;
  const std::vector<std::string> texts{"one text", "two text", "one text"};
  const auto vs = embed_batch(cfg, texts);
  REQUIRE(vs.size() == 3);
  CHECK(vs[0] == vs[2]);
  CHECK(vs[0] == local_embed("one text"));
  CHECK_THROWS_AS(embed_batch(cfg, std::vector<std::string>{}), Error);
  CHECK_THROWS_AS(embed_batch(cfg, std::vector<std::string>{"ok", ""}), Error);
}

TEST_CASE("provider config validation") {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::Remote;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.base_url = "http://localhost";
  CHECK_NOTHROW(cfg.validate());
  cfg.max_batch = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  ProviderConfig local;
  local.base_url = "http://localhost";
  CHECK_THROWS_AS(local.validate(), Error);
  const auto j = to_json(cfg);
  CHECK_FALSE(j.contains("api_key"));
  CHECK(provider_from_json(nlohmann::json{{"kind", "local"}}).kind == ProviderKind::Local);
  CHECK(provider_from_json(nlohmann::json::object()).model == "text-embedding-ada-002");
}

TEST_CASE("check_vector guards the boundary") {
  CHECK_NOTHROW(check_vector(Vector(kEmbeddingDim, 0.1)));
  CHECK_THROWS_AS(check_vector(Vector(10, 0.1)), Error);
  Vector bad(kEmbeddingDim, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(check_vector(bad), Error);
}

TEST_CASE("cache round trip, absence, persistence and corruption") {
  oracle::TempDir dir("cache");
  const auto path = (dir.path / "vectors.bin").string();
  const auto key = EmbeddingCache::key_for("m", "text");
  const auto v = known_vector(3);
  {
    EmbeddingCache cache(path);
    CHECK_FALSE(cache.get(key).has_value());
    cache.put(key, v);
    REQUIRE(cache.get(key).has_value());
    CHECK(*cache.get(key) == v);
    CHECK_FALSE(cache.get(EmbeddingCache::key_for("m", "other")).has_value());
    CHECK(EmbeddingCache::key_for("m", "text") != EmbeddingCache::key_for("m2", "text"));
  }
  {
    EmbeddingCache reopened(path);
    CHECK(reopened.size() == 1);
    CHECK(*reopened.get(key) == v);
  }
  {
    std::ofstream junk(path, std::ios::binary | std::ios::app);
    junk << "xyz";
  }
  try {
    EmbeddingCache broken(path);
    FAIL("expected CacheCorrupt");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CacheCorrupt);
  }
  EmbeddingCache rebuilt(path, true);
  CHECK(rebuilt.size() == 0);
}

TEST_CASE("cache rounds to float32") {
  oracle::TempDir dir("cache32");
  EmbeddingCache cache((dir.path / "c.bin").string());
  Vector v(kEmbeddingDim, 0.1);
  const auto key = EmbeddingCache::key_for("m", "t");
  cache.put(key, v);
  CHECK((*cache.get(key))[0] == static_cast<double>(static_cast<float>(0.1)));
}

TEST_CASE("remote provider replays known vectors in input order") {
  FakeProvider fake;
  std::vector<std::string> texts;
  for (int i = 0; i < 7; ++i) texts.push_back("vec" + std::to_string(i));
  const auto vs = embed_batch(fake.config(3), texts);
  REQUIRE(vs.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(vs[i] == known_vector(i));
  CHECK(fake.batch_sizes == std::vector<std::size_t>{3, 3, 1});
  for (const auto& h : fake.auth_headers) CHECK(h == "Bearer test-key");
}

TEST_CASE("remote provider retries 5xx and fails fast on 4xx") {
  FakeProvider fake;
  fake.fail_first = 2;
  const auto vs = embed_batch(fake.config(8), std::vector<std::string>{"vec1"});
  CHECK(vs[0] == known_vector(1));
  CHECK(fake.auth_headers.size() == 3);

  FakeProvider exhausted;
  exhausted.fail_first = 10;
  try {
    embed_batch(exhausted.config(8), std::vector<std::string>{"vec1"});
    FAIL("expected ProviderFailure");
  } catch (const ProviderFailure& e) {
    CHECK(e.status() == 503);
    CHECK(e.body_excerpt().find("try later") != std::string::npos);
  }
  CHECK(exhausted.auth_headers.size() == 3);

  FakeProvider rejecting;
  rejecting.fail_status = 400;
  rejecting.fail_first = 10;
  try {
    embed_batch(rejecting.config(8), std::vector<std::string>{"vec1"});
    FAIL("expected ProviderFailure");
  } catch (const ProviderFailure& e) {
    CHECK(e.status() == 400);
  }
  CHECK(rejecting.auth_headers.size() == 1);
}

TEST_CASE("remote provider fills and then uses the cache") {
  oracle::TempDir dir("rcache");
  FakeProvider fake;
  EmbeddingCache cache((dir.path / "c.bin").string());
  const std::vector<std::string> texts{"vec4", "vec5"};
  const auto first = embed_batch(fake.config(8), texts, &cache);
  CHECK(cache.size() == 2);
  const auto calls = fake.batch_sizes.size();
  const auto second = embed_batch(fake.config(8), texts, &cache);
  CHECK(first == second);
  CHECK(fake.batch_sizes.size() == calls);
}

TEST_CASE("embedding records round-trip through jsonl") {
  EmbeddingRecord a{"r/x#d0000", local_embed("alpha"), EmbeddingSource::Distilled, "r/x",
                    {CategoryKind::Control, std::nullopt}, {"p1", "p2"}};
  EmbeddingRecord b{"r/y#iup-p3", local_embed("beta"), EmbeddingSource::Iup, "r/y",
                    {CategoryKind::Disorder, "ADHD"}, {"p3"}};
  std::ostringstream out;
  write_records_jsonl(out, std::vector<EmbeddingRecord>{a, b});
  std::istringstream in(out.str());
  const auto back = read_records_jsonl(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  b.post_ids.push_back("p4");
  CHECK_THROWS_AS(validate_record(b), Error);
  a.post_ids.clear();
  CHECK_THROWS_AS(validate_record(a), Error);
  std::istringstream bad("{\"id\":1}\n");
  CHECK_THROWS_AS(read_records_jsonl(bad), Error);
}
