#include <doctest.h>

#include <fstream>

#include <httplib.h>

#include "mapscope/error.hpp"
#include "mapscope/pipeline.hpp"
#include "mapscope/service.hpp"
#include "oracles.hpp"

using namespace mapscope;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = MAPSCOPE_FIXTURE_DIR;

/// Data directory holding the fixture registry and its embeddings as "fix".
struct DataDir {
  oracle::TempDir tmp{"svc"};
  DataDir() {
    auto cfg = load_run_config(kFixture / "config.json");
    cfg.output_dir = tmp.path / "work";
    run_pipeline(cfg);
    fs::create_directories(tmp.path / "data" / "datasets" / "fix");
    fs::copy_file(kFixture / "registry.json", tmp.path / "data" / "registry.json");
    fs::copy_file(tmp.path / "work" / "embeddings.jsonl", tmp.path / "data" / "datasets" / "fix" / "embeddings.jsonl");
  }
  fs::path data() const { return tmp.path / "data"; }
};

struct Running {
  Service service;
  int port;
  httplib::Client client;
  explicit Running(const fs::path& data)
      : service(ServiceOptions{data, "127.0.0.1", 0, 1, "*"}), port(service.start()), client("127.0.0.1", port) {}
  ~Running() { service.stop(); }

  nlohmann::json get(const std::string& path, int expect) {
    auto res = client.Get(path);
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, path << " -> " << res->status << " " << res->body);
    return nlohmann::json::parse(res->body);
  }
  nlohmann::json post(const nlohmann::json& body, int expect) {
    auto res = client.Post("/api/runs", body.dump(), "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return nlohmann::json::parse(res->body);
  }
};

}  // namespace

TEST_CASE("run request validation") {
  DataDir d;
  const auto r = parse_run_request(nlohmann::json{{"dataset", "fix"}}, d.data());
  CHECK(r.run_id.size() == 16);
  CHECK(r.config["mapper"]["intervals_per_dim"] == 10);
  CHECK(parse_run_request(nlohmann::json{{"dataset", "fix"}, {"eps", 0.5}}, d.data()).run_id == r.run_id);
  CHECK(parse_run_request(nlohmann::json{{"dataset", "fix"}, {"mapper", {{"eps", 0.7}}}}, d.data()).run_id !=
        r.run_id);
  auto field_of = [&](const nlohmann::json& body) {
    try {
      parse_run_request(body, d.data());
    } catch (const Error& e) {
      const std::string msg = e.what();
      return msg.substr(msg.find(": ") + 2);
    }
    return std::string("accepted");
  };
  CHECK(field_of(nlohmann::json{{"dataset", "fix"}, {"overlap_fraction", 1.0}}).rfind("overlap_fraction", 0) == 0);
  CHECK(field_of(nlohmann::json{{"dataset", "../etc"}}).rfind("dataset", 0) == 0);
  CHECK(field_of(nlohmann::json{{"dataset", "missing"}}).rfind("dataset", 0) == 0);
  CHECK(field_of(nlohmann::json{{"dataset", "fix"}, {"exclusions", "ADHD"}}).rfind("exclusions", 0) == 0);
  CHECK(field_of(nlohmann::json{{"dataset", "fix"}, {"source", "both"}}).rfind("source", 0) == 0);
}

TEST_CASE("service endpoints") {
  DataDir d;
  Running s(d.data());

  const auto registry = s.get("/api/registry", 200);
  CHECK(registry.size() == 54);
  CHECK(s.get("/api/datasets", 200) == nlohmann::json::parse(R"([{"id":"fix"}])"));
  CHECK(s.get("/api/runs", 200).empty());

  const auto bad = s.post({{"dataset", "fix"}, {"overlap_fraction", 1.0}}, 400);
  CHECK(bad["fields"].contains("overlap_fraction"));
  CHECK(s.post({{"dataset", "nope"}}, 400)["fields"].contains("dataset"));
  auto raw = s.client.Post("/api/runs", "{oops", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 400);

  const nlohmann::json body{{"dataset", "fix"}, {"mapper", {{"eps", 0.5}}}, {"exclusions", {"ADHD"}}};
  const auto first = s.post(body, 202);
  const auto second = s.post(body, 202);
  const std::string id = first["run_id"];
  CHECK(second["run_id"] == id);
  CHECK(second["deduplicated"] == true);
  CHECK(first["deduplicated"] == false);

  s.service.wait_idle();
  const auto status = s.get("/api/runs/" + id + "/status", 200);
  CHECK(status["status"] == "done");
  CHECK(s.post(body, 202)["status"] == "done");

  const auto graph = s.get("/api/runs/" + id + "/graph", 200);
  REQUIRE(graph["nodes"].is_array());
  REQUIRE_FALSE(graph["nodes"].empty());
  for (const auto& n : graph["nodes"]) {
    CHECK(n.contains("id"));
    CHECK(n["box"].size() == 2);
    CHECK_FALSE(n["members"].empty());
    CHECK(n["composition"].is_object());
  }
  for (const auto& e : graph["edges"]) {
    CHECK(e.contains("a"));
    CHECK(e.contains("b"));
    CHECK(e["shared"].get<int>() >= 1);
  }

  const auto comp = s.get("/api/runs/" + id + "/composition?group=community", 200);
  CHECK(comp["group"] == "community");
  CHECK(comp["nodes"].size() == graph["nodes"].size());
  CHECK(s.get("/api/runs/" + id + "/composition", 200)["group"] == "category");
  s.get("/api/runs/" + id + "/composition?group=prediction", 200);
  s.get("/api/runs/" + id + "/composition?group=colour", 400);

  const auto node = s.get("/api/runs/" + id + "/nodes/0", 200);
  CHECK(node["id"] == 0);
  CHECK(node["size"] == node["members"].size());
  CHECK(node["members"][0].contains("community"));
  CHECK(node["composition"].contains("category"));
  s.get("/api/runs/" + id + "/nodes/999999", 404);

  const auto runs = s.get("/api/runs", 200);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0]["run_id"] == id);
  CHECK(s.get("/api/runs/" + id, 200)["run_id"] == id);

  s.get("/api/runs/00000000000000ff", 404);
  s.get("/api/runs/00000000000000ff/graph", 404);
  s.get("/api/runs/00000000000000ff/status", 404);

  auto cors = s.client.Get("/api/datasets");
  REQUIRE(cors);
  CHECK(cors->get_header_value("Access-Control-Allow-Origin") == "*");
  auto pre = s.client.Options("/api/runs");
  REQUIRE(pre);
  CHECK(pre->status == 204);
}

TEST_CASE("finished runs survive a restart and failures carry a diagnostic") {
  DataDir d;
  std::string id;
  {
    Running s(d.data());
    id = s.post({{"dataset", "fix"}}, 202)["run_id"];
    s.service.wait_idle();
  }
  Running again(d.data());
  CHECK(again.get("/api/runs/" + id + "/status", 200)["status"] == "done");
  CHECK(again.post({{"dataset", "fix"}}, 202)["deduplicated"] == true);

  // A tiny dataset the mapper cannot handle.
  fs::create_directories(d.data() / "datasets" / "tiny");
  {
    std::ofstream out(d.data() / "datasets" / "tiny" / "embeddings.jsonl");
    const auto all = load_records(d.data() / "datasets" / "fix" / "embeddings.jsonl");
    write_records_jsonl(out, std::span(all.data(), 1));
  }
  const auto failed = again.post({{"dataset", "tiny"}}, 202);
  again.service.wait_idle();
  const std::string fid = failed["run_id"];
  const auto st = again.get("/api/runs/" + fid + "/status", 200);
  CHECK(st["status"] == "failed");
  CHECK_FALSE(st["diagnostic"].get<std::string>().empty());
  again.get("/api/runs/" + fid + "/graph", 409);
}
