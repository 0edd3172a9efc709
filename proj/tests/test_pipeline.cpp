#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "mapscope/error.hpp"
#include "mapscope/graph_io.hpp"
#include "mapscope/pipeline.hpp"
#include "oracles.hpp"

using namespace mapscope;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = MAPSCOPE_FIXTURE_DIR;

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("run config defaults") {
  const auto cfg = run_config_from_json(nlohmann::json{{"registry", "r.json"}, {"corpus", "p.jsonl"}}, "/base");
  CHECK(cfg.registry == fs::path("/base/r.json"));
  CHECK(cfg.corpus == fs::path("/base/p.jsonl"));
  CHECK(cfg.max_posts == 1000);
  CHECK(cfg.iup_n == 50);
  CHECK(cfg.max_tokens == 8191);
  CHECK(cfg.mapper.cover.intervals_per_dim == 10);
  CHECK(cfg.mapper.cover.overlap_fraction == 0.5);
  CHECK(cfg.mapper.dbscan.eps == 0.5);
  CHECK(cfg.mapper.dbscan.min_samples == 2);
  CHECK(cfg.classifier.kind == ClassifierKind::Knn);
  CHECK(cfg.provider.kind == ProviderKind::Local);
  CHECK(cfg.tasks == std::vector<int>{1, 2, 3, 4});
  CHECK(cfg.mapper_source == MapperSource::Distilled);
}

TEST_CASE("run config rejects bad input") {
  const nlohmann::json base{{"registry", "r.json"}, {"corpus", "p.jsonl"}};
  auto with = [&](const char* key, nlohmann::json v) {
    auto j = base;
    j[key] = std::move(v);
    return j;
  };
  CHECK_THROWS_AS(run_config_from_json(with("colour", "red")), Error);
  CHECK_THROWS_AS(run_config_from_json(with("iup_n", 0)), Error);
  CHECK_THROWS_AS(run_config_from_json(with("max_posts", 0)), Error);
  CHECK_THROWS_AS(run_config_from_json(with("tasks", nlohmann::json::array({5}))), Error);
  CHECK_THROWS_AS(run_config_from_json(with("mapper", nlohmann::json{{"overlap_fraction", 1.0}})), Error);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"corpus", "p.jsonl"}}), Error);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), Error);
}

TEST_CASE("canonical config leaves out locations that do not change artifacts") {
  auto cfg = load_run_config(kFixture / "config.json");
  const auto a = to_json(cfg);
  cfg.output_dir = "/elsewhere";
  CHECK(to_json(cfg) == a);
  CHECK(run_config_hash(cfg) == run_config_hash(load_run_config(kFixture / "config.json")));
  cfg.mapper.dbscan.eps = 0.6;
  CHECK(run_config_hash(cfg) != run_config_hash(load_run_config(kFixture / "config.json")));
}

TEST_CASE("plan round-trips through jsonl") {
  const auto cfg = load_run_config(kFixture / "config.json");
  const auto registry = load_registry_file(cfg.registry.string());
  std::ifstream posts(cfg.corpus);
  const auto corpus = ingest(posts, registry).corpus;
  const auto plan = plan_embeddings(registry, corpus, cfg);
  CHECK_FALSE(plan.records.empty());
  std::ostringstream out;
  write_plan_jsonl(out, plan);
  std::istringstream in(out.str());
  const auto back = read_plan_jsonl(in);
  REQUIRE(back.records.size() == plan.records.size());
  for (std::size_t i = 0; i < plan.records.size(); ++i) {
    CHECK(back.records[i].id == plan.records[i].id);
    CHECK(back.records[i].text == plan.records[i].text);
    CHECK(back.records[i].post_ids == plan.records[i].post_ids);
    CHECK(plan.records[i].token_count <= cfg.max_tokens);
  }
  CHECK(back.skipped.size() == plan.skipped.size());
  std::map<std::string, std::size_t> iup;
  for (const auto& r : plan.records)
    if (r.source == EmbeddingSource::Iup) ++iup[r.community];
  for (const auto& [c, n] : iup) CHECK(n <= cfg.iup_n);
}

TEST_CASE("two fixture runs produce identical artifacts") {
  oracle::TempDir dir("pipe");
  auto cfg = load_run_config(kFixture / "config.json");
  cfg.output_dir = dir.path / "a";
  const auto first = run_pipeline(cfg);
  cfg.output_dir = dir.path / "b";
  const auto second = run_pipeline(cfg);
  CHECK(first.run_id == second.run_id);
  CHECK(first.artifacts == second.artifacts);
  auto a = tree_contents(dir.path / "a");
  auto b = tree_contents(dir.path / "b");
  CHECK(a.count("timings.json") == 1);
  a.erase("timings.json");
  b.erase("timings.json");
  REQUIRE(a.size() == b.size());
  for (const auto& [path, content] : a) CHECK_MESSAGE(b.at(path) == content, path);
  for (const char* f : {"manifest.json", "ingest_report.json", "embeddings.jsonl", "batches.jsonl",
                        "task1/report.txt", "task3/confusion.csv", "mapper/graph.json", "mapper/graph.dot",
                        "mapper/graph.graphml", "mapper/composition.json", "mapper/members.json"}) {
    CHECK_MESSAGE(a.count(f) == 1, f);
  }
  const auto manifest = nlohmann::json::parse(a.at("manifest.json"));
  CHECK(manifest["run_id"] == first.run_id);
  CHECK(manifest["artifacts"].size() == first.artifacts.size());
  for (const auto& [path, sha] : first.artifacts) CHECK(sha256_hex(a.at(path)) == sha);

  const auto graph = graph_from_json(nlohmann::json::parse(a.at("mapper/graph.json")));
  CHECK(graph.nodes.size() > 0);
  const auto records = load_records(dir.path / "a" / "embeddings.jsonl");
  for (const auto& r : records) CHECK_NOTHROW(validate_record(r));
  const auto report = nlohmann::json::parse(a.at("task1/report.json"));
  CHECK(report["accuracy"].get<double>() > 0.5);
}
