#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

#include "mapscope/graph_io.hpp"
#include "mapscope/pipeline.hpp"
#include "oracles.hpp"

using namespace mapscope;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MAPSCOPE_CLI;
const fs::path kFixture = MAPSCOPE_FIXTURE_DIR;

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = "'" + kCli + "' " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help").code == 0);
  for (const char* sub : {"ingest", "distill", "embed", "classify", "mapper", "query", "export", "serve", "run"}) {
    const auto o = run(std::string(sub) + " --help");
    CHECK_MESSAGE(o.code == 0, sub);
  }
  const auto unknown = run("mapper --no-such-flag");
  CHECK(unknown.code == 1);
  CHECK(unknown.out.find("Usage") != std::string::npos);
  CHECK(run("classify --task 7 --embeddings x --registry y").code == 1);
  CHECK(run("ingest --registry /nonexistent --posts /nonexistent --out /tmp/x").code == 1);
}

TEST_CASE("stage commands chain and export round-trips") {
  oracle::TempDir dir("cli");
  const auto reg = kFixture / "registry.json";
  const auto ingest = run("ingest --registry " + q(reg) + " --posts " + q(kFixture / "posts.jsonl") + " --out " +
                          q(dir.path / "ingest.json"));
  CHECK_MESSAGE(ingest.code == 0, ingest.out);
  const auto distill = run("distill --registry " + q(reg) + " --posts " + q(kFixture / "posts.jsonl") +
                           " --out " + q(dir.path / "batches.jsonl") +
                           " --cutoff 1663200000 --max-posts 40 --iup-n 8 --max-tokens 800");
  REQUIRE_MESSAGE(distill.code == 0, distill.out);
  const auto embed = run("embed --registry " + q(reg) + " --batches " + q(dir.path / "batches.jsonl") + " --out " +
                         q(dir.path / "emb.jsonl"));
  REQUIRE_MESSAGE(embed.code == 0, embed.out);

  const auto classify = run("classify --task 3 --embeddings " + q(dir.path / "emb.jsonl") + " --registry " +
                            q(reg) + " --out " + q(dir.path / "t3"));
  REQUIRE_MESSAGE(classify.code == 0, classify.out);
  const auto preds = read_file(dir.path / "t3" / "predictions.jsonl");
  std::istringstream lines(preds);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::string truth = j["truth"];
    CHECK((truth == "Hate Speech" || truth == "Control"));
    CHECK(j["predicted"] != "Hate Speech");
    ++n;
  }
  CHECK(n > 0);

  const auto mapper = run("mapper --embeddings " + q(dir.path / "emb.jsonl") + " --registry " + q(reg) +
                          " --out " + q(dir.path / "map"));
  REQUIRE_MESSAGE(mapper.code == 0, mapper.out);
  const auto graph = graph_from_json(nlohmann::json::parse(read_file(dir.path / "map" / "graph.json")));
  CHECK(graph.params.cover.intervals_per_dim == 10);
  CHECK(graph.params.cover.overlap_fraction == 0.5);
  CHECK(graph.params.dbscan.eps == 0.5);
  CHECK(graph.params.dbscan.min_samples == 2);

  const auto exported = run("export --graph " + q(dir.path / "map" / "graph.json") + " --format dot --out " +
                            q(dir.path / "g.dot"));
  REQUIRE_MESSAGE(exported.code == 0, exported.out);
  const auto back = graph_from_dot(read_file(dir.path / "g.dot"));
  CHECK(back.nodes.size() == graph.nodes.size());
  CHECK(back.edges.size() == graph.edges.size());

  const auto comps = run("query components --graph " + q(dir.path / "g.dot") + " --from dot --json");
  REQUIRE_MESSAGE(comps.code == 0, comps.out);
  const auto linked = run("query linked --graph " + q(dir.path / "map" / "graph.json") +
                          " --a HateSpeech --b Disorder --mode connected --json");
  CHECK_MESSAGE(linked.code == 0, linked.out);
  CHECK(nlohmann::json::parse(linked.out).contains("linked"));
  const auto dist = run("query distance --graph " + q(dir.path / "map" / "graph.json") +
                        " --a HateSpeech --b Disorder --json");
  CHECK_MESSAGE(dist.code == 0, dist.out);
}

TEST_CASE("run publishes into a data directory") {
  oracle::TempDir dir("clirun");
  const auto o = run("run --config " + q(kFixture / "config.json") + " --out " + q(dir.path / "out") +
                     " --data-dir " + q(dir.path / "data") + " --dataset fix");
  REQUIRE_MESSAGE(o.code == 0, o.out);
  CHECK(fs::is_regular_file(dir.path / "data" / "datasets" / "fix" / "embeddings.jsonl"));
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "data" / "runs")) {
    CHECK(fs::is_regular_file(e.path() / "manifest.json"));
    CHECK(fs::is_regular_file(e.path() / "mapper" / "graph.json"));
    ++runs;
  }
  CHECK(runs == 1);
}
