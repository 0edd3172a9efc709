#include <doctest.h>

#include <random>

#include "mapscope/error.hpp"
#include "mapscope/graph_io.hpp"
#include "oracles.hpp"

using namespace mapscope;

namespace {

MapperGraph sample_graph() {
  std::mt19937_64 rng(3);
  auto pts = oracle::circle_points(rng, 120, 0.03, 4);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].group = i % 3 ? "Hate Speech" : "Control & <Co>";
  MapperParams p;
  p.dbscan.eps = 0.3;
  return mapper_graph(pts, p);
}

void check_same(const MapperGraph& a, const MapperGraph& b) {
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].id == b.nodes[i].id);
    CHECK(a.nodes[i].box == b.nodes[i].box);
    CHECK(a.nodes[i].members == b.nodes[i].members);
    CHECK(a.nodes[i].composition == b.nodes[i].composition);
  }
  CHECK(a.edges == b.edges);
  CHECK(a.fingerprint == b.fingerprint);
  CHECK(a.input_size == b.input_size);
  CHECK(to_json(a.params) == to_json(b.params));
  CHECK(a.filter.explained_variance == b.filter.explained_variance);
}

}  // namespace

TEST_CASE("json schema") {
  const auto g = sample_graph();
  REQUIRE(g.nodes.size() > 3);
  const auto j = graph_to_json(g);
  CHECK(j.contains("params"));
  REQUIRE(j["nodes"].is_array());
  for (const auto& n : j["nodes"]) {
    CHECK(n["id"].is_number_unsigned());
    CHECK(n["box"].size() == 2);
    CHECK(n["members"].is_array());
    CHECK(n["composition"].is_object());
  }
  for (const auto& e : j["edges"]) {
    CHECK(e["a"].get<std::size_t>() < e["b"].get<std::size_t>());
    CHECK(e["shared"].get<std::size_t>() >= 1);
  }
  CHECK(j["params"]["intervals_per_dim"] == 10);
}

TEST_CASE("every format round-trips") {
  const auto g = sample_graph();
  for (auto f : {GraphFormat::Json, GraphFormat::Dot, GraphFormat::GraphMl}) {
    const auto text = export_graph(g, f);
    const auto back = import_graph(text, f);
    check_same(g, back);
    CHECK(export_graph(back, f) == text);
  }
  CHECK(graph_to_dot(g).find("frac_") != std::string::npos);
  CHECK(graph_to_graphml(g).find("&amp;") != std::string::npos);
}

TEST_CASE("format names") {
  CHECK(parse_graph_format("json") == GraphFormat::Json);
  CHECK(parse_graph_format("DOT") == GraphFormat::Dot);
  CHECK(parse_graph_format("graphml") == GraphFormat::GraphMl);
  CHECK_THROWS_AS(parse_graph_format("gexf"), Error);
}

TEST_CASE("malformed graphs are rejected") {
  CHECK_THROWS_AS(graph_from_json(nlohmann::json::array()), Error);
  auto j = graph_to_json(sample_graph());
  j["edges"].push_back({{"a", 0}, {"b", 0}, {"shared", 1}});
  CHECK_THROWS_AS(graph_from_json(j), Error);
  auto k = graph_to_json(sample_graph());
  k["nodes"][0]["id"] = 999;
  CHECK_THROWS_AS(graph_from_json(k), Error);
  CHECK_THROWS_AS(graph_from_dot("not a graph"), Error);
  CHECK_THROWS_AS(graph_from_graphml("<graphml>"), Error);
}
