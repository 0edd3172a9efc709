#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mapscope/mapper.hpp"

namespace mapscope {

/// Component id per node; components are numbered by their smallest node id.
std::vector<std::size_t> connected_components(const MapperGraph& graph);

std::size_t component_count(const MapperGraph& graph);

/// |E| - |V| + components over the subgraph induced by `nodes` (all nodes when empty).
std::size_t cycle_rank(const MapperGraph& graph, const std::vector<std::size_t>& nodes = {});

/// Nodes whose `key` fraction is > 0 and >= theta; sorted ascending.
struct Region {
  std::string key;
  std::vector<std::size_t> nodes;
};

/// `compositions` aligns with graph.nodes. theta = 0 selects any member.
Region make_region(const std::vector<std::map<std::string, double>>& compositions,
                   std::string key, double theta = 0.0);

/// Region over the graph's built-in node compositions.
Region make_region(const MapperGraph& graph, std::string key, double theta = 0.0);

enum class LinkMode { ShareNode, Adjacent, Connected };

LinkMode parse_link_mode(std::string_view name);
std::string_view to_string(LinkMode mode) noexcept;

/// Witness: the shared node (one entry), the joining edge (two entries), or a
/// shortest path from an A-node to a B-node.
struct LinkResult {
  bool linked = false;
  std::vector<std::size_t> witness;
};

/// Throws Errc::EmptyRegion, Errc::InvalidArgument for node ids outside the graph.
LinkResult region_linked(const MapperGraph& graph, const Region& a, const Region& b, LinkMode mode);

/// Fewest edges between any A-node and any B-node; nullopt when unreachable.
/// Throws Errc::EmptyRegion.
std::optional<std::size_t> region_distance(const MapperGraph& graph, const Region& a, const Region& b);

nlohmann::ordered_json to_json(const Region& region);
nlohmann::ordered_json to_json(const LinkResult& result, LinkMode mode);

}  // namespace mapscope
