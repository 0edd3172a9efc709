#include "mapscope/graphan.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace {

constexpr std::size_t kUnseen = std::numeric_limits<std::size_t>::max();

std::vector<std::vector<std::size_t>> adjacency(const MapperGraph& graph) {
  std::vector<std::vector<std::size_t>> adj(graph.nodes.size());
  for (const auto& e : graph.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

void check_region(const MapperGraph& graph, const Region& r) {
  if (r.nodes.empty()) throw Error(Errc::EmptyRegion, "region '" + r.key + "' has no nodes");
  for (auto n : r.nodes) {
    if (n >= graph.nodes.size()) {
      throw Error(Errc::InvalidArgument, "region '" + r.key + "' names node " + std::to_string(n) +
                                             " outside the graph");
    }
  }
}

// Multi-source BFS from `sources`; returns the parent array (kUnseen when
// unreached, self for sources) and the first reached target.
struct Bfs {
  std::vector<std::size_t> parent;
  std::vector<std::size_t> depth;
  std::size_t hit = kUnseen;
};

Bfs bfs(const MapperGraph& graph, const std::vector<std::size_t>& sources,
        const std::vector<bool>& is_target) {
  const auto adj = adjacency(graph);
  Bfs out;
  out.parent.assign(graph.nodes.size(), kUnseen);
  out.depth.assign(graph.nodes.size(), kUnseen);
  std::deque<std::size_t> queue;
  for (auto s : sources) {
    if (out.parent[s] != kUnseen) continue;
    out.parent[s] = s;
    out.depth[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    if (is_target[v]) {
      out.hit = v;
      return out;
    }
    for (auto w : adj[v]) {
      if (out.parent[w] != kUnseen) continue;
      out.parent[w] = v;
      out.depth[w] = out.depth[v] + 1;
      queue.push_back(w);
    }
  }
  return out;
}

std::vector<bool> mask(std::size_t n, const std::vector<std::size_t>& nodes) {
  std::vector<bool> m(n, false);
  for (auto v : nodes) m[v] = true;
  return m;
}

}  // namespace

std::vector<std::size_t> connected_components(const MapperGraph& graph) {
  const auto adj = adjacency(graph);
  std::vector<std::size_t> comp(graph.nodes.size(), kUnseen);
  std::size_t next = 0;
  for (std::size_t start = 0; start < comp.size(); ++start) {
    if (comp[start] != kUnseen) continue;
    std::vector<std::size_t> stack{start};
    comp[start] = next;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : adj[v]) {
        if (comp[w] == kUnseen) {
          comp[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::size_t component_count(const MapperGraph& graph) {
  const auto comp = connected_components(graph);
  return comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
}

std::size_t cycle_rank(const MapperGraph& graph, const std::vector<std::size_t>& nodes) {
  std::vector<std::size_t> index(graph.nodes.size(), nodes.empty() ? 0 : kUnseen);
  MapperGraph sub;
  if (nodes.empty()) {
    sub.nodes.resize(graph.nodes.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
  } else {
    for (auto v : nodes) {
      if (v >= index.size()) throw Error(Errc::InvalidArgument, "node outside the graph");
      if (index[v] == kUnseen) {
        index[v] = sub.nodes.size();
        sub.nodes.push_back({});
      }
    }
  }
  for (const auto& e : graph.edges) {
    if (index[e.a] != kUnseen && index[e.b] != kUnseen) {
      sub.edges.push_back({index[e.a], index[e.b], e.shared});
    }
  }
  return sub.edges.size() + component_count(sub) - sub.nodes.size();
}

Region make_region(const std::vector<std::map<std::string, double>>& compositions, std::string key,
                   double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw Error(Errc::InvalidArgument, "theta must be in [0, 1]");
  Region r{std::move(key), {}};
  for (std::size_t i = 0; i < compositions.size(); ++i) {
    auto it = compositions[i].find(r.key);
    if (it != compositions[i].end() && it->second > 0.0 && it->second >= theta) r.nodes.push_back(i);
  }
  return r;
}

Region make_region(const MapperGraph& graph, std::string key, double theta) {
  std::vector<std::map<std::string, double>> comps;
  comps.reserve(graph.nodes.size());
  for (const auto& n : graph.nodes) comps.push_back(n.composition);
  return make_region(comps, std::move(key), theta);
}

LinkMode parse_link_mode(std::string_view name) {
  auto key = detail::fold(name);
  std::erase(key, '_');
  std::erase(key, '-');
  if (key == "sharenode" || key == "share") return LinkMode::ShareNode;
  if (key == "adjacent") return LinkMode::Adjacent;
  if (key == "connected") return LinkMode::Connected;
  throw Error(Errc::InvalidArgument, "mode must be share_node, adjacent or connected");
}

std::string_view to_string(LinkMode mode) noexcept {
  switch (mode) {
    case LinkMode::ShareNode: return "share_node";
    case LinkMode::Adjacent: return "adjacent";
    case LinkMode::Connected: return "connected";
  }
  return "connected";
}

LinkResult region_linked(const MapperGraph& graph, const Region& a, const Region& b, LinkMode mode) {
  check_region(graph, a);
  check_region(graph, b);
  const auto in_b = mask(graph.nodes.size(), b.nodes);
  auto a_sorted = a.nodes;
  std::sort(a_sorted.begin(), a_sorted.end());

  for (auto v : a_sorted) {
    if (in_b[v]) return {true, {v}};
  }
  if (mode == LinkMode::ShareNode) return {};

  const auto in_a = mask(graph.nodes.size(), a_sorted);
  if (mode == LinkMode::Adjacent) {
    for (const auto& e : graph.edges) {
      if (in_a[e.a] && in_b[e.b]) return {true, {e.a, e.b}};
      if (in_a[e.b] && in_b[e.a]) return {true, {e.b, e.a}};
    }
    return {};
  }

  const auto search = bfs(graph, a_sorted, in_b);
  if (search.hit == kUnseen) return {};
  std::vector<std::size_t> path;
  for (auto v = search.hit;; v = search.parent[v]) {
    path.push_back(v);
    if (search.parent[v] == v) break;
  }
  std::reverse(path.begin(), path.end());
  return {true, std::move(path)};
}

std::optional<std::size_t> region_distance(const MapperGraph& graph, const Region& a, const Region& b) {
  check_region(graph, a);
  check_region(graph, b);
  const auto search = bfs(graph, a.nodes, mask(graph.nodes.size(), b.nodes));
  if (search.hit == kUnseen) return std::nullopt;
  return search.depth[search.hit];
}

nlohmann::ordered_json to_json(const Region& region) {
  nlohmann::ordered_json j;
  j["key"] = region.key;
  j["nodes"] = region.nodes;
  return j;
}

nlohmann::ordered_json to_json(const LinkResult& result, LinkMode mode) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(mode));
  j["linked"] = result.linked;
  if (!result.linked) {
    j["witness"] = nullptr;
  } else if (mode == LinkMode::Connected || result.witness.size() > 2) {
    j["witness"] = {{"path", result.witness}};
  } else if (result.witness.size() == 1) {
    j["witness"] = {{"node", result.witness.front()}};
  } else {
    j["witness"] = {{"edge", result.witness}};
  }
  return j;
}

}  // namespace mapscope
