#include "mapscope/mapper.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "mapscope/error.hpp"
#include "mapscope/hash.hpp"
#include "text_util.hpp"

namespace mapscope {

std::string_view to_string(NoisePolicy policy) noexcept {
  return policy == NoisePolicy::Drop ? "drop" : "singleton";
}

NoisePolicy parse_noise_policy(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "drop") return NoisePolicy::Drop;
  if (key == "singleton") return NoisePolicy::Singleton;
  throw Error(Errc::InvalidArgument, "noise_policy must be 'drop' or 'singleton'");
}

void MapperParams::validate() const {
  cover.validate();
  dbscan.validate();
}

nlohmann::ordered_json to_json(const MapperParams& params) {
  nlohmann::ordered_json j;
  j["intervals_per_dim"] = params.cover.intervals_per_dim;
  j["overlap_fraction"] = params.cover.overlap_fraction;
  j["eps"] = params.dbscan.eps;
  j["min_samples"] = params.dbscan.min_samples;
  j["metric"] = std::string(to_string(params.dbscan.metric));
  j["noise_policy"] = std::string(to_string(params.noise));
  j["seed"] = params.seed;
  return j;
}

MapperParams mapper_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "mapper params must be an object");
  MapperParams p;
  auto field = [&](const char* key, auto& target) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
      using T = std::decay_t<decltype(target)>;
      if constexpr (std::is_same_v<T, std::size_t>) {
        if (!it->is_number_integer() && !it->is_number_unsigned()) throw std::invalid_argument("");
        const auto v = it->get<long long>();
        if (v < 0) throw std::invalid_argument("");
        target = static_cast<std::size_t>(v);
      } else {
        if (!it->is_number()) throw std::invalid_argument("");
        target = it->get<double>();
      }
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, std::string(key) + ": wrong type");
    }
  };
  field("intervals_per_dim", p.cover.intervals_per_dim);
  field("overlap_fraction", p.cover.overlap_fraction);
  field("eps", p.dbscan.eps);
  field("min_samples", p.dbscan.min_samples);
  if (auto it = j.find("metric"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(Errc::InvalidArgument, "metric: wrong type");
    try {
      p.dbscan.metric = parse_metric(it->get<std::string>());
    } catch (const Error&) {
      throw Error(Errc::InvalidArgument, "metric: must be 'euclidean' or 'cosine'");
    }
  }
  if (auto it = j.find("noise_policy"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(Errc::InvalidArgument, "noise_policy: wrong type");
    try {
      p.noise = parse_noise_policy(it->get<std::string>());
    } catch (const Error&) {
      throw Error(Errc::InvalidArgument, "noise_policy: must be 'drop' or 'singleton'");
    }
  }
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
      throw Error(Errc::InvalidArgument, "seed: must be a non-negative integer");
    }
    p.seed = it->get<std::uint64_t>();
  }
  if (p.cover.intervals_per_dim < 1) {
    throw Error(Errc::InvalidArgument, "intervals_per_dim: must be >= 1");
  }
  if (!(p.cover.overlap_fraction >= 0.0 && p.cover.overlap_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "overlap_fraction: must be in [0, 1)");
  }
  if (!(p.dbscan.eps > 0.0)) throw Error(Errc::InvalidArgument, "eps: must be > 0");
  if (p.dbscan.min_samples < 1) throw Error(Errc::InvalidArgument, "min_samples: must be >= 1");
  return p;
}

std::string dataset_fingerprint(std::span<const MapperPoint> points) {
  std::vector<const MapperPoint*> order;
  order.reserve(points.size());
  for (const auto& p : points) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const MapperPoint* a, const MapperPoint* b) { return a->id < b->id; });
  std::string material;
  for (const auto* p : order) {
    material += p->id;
    material.push_back('\0');
    for (double x : p->vector) {
      char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof x);
      material.append(bytes, sizeof bytes);
    }
  }
  return sha256_hex(material);
}

MapperGraph mapper_graph(std::vector<MapperPoint> points, const MapperParams& params) {
  params.validate();
  if (points.size() < 2) throw Error(Errc::DegenerateData, "mapper needs at least two points");
  std::sort(points.begin(), points.end(),
            [](const MapperPoint& a, const MapperPoint& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].id == points[i - 1].id) throw Error(Errc::DuplicateId, points[i].id);
  }

  std::vector<Vector> vectors;
  vectors.reserve(points.size());
  for (const auto& p : points) vectors.push_back(p.vector);

  PcaOptions pca_options;
  pca_options.seed = params.seed;
  const auto pca = pca_fit(vectors, pca_options);
  const auto filter = pca_project(pca, vectors);
  const auto cover = build_cover(filter, params.cover);

  // Per-box clustering; boxes are independent, results land in box order.
  const std::size_t box_count = cover.boxes.size();
  std::vector<std::vector<int>> box_labels(box_count);
  std::size_t workers = params.threads ? params.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, box_count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t b; (b = next.fetch_add(1)) < box_count;) {
      try {
        box_labels[b] = dbscan(vectors, cover.box_points[b], params.dbscan);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  MapperGraph graph;
  graph.params = params;
  graph.input_size = points.size();
  graph.fingerprint = dataset_fingerprint(points);
  graph.filter.explained_variance = pca.explained_variance;
  graph.filter.second_degenerate = pca.second_degenerate;
  graph.filter.collapsed = cover.collapsed;

  struct Draft {
    std::array<std::size_t, 2> box;
    std::vector<std::size_t> members;  // point indices, ascending == id order
  };
  std::vector<Draft> drafts;
  for (std::size_t b = 0; b < box_count; ++b) {
    const auto& members = cover.box_points[b];
    const auto& labels = box_labels[b];
    int clusters = 0;
    for (int l : labels) clusters = std::max(clusters, l + 1);
    std::vector<Draft> local(static_cast<std::size_t>(clusters), Draft{cover.boxes[b].index, {}});
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (labels[k] == kNoise) {
        if (params.noise == NoisePolicy::Singleton) {
          drafts.push_back({cover.boxes[b].index, {members[k]}});
        }
        continue;
      }
      local[static_cast<std::size_t>(labels[k])].members.push_back(members[k]);
    }
    for (auto& d : local) drafts.push_back(std::move(d));
  }
  std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    if (a.members.front() != b.members.front()) return a.members.front() < b.members.front();
    if (a.box != b.box) return a.box < b.box;
    return a.members < b.members;
  });

  std::vector<std::vector<std::size_t>> nodes_of_point(points.size());
  graph.nodes.reserve(drafts.size());
  for (std::size_t id = 0; id < drafts.size(); ++id) {
    MapperNode node;
    node.id = id;
    node.box = drafts[id].box;
    std::map<std::string, std::size_t> counts;
    for (auto m : drafts[id].members) {
      node.members.push_back(points[m].id);
      ++counts[points[m].group];
      nodes_of_point[m].push_back(id);
    }
    const auto total = static_cast<double>(node.members.size());
    for (const auto& [g, c] : counts) node.composition[g] = static_cast<double>(c) / total;
    graph.nodes.push_back(std::move(node));
  }

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> shared;
  for (const auto& owners : nodes_of_point) {
    for (std::size_t x = 0; x < owners.size(); ++x) {
      for (std::size_t y = x + 1; y < owners.size(); ++y) {
        ++shared[{std::min(owners[x], owners[y]), std::max(owners[x], owners[y])}];
      }
    }
  }
  graph.edges.reserve(shared.size());
  for (const auto& [pair, count] : shared) graph.edges.push_back({pair.first, pair.second, count});
  return graph;
}

MapperGraph mapper_graph(std::span<const EmbeddingRecord> records, const MapperParams& params) {
  std::vector<MapperPoint> points;
  points.reserve(records.size());
  for (const auto& r : records) {
    points.push_back({r.id, r.vector, std::string(to_string(r.category.kind))});
  }
  return mapper_graph(std::move(points), params);
}

GroupBy parse_group_by(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "category") return GroupBy::Category;
  if (key == "community") return GroupBy::Community;
  if (key == "subclass") return GroupBy::Subclass;
  throw Error(Errc::InvalidArgument, "group must be 'category', 'community' or 'subclass'");
}

std::string_view to_string(GroupBy g) noexcept {
  switch (g) {
    case GroupBy::Category: return "category";
    case GroupBy::Community: return "community";
    case GroupBy::Subclass: return "subclass";
  }
  return "category";
}

std::unordered_map<std::string, std::string> grouping_for(std::span<const EmbeddingRecord> records,
                                                          GroupBy by) {
  std::unordered_map<std::string, std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    switch (by) {
      case GroupBy::Category: out[r.id] = std::string(to_string(r.category.kind)); break;
      case GroupBy::Community: out[r.id] = r.community; break;
      case GroupBy::Subclass: out[r.id] = r.category.label(); break;
    }
  }
  return out;
}

std::vector<std::map<std::string, double>> node_composition(
    const MapperGraph& graph, const std::unordered_map<std::string, std::string>& grouping) {
  std::vector<std::map<std::string, double>> out;
  out.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes) {
    std::map<std::string, std::size_t> counts;
    for (const auto& m : node.members) {
      auto it = grouping.find(m);
      if (it == grouping.end()) throw Error(Errc::UnknownId, "no group for member '" + m + "'");
      ++counts[it->second];
    }
    std::map<std::string, double> fractions;
    const auto total = static_cast<double>(node.members.size());
    for (const auto& [g, c] : counts) fractions[g] = static_cast<double>(c) / total;
    out.push_back(std::move(fractions));
  }
  return out;
}

}  // namespace mapscope
