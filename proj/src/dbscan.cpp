#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "mapscope/error.hpp"
#include "mapscope/mapper.hpp"

namespace mapscope {

namespace {

constexpr int kUnassigned = -2;

}  // namespace

void DbscanParams::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(Errc::InvalidArgument, "eps must be positive");
  if (min_samples < 1) throw Error(Errc::InvalidArgument, "min_samples must be >= 1");
}

std::vector<int> dbscan(std::span<const Vector> points, const DbscanParams& params) {
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return dbscan(points, all, params);
}

std::vector<int> dbscan(std::span<const Vector> points, std::span<const std::size_t> subset,
                        const DbscanParams& params) {
  params.validate();
  const std::size_t n = subset.size();
  if (n == 0) return {};
  const std::size_t dim = points[subset[0]].size();
  for (auto s : subset) check_vector(points[s], dim);

  // Neighbour lists (self included) from one pass over the pairs.
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) neighbours[i].push_back(i);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = points[subset[i]];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance(a, points[subset[j]], params.metric) <= params.eps) {
        neighbours[i].push_back(j);
        neighbours[j].push_back(i);
      }
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbours[i].size() >= params.min_samples;

  std::vector<int> labels(n, kUnassigned);
  int next_cluster = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnassigned || !core[i]) continue;
    const int cluster = next_cluster++;
    labels[i] = cluster;
    frontier.push_back(i);
    while (!frontier.empty()) {
      const auto q = frontier.front();
      frontier.pop_front();
      for (auto nb : neighbours[q]) {
        if (labels[nb] != kUnassigned) continue;
        labels[nb] = cluster;
        if (core[nb]) frontier.push_back(nb);
      }
    }
  }

  // Renumber by smallest member index.
  std::vector<int> remap(static_cast<std::size_t>(next_cluster), kUnassigned);
  int canonical = 0;
  for (auto& l : labels) {
    if (l == kUnassigned) {
      l = kNoise;
      continue;
    }
    auto& r = remap[static_cast<std::size_t>(l)];
    if (r == kUnassigned) r = canonical++;
    l = r;
  }
  return labels;
}

}  // namespace mapscope
