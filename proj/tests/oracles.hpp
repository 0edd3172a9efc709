#pragma once

// Reference implementations used to check the library. Each one is written
// from the definition, favouring obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mapscope/classify.hpp"
#include "mapscope/embed.hpp"
#include "mapscope/mapper.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double euclid(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double cosine_dist(const Vec& a, const Vec& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

// --- union-find -----------------------------------------------------------------

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

/// Labels renumbered so that label order follows each group's smallest index.
inline std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    auto [it, inserted] = remap.emplace(labels[i], next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

// --- DBSCAN -------------------------------------------------------------------

/// All-pairs DBSCAN: cores by neighbour count, clusters as union-find
/// components of core-core links, each border point taken by the adjacent
/// cluster whose lowest core index is smallest.
inline std::vector<int> dbscan(const std::vector<Vec>& pts, double eps, std::size_t min_samples,
                               bool cosine) {
  const std::size_t n = pts.size();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      near[i][j] = (cosine ? cosine_dist(pts[i], pts[j]) : euclid(pts[i], pts[j])) <= eps;
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i)
    core[i] = static_cast<std::size_t>(std::count(near[i].begin(), near[i].end(), true)) >= min_samples;
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (core[i] && core[j] && near[i][j]) uf.unite(i, j);
  std::vector<int> raw(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (core[i]) raw[i] = static_cast<int>(uf.find(i));
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (!core[j] || !near[i][j]) continue;
      const int root = static_cast<int>(uf.find(j));
      if (best < 0 || root < best) best = root;
    }
    raw[i] = best;
  }
  return canonical(raw);
}

// --- graphs -------------------------------------------------------------------

inline std::vector<std::size_t> components(std::size_t n,
                                           const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  UnionFind uf(n);
  for (auto [a, b] : edges) uf.unite(a, b);
  std::vector<std::size_t> label(n);
  std::map<std::size_t, std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = ids.emplace(uf.find(i), ids.size());
    label[i] = it->second;
  }
  return label;
}

constexpr std::size_t kUnreachable = static_cast<std::size_t>(-1);

inline std::vector<std::vector<std::size_t>> all_pairs_hops(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, kUnreachable));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> q;
    d[s][s] = 0;
    q.push(s);
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      for (auto v : adj[u])
        if (d[s][v] == kUnreachable) {
          d[s][v] = d[s][u] + 1;
          q.push(v);
        }
    }
  }
  return d;
}

/// Edge (u, v, shared) for every pair of nodes with intersecting members.
inline std::vector<mapscope::MapperEdge> nerve(const std::vector<mapscope::MapperNode>& nodes) {
  std::vector<mapscope::MapperEdge> out;
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    for (std::size_t v = u + 1; v < nodes.size(); ++v) {
      std::set<std::string> a(nodes[u].members.begin(), nodes[u].members.end());
      std::size_t shared = 0;
      for (const auto& m : nodes[v].members) shared += a.count(m);
      if (shared > 0) out.push_back({u, v, shared});
    }
  }
  return out;
}

// --- token packing ------------------------------------------------------------

inline std::size_t chars4(const std::string& s) { return (s.size() + 3) / 4; }

/// Groups of post indices under greedy in-order packing with "\n\n" joins.
struct PackOracle {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> skipped;
};

template <class Count>
PackOracle greedy_pack(const std::vector<std::string>& texts, std::size_t budget, Count count) {
  PackOracle out;
  std::vector<std::size_t> open;
  std::string joined;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (count(texts[i]) > budget) {
      out.skipped.push_back(i);
      continue;
    }
    const std::string trial = open.empty() ? texts[i] : joined + "\n\n" + texts[i];
    if (count(trial) <= budget) {
      open.push_back(i);
      joined = trial;
    } else {
      out.batches.push_back(open);
      open = {i};
      joined = texts[i];
    }
  }
  if (!open.empty()) out.batches.push_back(open);
  return out;
}

// --- classification report ------------------------------------------------------

struct Scores {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

struct Tally {
  std::map<std::string, Scores> per;
  double accuracy = 0;
  Scores macro, weighted;
};

/// Counts straight from the prediction list, no matrix involved.
inline Tally tally(const std::vector<mapscope::Prediction>& preds, const std::vector<std::string>& labels) {
  Tally t;
  std::size_t correct = 0;
  for (const auto& p : preds) correct += p.truth == p.predicted;
  t.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  std::size_t total_support = 0;
  for (const auto& l : labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& p : preds) {
      if (p.truth == l && p.predicted == l) ++tp;
      if (p.truth != l && p.predicted == l) ++fp;
      if (p.truth == l && p.predicted != l) ++fn;
    }
    Scores s;
    s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.support = tp + fn;
    total_support += s.support;
    t.per[l] = s;
  }
  const double k = static_cast<double>(labels.size());
  for (const auto& l : labels) {
    const auto& s = t.per[l];
    t.macro.precision += s.precision / k;
    t.macro.recall += s.recall / k;
    t.macro.f1 += s.f1 / k;
    if (total_support > 0) {
      const double w = static_cast<double>(s.support) / static_cast<double>(total_support);
      t.weighted.precision += w * s.precision;
      t.weighted.recall += w * s.recall;
      t.weighted.f1 += w * s.f1;
    }
  }
  return t;
}

// --- local embedder -----------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h = h ^ c;
    h = h * 0x100000001b3ULL;
  }
  return h;
}

inline Vec local_embed(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  std::vector<std::string> features = words;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) features.push_back(words[i] + " " + words[i + 1]);
  Vec v(1536, 0.0);
  for (const auto& f : features) {
    const auto h = fnv1a(f);
    v[h % 1536] += (h >> 63) ? -1.0 : 1.0;
  }
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

// --- synthetic data ----------------------------------------------------------

inline Vec gaussian_point(std::mt19937_64& rng, const Vec& center, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  Vec v = center;
  for (double& x : v) x += g(rng);
  return v;
}

inline std::vector<mapscope::MapperPoint> blob_points(std::mt19937_64& rng, const std::string& prefix,
                                                      const Vec& center, double sigma, std::size_t n,
                                                      const std::string& group) {
  std::vector<mapscope::MapperPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%04zu", prefix.c_str(), i);
    out.push_back({id, gaussian_point(rng, center, sigma), group});
  }
  return out;
}

/// Noisy unit circle in the first two of `dim` coordinates.
inline std::vector<mapscope::MapperPoint> circle_points(std::mt19937_64& rng, std::size_t n, double sigma,
                                                        std::size_t dim) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<mapscope::MapperPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = angle(rng);
    Vec v(dim, 0.0);
    v[0] = std::cos(t) + g(rng);
    v[1] = std::sin(t) + g(rng);
    char id[32];
    std::snprintf(id, sizeof id, "c%04zu", i);
    out.push_back({id, v, "ring"});
  }
  return out;
}

// --- files --------------------------------------------------------------------

/// Fresh empty directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() /
           ("mapscope-" + tag + "-" + std::to_string(rng() % 1000000000ULL));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace oracle
