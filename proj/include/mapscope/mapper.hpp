#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mapscope/embed.hpp"
#include "mapscope/metric.hpp"

namespace mapscope {

// --- PCA filter --------------------------------------------------------------

struct PcaOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10'000;
  std::uint64_t seed = 0x6d617070;  // perturbation of stalled start vectors
};

/// Top-2 principal directions of the mean-centred data.
///
/// Components are unit length, mutually orthogonal, and oriented so that the
/// largest-magnitude coordinate is positive (ties go to the lowest index).
/// When the second eigenvalue is zero the second component is an arbitrary
/// deterministic orthonormal completion and `second_degenerate` is set.
struct PcaModel {
  Vector mean;
  std::array<Vector, 2> components;
  std::array<double, 2> explained_variance{};
  bool second_degenerate = false;
  std::array<std::size_t, 2> iterations{};
};

/// Power iteration with deflation on the smaller of the covariance and Gram
/// matrices. Throws Errc::DegenerateData (fewer than two vectors, or all
/// identical) and Errc::BadDim.
PcaModel pca_fit(std::span<const Vector> vectors, const PcaOptions& options = {});

using FilterPoint = std::array<double, 2>;

/// ((v - mean) . c1, (v - mean) . c2). Throws Errc::BadDim.
FilterPoint pca_project(const PcaModel& model, std::span<const double> vector);
std::vector<FilterPoint> pca_project(const PcaModel& model, std::span<const Vector> vectors);

/// Flips `v` so its largest-magnitude entry is positive.
void apply_sign_convention(Vector& v);

// --- cover ---------------------------------------------------------------------

struct CoverSpec {
  std::size_t intervals_per_dim = 10;
  double overlap_fraction = 0.5;

  /// Throws Errc::InvalidArgument.
  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Base intervals split [min, max] evenly; each is widened symmetrically to
/// base / (1 - overlap). A zero range yields the single interval [min, min].
std::vector<Interval> cover_intervals(double min, double max, const CoverSpec& spec);

struct CoverBox {
  std::array<std::size_t, 2> index{};
  std::array<Interval, 2> bounds{};
};

struct Cover {
  std::array<std::vector<Interval>, 2> intervals;
  std::array<bool, 2> collapsed{};  // zero range in that dimension
  std::vector<CoverBox> boxes;      // row-major: box (i, j) at i * intervals[1].size() + j
  std::vector<std::vector<std::size_t>> point_boxes;  // point -> boxes containing it
  std::vector<std::vector<std::size_t>> box_points;   // box -> points, ascending
};

/// Boundaries are inclusive. Throws Errc::InvalidArgument for no points.
Cover build_cover(std::span<const FilterPoint> points, const CoverSpec& spec);

/// Boxes for a point that was not part of the build; points outside the
/// covered range go to the nearest boxes.
std::vector<std::size_t> assign_point(const Cover& cover, FilterPoint point);

// --- DBSCAN --------------------------------------------------------------------

inline constexpr int kNoise = -1;

struct DbscanParams {
  double eps = 0.5;
  std::size_t min_samples = 2;
  Metric metric = Metric::Euclidean;

  /// Throws Errc::InvalidArgument.
  void validate() const;
};

/// Cluster label per point (kNoise for noise).
///
/// A point is core when at least min_samples points, itself included, lie
/// within eps (inclusive). Clusters are the eps-connected components of core
/// points; a border point joins the first cluster reaching it when clusters
/// are grown in ascending order of their lowest core index. Labels are then
/// renumbered by each cluster's smallest member index.
std::vector<int> dbscan(std::span<const Vector> points, const DbscanParams& params);

/// Same, over points[subset[0]], points[subset[1]], ...; labels align with
/// `subset`.
std::vector<int> dbscan(std::span<const Vector> points, std::span<const std::size_t> subset,
                        const DbscanParams& params);

// --- Mapper graph --------------------------------------------------------------

enum class NoisePolicy { Drop, Singleton };

std::string_view to_string(NoisePolicy policy) noexcept;
NoisePolicy parse_noise_policy(std::string_view name);

struct MapperParams {
  CoverSpec cover;
  DbscanParams dbscan;
  NoisePolicy noise = NoisePolicy::Drop;
  std::uint64_t seed = PcaOptions{}.seed;
  std::size_t threads = 0;  // 0: hardware concurrency; never changes output

  void validate() const;
};

/// Serializes everything but `threads`.
nlohmann::ordered_json to_json(const MapperParams& params);
/// Throws Errc::InvalidArgument with the offending field in the message.
MapperParams mapper_params_from_json(const nlohmann::json& j);

struct MapperPoint {
  std::string id;
  Vector vector;
  std::string group;  // default composition key
};

struct MapperNode {
  std::size_t id = 0;
  std::array<std::size_t, 2> box{};
  std::vector<std::string> members;  // sorted
  std::map<std::string, double> composition;
};

struct MapperEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t shared = 0;

  bool operator==(const MapperEdge&) const = default;
};

struct FilterSummary {
  std::array<double, 2> explained_variance{};
  bool second_degenerate = false;
  std::array<bool, 2> collapsed{};
};

/// Nodes are ordered by (smallest member id, box, member list) and numbered
/// in that order; edges are sorted pairs a < b.
struct MapperGraph {
  std::vector<MapperNode> nodes;
  std::vector<MapperEdge> edges;
  MapperParams params;
  std::string fingerprint;
  std::size_t input_size = 0;
  FilterSummary filter;
};

/// PCA filter -> overlapping cover -> per-box DBSCAN on the original vectors
/// -> one node per cluster -> edges between nodes sharing members.
/// Input order does not matter: points are sorted by id first.
/// Throws Errc::DegenerateData, Errc::DuplicateId, Errc::BadDim.
MapperGraph mapper_graph(std::vector<MapperPoint> points, const MapperParams& params);

/// Records grouped by category kind ("Disorder", "HateSpeech", ...).
MapperGraph mapper_graph(std::span<const EmbeddingRecord> records, const MapperParams& params);

enum class GroupBy { Category, Community, Subclass };

GroupBy parse_group_by(std::string_view name);
std::string_view to_string(GroupBy g) noexcept;

/// id -> group key for a grouping level.
std::unordered_map<std::string, std::string> grouping_for(std::span<const EmbeddingRecord> records,
                                                          GroupBy by);

/// Per node, the fraction of members in each group. Throws Errc::UnknownId if
/// a member has no group.
std::vector<std::map<std::string, double>> node_composition(
    const MapperGraph& graph, const std::unordered_map<std::string, std::string>& grouping);

/// Stable digest of ids and vector contents (order-independent).
std::string dataset_fingerprint(std::span<const MapperPoint> points);

}  // namespace mapscope
