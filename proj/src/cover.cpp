#include <algorithm>
#include <cmath>
#include <limits>

#include "mapscope/error.hpp"
#include "mapscope/mapper.hpp"

namespace mapscope {

void CoverSpec::validate() const {
  if (intervals_per_dim < 1) throw Error(Errc::InvalidArgument, "intervals_per_dim must be >= 1");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "overlap_fraction must be in [0, 1)");
  }
}

std::vector<Interval> cover_intervals(double min, double max, const CoverSpec& spec) {
  spec.validate();
  if (!(min <= max) || !std::isfinite(min) || !std::isfinite(max)) {
    throw Error(Errc::InvalidArgument, "cover range must be finite with min <= max");
  }
  if (min == max) return {Interval{min, max}};

  const auto k = spec.intervals_per_dim;
  const double base = (max - min) / static_cast<double>(k);
  // Half of the extra width each side: base/(1-o) = base + 2 * ext.
  const double ext = base * spec.overlap_fraction / (2.0 * (1.0 - spec.overlap_fraction));
  std::vector<Interval> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i].lo = min + static_cast<double>(i) * base - ext;
    out[i].hi = min + static_cast<double>(i + 1) * base + ext;
  }
  out.front().lo = std::min(out.front().lo, min);
  out.back().hi = std::max(out.back().hi, max);
  return out;
}

Cover build_cover(std::span<const FilterPoint> points, const CoverSpec& spec) {
  spec.validate();
  if (points.empty()) throw Error(Errc::InvalidArgument, "cover needs at least one point");

  Cover cover;
  for (std::size_t dim = 0; dim < 2; ++dim) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : points) {
      lo = std::min(lo, p[dim]);
      hi = std::max(hi, p[dim]);
    }
    cover.intervals[dim] = cover_intervals(lo, hi, spec);
    cover.collapsed[dim] = lo == hi;
  }

  const std::size_t n0 = cover.intervals[0].size(), n1 = cover.intervals[1].size();
  cover.boxes.reserve(n0 * n1);
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      cover.boxes.push_back({{i, j}, {cover.intervals[0][i], cover.intervals[1][j]}});
    }
  }

  cover.point_boxes.resize(points.size());
  cover.box_points.resize(cover.boxes.size());
  std::vector<std::size_t> hits0, hits1;
  for (std::size_t p = 0; p < points.size(); ++p) {
    hits0.clear();
    hits1.clear();
    for (std::size_t i = 0; i < n0; ++i) {
      if (cover.intervals[0][i].contains(points[p][0])) hits0.push_back(i);
    }
    for (std::size_t j = 0; j < n1; ++j) {
      if (cover.intervals[1][j].contains(points[p][1])) hits1.push_back(j);
    }
    for (auto i : hits0) {
      for (auto j : hits1) {
        const auto b = i * n1 + j;
        cover.point_boxes[p].push_back(b);
        cover.box_points[b].push_back(p);
      }
    }
  }
  return cover;
}

std::vector<std::size_t> assign_point(const Cover& cover, FilterPoint point) {
  std::array<std::vector<std::size_t>, 2> hits;
  for (std::size_t dim = 0; dim < 2; ++dim) {
    const auto& iv = cover.intervals[dim];
    const double x = std::clamp(point[dim], iv.front().lo, iv.back().hi);
    for (std::size_t i = 0; i < iv.size(); ++i) {
      if (iv[i].contains(x)) hits[dim].push_back(i);
    }
  }
  const std::size_t n1 = cover.intervals[1].size();
  std::vector<std::size_t> out;
  for (auto i : hits[0]) {
    for (auto j : hits[1]) out.push_back(i * n1 + j);
  }
  return out;
}

}  // namespace mapscope
