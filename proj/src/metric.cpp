#include "mapscope/metric.hpp"

#include <cmath>
#include <string>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

std::string_view to_string(Metric metric) noexcept {
  return metric == Metric::Cosine ? "cosine" : "euclidean";
}

Metric parse_metric(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "cosine") return Metric::Cosine;
  if (key == "euclidean") return Metric::Euclidean;
  throw Error(Errc::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size()) throw Error(Errc::BadDim, "vector dimensions differ");
  if (metric == Metric::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  const double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroVector, "zero vector under cosine");
  return 1.0 - dot(a, b) / (na * nb);
}

}  // namespace mapscope
