#pragma once

#include <span>
#include <string_view>

namespace mapscope {

enum class Metric { Cosine, Euclidean };

std::string_view to_string(Metric metric) noexcept;
Metric parse_metric(std::string_view name);

/// Euclidean distance, or 1 - cosine similarity. Throws Errc::BadDim on a
/// size mismatch and Errc::ZeroVector for a zero vector under cosine.
double distance(std::span<const double> a, std::span<const double> b, Metric metric);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

}  // namespace mapscope
