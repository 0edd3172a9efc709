#include <algorithm>
#include <cmath>
#include <random>

#include "mapscope/error.hpp"
#include "mapscope/mapper.hpp"

namespace mapscope {

namespace {

// Dense symmetric matrix, row-major.
struct SymMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  void multiply(const Vector& v, Vector& out) const {
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = a.data() + i * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * v[j];
      out[i] = s;
    }
  }
};

void normalize(Vector& v) {
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
}

void remove_projection(Vector& v, const Vector& unit) {
  const double p = dot(v, unit);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * unit[i];
}

struct Eigenpair {
  Vector vector;
  double value = 0.0;
  std::size_t iterations = 0;
  bool zero = false;  // the (deflated) operator vanished
};

// Power iteration for the dominant eigenpair of m restricted to the
// orthogonal complement of `deflate` (already-found unit eigenvectors).
Eigenpair dominant(const SymMatrix& m, const std::vector<const Vector*>& deflate,
                   const PcaOptions& options, std::mt19937_64& rng, double zero_threshold) {
  const std::size_t n = m.n;
  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Vector w;

  auto project_out = [&](Vector& x) {
    for (const auto* d : deflate) remove_projection(x, *d);
  };
  auto perturb = [&](Vector& x) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& e : x) e += normal(rng);
  };

  project_out(v);
  Eigenpair out;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (l2_norm(v) > 1e-8) {
      normalize(v);
      m.multiply(v, w);
      project_out(w);
      if (l2_norm(w) > zero_threshold) break;
    }
    perturb(v);
    project_out(v);
    if (attempt == 2) {
      out.zero = true;
      return out;
    }
  }

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    m.multiply(v, w);
    project_out(w);
    const double nw = l2_norm(w);
    if (nw <= zero_threshold) {
      out.zero = true;
      out.iterations = it + 1;
      return out;
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = w[i] / nw;
      const double d = next - v[i];
      diff += d * d;
      v[i] = next;
    }
    out.iterations = it + 1;
    if (std::sqrt(diff) < options.tolerance) break;
  }
  m.multiply(v, w);
  out.value = dot(v, w);  // Rayleigh quotient
  out.vector = std::move(v);
  return out;
}

}  // namespace

void apply_sign_convention(Vector& v) {
  double biggest = 0.0;
  for (double x : v) biggest = std::max(biggest, std::abs(x));
  // Treat magnitudes within rounding of the maximum as tied.
  const double cutoff = biggest * (1.0 - 1e-12);
  for (double x : v) {
    if (std::abs(x) >= cutoff) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

PcaModel pca_fit(std::span<const Vector> vectors, const PcaOptions& options) {
  if (vectors.size() < 2) throw Error(Errc::DegenerateData, "PCA needs at least two vectors");
  const std::size_t n = vectors.size();
  const std::size_t d = vectors.front().size();
  if (d < 2) throw Error(Errc::BadDim, "PCA needs at least two dimensions");
  for (const auto& v : vectors) {
    if (v.size() != d) throw Error(Errc::BadDim, "vectors have differing dimensions");
    check_vector(v, d);
  }
  if (std::all_of(vectors.begin() + 1, vectors.end(),
                  [&](const Vector& v) { return v == vectors.front(); })) {
    throw Error(Errc::DegenerateData, "all points are identical");
  }

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += v[j];
  }
  for (double& x : model.mean) x /= static_cast<double>(n);

  std::vector<double> centred(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centred[i * d + j] = vectors[i][j] - model.mean[j];
  }
  const double denom = static_cast<double>(n - 1);

  // Covariance (d x d) when d <= n, otherwise the Gram matrix (n x n); both
  // share their nonzero eigenvalues.
  const bool gram = d > n;
  SymMatrix m;
  m.n = gram ? n : d;
  m.a.assign(m.n * m.n, 0.0);
  if (gram) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = i; k < n; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += centred[i * d + j] * centred[k * d + j];
        m.a[i * n + k] = m.a[k * n + i] = s / denom;
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = centred.data() + i * d;
      for (std::size_t p = 0; p < d; ++p) {
        const double rp = row[p];
        if (rp == 0.0) continue;
        double* out = m.a.data() + p * d;
        for (std::size_t q = p; q < d; ++q) out[q] += rp * row[q];
      }
    }
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p; q < d; ++q) {
        m.a[p * d + q] /= denom;
        m.a[q * d + p] = m.a[p * d + q];
      }
    }
  }

  double trace = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) trace += m(i, i);
  const double zero_threshold = 1e-13 * trace;

  std::mt19937_64 rng(options.seed);
  auto first = dominant(m, {}, options, rng, zero_threshold);
  if (first.zero) throw Error(Errc::DegenerateData, "data has no variance");
  auto second = dominant(m, {&first.vector}, options, rng, zero_threshold);

  auto to_component = [&](const Vector& u) {
    if (!gram) return u;
    Vector c(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = u[i];
      for (std::size_t j = 0; j < d; ++j) c[j] += ui * centred[i * d + j];
    }
    normalize(c);
    return c;
  };

  Vector c1 = to_component(first.vector);
  apply_sign_convention(c1);
  model.explained_variance[0] = first.value;
  model.iterations[0] = first.iterations;

  Vector c2;
  const bool second_zero = second.zero || second.value <= 1e-12 * first.value;
  if (!second_zero) {
    c2 = to_component(second.vector);
    model.explained_variance[1] = second.value;
  } else {
    // Orthonormal completion: first standard basis vector not parallel to c1.
    for (std::size_t i = 0; i < d; ++i) {
      Vector e(d, 0.0);
      e[i] = 1.0;
      remove_projection(e, c1);
      if (l2_norm(e) > 1e-6) {
        c2 = std::move(e);
        break;
      }
    }
    model.explained_variance[1] = 0.0;
    model.second_degenerate = true;
  }
  model.iterations[1] = second.iterations;
  remove_projection(c2, c1);
  normalize(c2);
  apply_sign_convention(c2);

  model.components = {std::move(c1), std::move(c2)};
  return model;
}

FilterPoint pca_project(const PcaModel& model, std::span<const double> vector) {
  if (vector.size() != model.mean.size()) {
    throw Error(Errc::BadDim, "projected vector has " + std::to_string(vector.size()) +
                                  " dimensions, model " + std::to_string(model.mean.size()));
  }
  FilterPoint p{0.0, 0.0};
  for (std::size_t j = 0; j < vector.size(); ++j) {
    const double c = vector[j] - model.mean[j];
    p[0] += c * model.components[0][j];
    p[1] += c * model.components[1][j];
  }
  return p;
}

std::vector<FilterPoint> pca_project(const PcaModel& model, std::span<const Vector> vectors) {
  std::vector<FilterPoint> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(pca_project(model, v));
  return out;
}

}  // namespace mapscope
