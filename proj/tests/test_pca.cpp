#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mapscope/error.hpp"
#include "mapscope/mapper.hpp"
#include "oracles.hpp"

using namespace mapscope;

namespace {

double dotp(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_orthonormal(const PcaModel& m) {
  CHECK(std::abs(dotp(m.components[0], m.components[0]) - 1.0) <= 1e-9);
  CHECK(std::abs(dotp(m.components[1], m.components[1]) - 1.0) <= 1e-9);
  CHECK(std::abs(dotp(m.components[0], m.components[1])) <= 1e-8);
  CHECK(m.explained_variance[0] >= m.explained_variance[1]);
  CHECK(m.explained_variance[1] >= 0.0);
}

void check_sign(const Vector& c) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (std::abs(c[i]) > std::abs(c[best]) + 1e-12) best = i;
  CHECK(c[best] > 0.0);
}

std::vector<Vector> scaled_gaussian_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  std::vector<double> scale(d);
  for (std::size_t j = 0; j < d; ++j) scale[j] = 0.2 + 3.0 / static_cast<double>(j + 1);
  std::vector<Vector> out(n, Vector(d));
  for (auto& v : out)
    for (std::size_t j = 0; j < d; ++j) v[j] = scale[j] * g(rng);
  return out;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen_oracle(const std::vector<Vector>& xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto d = static_cast<Eigen::Index>(xs[0].size());
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  const Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd cov = (C.transpose() * C) / static_cast<double>(n - 1);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov);
}

}  // namespace

TEST_CASE("collinear points have a closed-form first axis") {
  std::vector<Vector> xs;
  for (double t : {1.0, 2.0, 3.0}) {
    Vector v(16, 0.0);
    v[0] = v[1] = t;
    xs.push_back(v);
  }
  const auto m = pca_fit(xs);
  CHECK(m.components[0][0] == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(m.components[0][1] == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
  for (std::size_t i = 2; i < 16; ++i) CHECK(std::abs(m.components[0][i]) < 1e-9);
  CHECK(m.explained_variance[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(m.explained_variance[1]) < 1e-12);
  CHECK(m.second_degenerate);
  check_orthonormal(m);
  check_sign(m.components[1]);
}

TEST_CASE("translation moves only the mean") {
  std::mt19937_64 rng(4);
  auto xs = scaled_gaussian_rows(rng, 60, 10);
  const auto a = pca_fit(xs);
  for (auto& v : xs)
    for (auto& x : v) x += 5.0;
  const auto b = pca_fit(xs);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 10; ++i) CHECK(a.components[c][i] == doctest::Approx(b.components[c][i]).epsilon(1e-7));
  for (std::size_t i = 0; i < 10; ++i) CHECK(b.mean[i] == doctest::Approx(a.mean[i] + 5.0));
}

TEST_CASE("anisotropic gaussian recovers its long axis") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::vector<Vector> xs;
  for (int i = 0; i < 500; ++i) xs.push_back({3.0 * g(rng), 1.0 * g(rng)});
  const auto m = pca_fit(xs);
  const double angle = std::acos(std::min(1.0, std::abs(m.components[0][0]))) * 180.0 / M_PI;
  CHECK(angle < 5.0);
  const auto oracle = eigen_oracle(xs);
  CHECK(m.explained_variance[0] == doctest::Approx(oracle.eigenvalues()(1)).epsilon(1e-6));
}

TEST_CASE("eigenvalues and directions match a full decomposition") {
  std::mt19937_64 rng(23);
  for (std::size_t d : {3u, 8u, 20u, 64u}) {
    const auto xs = scaled_gaussian_rows(rng, 150, d);
    const auto m = pca_fit(xs);
    check_orthonormal(m);
    check_sign(m.components[0]);
    check_sign(m.components[1]);
    const auto o = eigen_oracle(xs);
    const auto k = static_cast<Eigen::Index>(d);
    for (int c = 0; c < 2; ++c) {
      const double want = o.eigenvalues()(k - 1 - c);
      CHECK(std::abs(m.explained_variance[c] - want) <= 1e-6 * want);
      double align = 0;
      for (std::size_t i = 0; i < d; ++i)
        align += m.components[c][i] * o.eigenvectors()(static_cast<Eigen::Index>(i), k - 1 - c);
      CHECK(std::abs(align) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("gram path for wide data agrees with the covariance oracle") {
  std::mt19937_64 rng(29);
  const auto xs = scaled_gaussian_rows(rng, 20, 300);
  const auto m = pca_fit(xs);
  check_orthonormal(m);
  const auto o = eigen_oracle(xs);
  CHECK(m.explained_variance[0] == doctest::Approx(o.eigenvalues()(299)).epsilon(1e-6));
  CHECK(m.explained_variance[1] == doctest::Approx(o.eigenvalues()(298)).epsilon(1e-6));
}

TEST_CASE("projection") {
  std::mt19937_64 rng(31);
  const auto xs = scaled_gaussian_rows(rng, 40, 12);
  const auto m = pca_fit(xs);
  const auto origin = pca_project(m, m.mean);
  CHECK(std::abs(origin[0]) < 1e-12);
  CHECK(std::abs(origin[1]) < 1e-12);
  Vector shifted = m.mean;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += m.components[0][i];
  const auto unit = pca_project(m, shifted);
  CHECK(std::abs(unit[0] - 1.0) <= 1e-9);
  CHECK(std::abs(unit[1]) <= 1e-9);
  const auto all = pca_project(m, xs);
  for (std::size_t p = 0; p < xs.size(); ++p) {
    for (int c = 0; c < 2; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < 12; ++i) s += (xs[p][i] - m.mean[i]) * m.components[c][i];
      CHECK(std::abs(all[p][c] - s) <= 1e-9);
    }
  }
  CHECK_THROWS_AS(pca_project(m, Vector(5, 0.0)), Error);
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(pca_fit(std::vector<Vector>{{1, 2}}), Error);
  try {
    pca_fit(std::vector<Vector>{{1, 2}, {1, 2}, {1, 2}});
    FAIL("expected DegenerateData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateData);
  }
  CHECK_THROWS_AS(pca_fit(std::vector<Vector>{{1, 2}, {1, 2, 3}}), Error);
}

TEST_CASE("sign convention") {
  Vector v{0.1, -0.9, 0.3};
  apply_sign_convention(v);
  CHECK(v == Vector{-0.1, 0.9, -0.3});
  Vector tie{-0.5, 0.5};
  apply_sign_convention(tie);
  CHECK(tie[0] > 0);
}
