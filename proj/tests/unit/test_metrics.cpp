#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "resynth/metrics.hpp"

using namespace resynth;

namespace {

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(n(rng));
  return v;
}

double d(const DistanceKind& k, const std::vector<float>& x, const std::vector<float>& y) {
  return distance(k, std::span<const float>(x), std::span<const float>(y));
}

const std::vector<DistanceKind>& all_kinds() {
  static const std::vector<DistanceKind> kinds = {
      DistanceKind::euclidean(), DistanceKind::manhattan(), DistanceKind::cosine(),
      DistanceKind::mahalanobis(PrecisionMatrix::diagonal({1.0, 2.0, 0.5, 3.0, 1.5, 0.25, 4.0, 1.0}))};
  return kinds;
}

}  // namespace

TEST(Distance, HandValues) {
  EXPECT_DOUBLE_EQ(d(DistanceKind::euclidean(), {0, 0}, {3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(d(DistanceKind::manhattan(), {0, 0}, {3, -4}), 7.0);
  EXPECT_DOUBLE_EQ(d(DistanceKind::euclidean(), {1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_NEAR(d(DistanceKind::cosine(), {1, 0}, {0, 1}), 1.0, 1e-15);
  EXPECT_NEAR(d(DistanceKind::cosine(), {1, 1}, {2, 2}), 0.0, 1e-15);
  EXPECT_NEAR(d(DistanceKind::cosine(), {1, 0}, {-1, 0}), 2.0, 1e-15);
}

TEST(Distance, Errors) {
  EXPECT_THROW(d(DistanceKind::euclidean(), {1, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(d(DistanceKind::cosine(), {0, 0}, {1, 2}), Error);
  EXPECT_NO_THROW(DistanceKind::mahalanobis(PrecisionMatrix::identity(3)).name());
}

TEST(Distance, MahalanobisDimMustMatch) {
  const auto k = DistanceKind::mahalanobis(PrecisionMatrix::identity(3));
  EXPECT_THROW(d(k, {1, 2}, {3, 4}), DimensionError);
}

TEST(Distance, SymmetryAndNonNegativity) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_vec(rng, 8), y = random_vec(rng, 8);
    for (const auto& k : all_kinds()) {
      const double a = d(k, x, y), b = d(k, y, x);
      EXPECT_GE(a, 0.0);
      EXPECT_EQ(a, b) << k.name();
      EXPECT_NEAR(d(k, x, x), 0.0, 1e-12) << k.name();
    }
  }
}

TEST(Distance, TriangleInequality) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_vec(rng, 16), y = random_vec(rng, 16), z = random_vec(rng, 16);
    for (const auto& k : {DistanceKind::euclidean(), DistanceKind::manhattan()}) {
      EXPECT_LE(d(k, x, z), d(k, x, y) + d(k, y, z) + 1e-12);
    }
  }
}

TEST(Distance, ScaleBehaviour) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_vec(rng, 12), y = random_vec(rng, 12);
    // Powers of two keep the scaled floats exact.
    const float a = std::ldexp(1.0f, static_cast<int>(rng() % 7) - 3);
    const float b = std::ldexp(1.0f, static_cast<int>(rng() % 7) - 3);
    std::vector<float> ax(x), by(y), ay(y);
    for (auto& v : ax) v *= a;
    for (auto& v : by) v *= b;
    for (auto& v : ay) v *= a;
    EXPECT_NEAR(d(DistanceKind::cosine(), ax, by), d(DistanceKind::cosine(), x, y), 1e-12);
    EXPECT_NEAR(d(DistanceKind::euclidean(), ax, ay), a * d(DistanceKind::euclidean(), x, y),
                1e-12 * d(DistanceKind::euclidean(), ax, ay));
  }
}

TEST(Distance, MahalanobisIdentityIsEuclidean) {
  std::mt19937_64 rng(4);
  const auto diag = DistanceKind::mahalanobis(PrecisionMatrix::identity(32));
  std::vector<double> eye(32 * 32, 0.0);
  for (int i = 0; i < 32; ++i) eye[static_cast<std::size_t>(i) * 33] = 1.0;
  const auto full = DistanceKind::mahalanobis(PrecisionMatrix::full(32, eye));
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_vec(rng, 32), y = random_vec(rng, 32);
    const double e = d(DistanceKind::euclidean(), x, y);
    EXPECT_LE(std::abs(d(diag, x, y) - e), 1e-12 * e);
    EXPECT_LE(std::abs(d(full, x, y) - e), 1e-12 * e);
  }
}

TEST(Distance, AccumulationOrderBarelyMatters) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_vec(rng, 768), y = random_vec(rng, 768);
    // Pairwise summation reference.
    std::vector<double> terms(768);
    for (std::size_t j = 0; j < 768; ++j) {
      const double t = static_cast<double>(x[j]) - static_cast<double>(y[j]);
      terms[j] = t * t;
    }
    std::function<double(std::size_t, std::size_t)> pairwise = [&](std::size_t lo, std::size_t hi) -> double {
      if (hi - lo == 1) return terms[lo];
      const std::size_t mid = lo + (hi - lo) / 2;
      return pairwise(lo, mid) + pairwise(mid, hi);
    };
    const double ref = std::sqrt(pairwise(0, 768));
    const double got = d(DistanceKind::euclidean(), x, y);
    EXPECT_LT(std::abs(got - ref) / ref, 1e-9);
  }
}

TEST(PrecisionMatrix, Invariants) {
  EXPECT_THROW(PrecisionMatrix::diagonal({1.0, 0.0}), Error);
  EXPECT_THROW(PrecisionMatrix::diagonal({1.0, -1.0}), Error);
  EXPECT_THROW(PrecisionMatrix::full(2, {1.0, 0.5, 0.4, 1.0}), Error);     // asymmetric
  EXPECT_THROW(PrecisionMatrix::full(2, {1.0, 2.0, 2.0, 1.0}), SingularityError);  // indefinite
  EXPECT_NO_THROW(PrecisionMatrix::full(2, {2.0, 0.5, 0.5, 1.0}));
}

TEST(EstimatePrecision, TwoOneDimSamples) {
  const std::vector<FeatureVector> s{FeatureVector({0.0f}), FeatureVector({2.0f})};
  for (PrecisionMode mode : {PrecisionMode::diagonal, PrecisionMode::full}) {
    const PrecisionMatrix p = estimate_precision(s, 0.0, mode);
    EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  }
}

TEST(EstimatePrecision, FullShrinkageIsScaledIdentity) {
  std::mt19937_64 rng(6);
  std::vector<FeatureVector> s;
  for (int i = 0; i < 20; ++i) s.emplace_back(random_vec(rng, 5, 2.0));
  // Independent covariance trace.
  double trace = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    double mean = 0.0;
    for (const auto& v : s) mean += v[j];
    mean /= 20.0;
    double var = 0.0;
    for (const auto& v : s) var += (v[j] - mean) * (v[j] - mean);
    trace += var / 19.0;
  }
  const double expected = 1.0 / (trace / 5.0);
  for (PrecisionMode mode : {PrecisionMode::diagonal, PrecisionMode::full}) {
    const PrecisionMatrix p = estimate_precision(s, 1.0, mode);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(p(i, j), i == j ? expected : 0.0, 1e-12 * expected);
  }
}

TEST(EstimatePrecision, RankDeficientWithoutShrinkageIsSingular) {
  std::mt19937_64 rng(7);
  std::vector<FeatureVector> s;
  for (int i = 0; i < 10; ++i) s.emplace_back(random_vec(rng, 768));
  EXPECT_THROW(estimate_precision(s, 0.0, PrecisionMode::full), SingularityError);
  EXPECT_NO_THROW(estimate_precision(s, 0.1, PrecisionMode::full));
}

TEST(EstimatePrecision, Preconditions) {
  const std::vector<FeatureVector> one{FeatureVector({1.0f, 2.0f})};
  EXPECT_THROW(estimate_precision(one, 0.1, PrecisionMode::diagonal), Error);
  const std::vector<FeatureVector> two{FeatureVector({1.0f, 2.0f}), FeatureVector({0.0f, 1.0f})};
  EXPECT_THROW(estimate_precision(two, 1.5, PrecisionMode::diagonal), Error);
  EXPECT_THROW(estimate_precision(two, -0.1, PrecisionMode::diagonal), Error);
}

TEST(EstimatePrecision, PositiveDefiniteForPositiveShrinkage) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 2 + trial % 12;
    std::vector<FeatureVector> s;
    for (std::size_t i = 0; i < 3 + static_cast<std::size_t>(trial % 5); ++i) s.emplace_back(random_vec(rng, dim));
    const PrecisionMatrix p = estimate_precision(s, 0.05 + 0.9 * (trial % 10) / 10.0, PrecisionMode::full);
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) m(i, j) = p(i, j);
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(m.llt().info(), Eigen::Success);
  }
}

TEST(EstimatePrecision, ExactInverseOfShrunkCovariance) {
  std::mt19937_64 rng(9);
  std::vector<FeatureVector> s;
  for (int i = 0; i < 12; ++i) s.emplace_back(random_vec(rng, 4));
  const double lambda = 0.3;
  Eigen::MatrixXd x(12, 4);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / 11.0;
  const Eigen::MatrixXd shrunk =
      (1 - lambda) * cov + lambda * cov.trace() / 4.0 * Eigen::MatrixXd::Identity(4, 4);
  const PrecisionMatrix p = estimate_precision(s, lambda, PrecisionMode::full);
  Eigen::MatrixXd pm(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pm(i, j) = p(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  EXPECT_LT((pm * shrunk - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DistanceKind, ParseAndName) {
  EXPECT_EQ(DistanceKind::parse("euclidean").metric(), Metric::euclidean);
  EXPECT_EQ(DistanceKind::parse("cosine").metric(), Metric::cosine);
  EXPECT_THROW(DistanceKind::parse("mahalanobis"), Error);
  EXPECT_THROW(DistanceKind::parse("chebyshev"), Error);
  EXPECT_EQ(DistanceKind::manhattan().name(), "manhattan");
}
