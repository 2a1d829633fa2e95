#pragma once

// Distance functions over feature vectors. Inputs are 32-bit, accumulation
// and results are 64-bit.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resynth/error.hpp"
#include "resynth/features.hpp"

namespace resynth {

// Inverse covariance for the Mahalanobis distance. Either a diagonal (dim
// positive values) or a full symmetric positive-definite dim x dim matrix,
// stored row-major.
class PrecisionMatrix {
 public:
  enum class Representation { diagonal, full };

  static PrecisionMatrix diagonal(std::vector<double> values);
  static PrecisionMatrix full(std::size_t dim, std::vector<double> row_major);
  static PrecisionMatrix identity(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  Representation representation() const noexcept { return repr_; }
  bool is_diagonal() const noexcept { return repr_ == Representation::diagonal; }
  std::span<const double> values() const noexcept { return values_; }
  double operator()(std::size_t row, std::size_t col) const noexcept;

  // (x - y)^T P (x - y)
  double quadratic_form(std::span<const float> x, std::span<const float> y) const;

 private:
  PrecisionMatrix(std::size_t dim, Representation repr, std::vector<double> values)
      : dim_(dim), repr_(repr), values_(std::move(values)) {}

  std::size_t dim_;
  Representation repr_;
  std::vector<double> values_;
};

enum class Metric { euclidean, manhattan, cosine, mahalanobis };

class DistanceKind {
 public:
  static DistanceKind euclidean() { return DistanceKind(Metric::euclidean, nullptr); }
  static DistanceKind manhattan() { return DistanceKind(Metric::manhattan, nullptr); }
  static DistanceKind cosine() { return DistanceKind(Metric::cosine, nullptr); }
  static DistanceKind mahalanobis(PrecisionMatrix precision);

  // "euclidean" | "manhattan" | "cosine". Mahalanobis needs a precision and
  // cannot be parsed from a name alone.
  static DistanceKind parse(std::string_view name);

  Metric metric() const noexcept { return metric_; }
  const PrecisionMatrix* precision() const noexcept { return precision_.get(); }
  std::string name() const;

 private:
  DistanceKind(Metric m, std::shared_ptr<const PrecisionMatrix> p)
      : metric_(m), precision_(std::move(p)) {}

  Metric metric_;
  std::shared_ptr<const PrecisionMatrix> precision_;
};

std::string_view to_string(Metric metric) noexcept;

double distance(const DistanceKind& kind, std::span<const float> x, std::span<const float> y);
double distance(const DistanceKind& kind, const FeatureVector& x, const FeatureVector& y);

enum class PrecisionMode { diagonal, full };

inline constexpr double kDefaultShrinkage = 0.1;

// Covariance with 1/(n-1) normalization, shrunk toward trace(C)/dim * I by
// `shrinkage`, then inverted (diagonal mode inverts only the diagonal).
PrecisionMatrix estimate_precision(std::span<const FeatureVector> samples, double shrinkage,
                                   PrecisionMode mode);

}  // namespace resynth
