#include "resynth/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace resynth {

namespace {

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b)
    throw DimensionError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

PrecisionMatrix PrecisionMatrix::diagonal(std::vector<double> values) {
  if (values.empty()) throw DimensionError("precision dim must be positive");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw SingularityError("diagonal precision entries must be positive and finite");
  }
  const std::size_t dim = values.size();
  return PrecisionMatrix(dim, Representation::diagonal, std::move(values));
}

PrecisionMatrix PrecisionMatrix::full(std::size_t dim, std::vector<double> row_major) {
  if (dim == 0) throw DimensionError("precision dim must be positive");
  if (row_major.size() != dim * dim)
    throw DimensionError("full precision needs dim*dim values");
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      if (std::abs(row_major[i * dim + j] - row_major[j * dim + i]) > 1e-9)
        throw SingularityError("precision matrix is not symmetric");
    }
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      row_major.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw SingularityError("precision matrix is not positive definite");
  return PrecisionMatrix(dim, Representation::full, std::move(row_major));
}

PrecisionMatrix PrecisionMatrix::identity(std::size_t dim) {
  return diagonal(std::vector<double>(dim, 1.0));
}

double PrecisionMatrix::operator()(std::size_t row, std::size_t col) const noexcept {
  if (repr_ == Representation::diagonal) return row == col ? values_[row] : 0.0;
  return values_[row * dim_ + col];
}

double PrecisionMatrix::quadratic_form(std::span<const float> x, std::span<const float> y) const {
  require_same_dim(x.size(), y.size());
  require_same_dim(x.size(), dim_);
  if (repr_ == Representation::diagonal) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
      acc += values_[i] * d * d;
    }
    return acc;
  }
  std::vector<double> d(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    d[i] = static_cast<double>(x[i]) - static_cast<double>(y[i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* row = values_.data() + i * dim_;
    double inner = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) inner += row[j] * d[j];
    acc += d[i] * inner;
  }
  return acc;
}

DistanceKind DistanceKind::mahalanobis(PrecisionMatrix precision) {
  return DistanceKind(Metric::mahalanobis,
                      std::make_shared<const PrecisionMatrix>(std::move(precision)));
}

DistanceKind DistanceKind::parse(std::string_view name) {
  if (name == "euclidean") return euclidean();
  if (name == "manhattan") return manhattan();
  if (name == "cosine") return cosine();
  if (name == "mahalanobis")
    throw ConfigError("mahalanobis distance requires a precision matrix");
  throw ConfigError("unknown distance '" + std::string(name) + "'");
}

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::euclidean: return "euclidean";
    case Metric::manhattan: return "manhattan";
    case Metric::cosine: return "cosine";
    case Metric::mahalanobis: return "mahalanobis";
  }
  return "euclidean";
}

std::string DistanceKind::name() const {
  if (metric_ != Metric::mahalanobis) return std::string(to_string(metric_));
  return std::string("mahalanobis(") + (precision_->is_diagonal() ? "diagonal" : "full") + ")";
}

double distance(const DistanceKind& kind, std::span<const float> x, std::span<const float> y) {
  require_same_dim(x.size(), y.size());
  const std::size_t n = x.size();
  switch (kind.metric()) {
    case Metric::euclidean: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        acc += d * d;
      }
      return std::sqrt(acc);
    }
    case Metric::manhattan: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
      return acc;
    }
    case Metric::cosine: {
      double dot = 0.0, xx = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = x[i], b = y[i];
        dot += a * b;
        xx += a * a;
        yy += b * b;
      }
      if (xx == 0.0 || yy == 0.0) throw DimensionError("cosine distance of a zero vector");
      const double similarity = dot / std::sqrt(xx * yy);
      return std::max(0.0, 1.0 - similarity);
    }
    case Metric::mahalanobis:
      return std::sqrt(std::max(0.0, kind.precision()->quadratic_form(x, y)));
  }
  return 0.0;
}

double distance(const DistanceKind& kind, const FeatureVector& x, const FeatureVector& y) {
  return distance(kind, x.values(), y.values());
}

PrecisionMatrix estimate_precision(std::span<const FeatureVector> samples, double shrinkage,
                                   PrecisionMode mode) {
  if (samples.size() < 2) throw ConfigError("precision estimation needs at least 2 samples");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
    throw ConfigError("shrinkage must lie in [0, 1]");

  const std::size_t dim = samples.front().dim();
  const std::size_t n = samples.size();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < n; ++r) {
    require_same_dim(samples[r].dim(), dim);
    for (std::size_t c = 0; c < dim; ++c) data(r, c) = samples[r][c];
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const auto dn = static_cast<double>(dim);

  if (mode == PrecisionMode::diagonal) {
    Eigen::VectorXd var = centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
    const double target = var.sum() / dn;
    std::vector<double> prec(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double v = (1.0 - shrinkage) * var(static_cast<Eigen::Index>(i)) + shrinkage * target;
      if (!(v > 0.0))
        throw SingularityError("shrunk covariance is singular; use shrinkage > 0");
      prec[i] = 1.0 / v;
    }
    return PrecisionMatrix::diagonal(std::move(prec));
  }

  // With fewer than dim+1 samples C has rank <= n-1 < dim.
  if (shrinkage == 0.0 && n - 1 < dim)
    throw SingularityError("covariance of " + std::to_string(n) + " samples in dim " +
                           std::to_string(dim) + " is singular; use shrinkage > 0");

  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double target = cov.trace() / dn;
  Eigen::MatrixXd shrunk = (1.0 - shrinkage) * cov;
  shrunk.diagonal().array() += shrinkage * target;

  Eigen::LLT<Eigen::MatrixXd> llt(shrunk);
  const double scale = shrunk.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || !(scale > 0.0) ||
      llt.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() < 1e-12 * scale)
    throw SingularityError("shrunk covariance is singular; use shrinkage > 0");

  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(shrunk.rows(), shrunk.cols()));
  inv = 0.5 * (inv + inv.transpose());
  std::vector<double> row_major(dim * dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      row_major[i * dim + j] = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return PrecisionMatrix::full(dim, std::move(row_major));
}

}  // namespace resynth
