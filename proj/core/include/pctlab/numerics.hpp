#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pctlab {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  /// Stacks equal-length rows; throws ConfigError on ragged input.
  static Matrix from_rows(std::span<const Vec> rows);

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] Vec row_vec(std::size_t r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
  }

  std::span<double> data() { return data_; }
  [[nodiscard]] std::span<const double> data() const { return data_; }

  [[nodiscard]] Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double trace(const Matrix& m);
double frobenius_norm(const Matrix& m);
double l2_norm(std::span<const double> v);
double squared_l2_distance(std::span<const double> a, std::span<const double> b);

/// Numerically stable log(sum(exp(v))); v must be non-empty.
double log_sum_exp(std::span<const double> v);

/// Max-shifted softmax. Throws ConfigError on empty input.
Vec softmax(std::span<const double> logits);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> v);

struct GaussianEstimate {
  Vec mean;
  Matrix cov;
};

/// Sample mean and unbiased (n - 1) covariance of the rows of `samples`.
GaussianEstimate estimate_mean_cov(const Matrix& samples);
GaussianEstimate estimate_mean_cov(std::span<const Vec> samples);

struct CholeskyFactor {
  Matrix lower;
  /// Diagonal jitter that was actually added before factorizing.
  double jitter = 0.0;
};

/// Lower-triangular L with L * L^T == cov + jitter * I.
///
/// Semidefinite inputs are accepted: a vanishing pivot zeroes its column.
/// If the factor does not reconstruct its input to 1e-8 relative Frobenius
/// error, jitter is escalated (starting at max(jitter, 1e-10 * trace / d),
/// times ten per step, at most three steps) before giving up with a
/// NumericalError.
CholeskyFactor cholesky_factor(const Matrix& cov, double jitter = 0.0);

/// n draws from N(mean, cov) as rows; a pure function of (est, n, seed, stream).
Matrix sample_mvn(const GaussianEstimate& est, std::size_t n, std::uint64_t seed,
                  std::uint64_t stream = 0);

struct DensityCurve {
  Vec query_points;
  Vec densities;
};

/// Silverman's rule of thumb, 1.06 * sigma * n^(-1/5).
///
/// Falls back to 1e-3 when the samples have zero spread so that degenerate
/// inputs still yield a (spiked) density.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian kernel density estimate evaluated at each query point.
DensityCurve kde_density(std::span<const double> samples, double bandwidth,
                         std::span<const double> query_points);

/// Exact probability mass a Gaussian KDE places on [lo, hi).
double kde_interval_mass(std::span<const double> samples, double bandwidth, double lo,
                         double hi);

/// Evenly spaced grid of `count` points covering [lo, hi].
Vec linspace(double lo, double hi, std::size_t count);

/// Fixed-width histogram. counts[i] covers [origin + i*w, origin + (i+1)*w).
///
/// Values below the requested origin move the origin down by whole bins,
/// so the bin lattice {origin + k*w} never changes.
struct Histogram {
  double bin_width = 0.0;
  double origin = 0.0;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  [[nodiscard]] double bin_lo(std::size_t i) const {
    return origin + static_cast<double>(i) * bin_width;
  }
  [[nodiscard]] double bin_hi(std::size_t i) const { return bin_lo(i + 1); }
};

Histogram histogram(std::span<const double> values, double bin_width, double origin = 0.0);

}  // namespace pctlab
