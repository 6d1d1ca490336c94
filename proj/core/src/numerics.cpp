#include "pctlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "pctlab/errors.hpp"
#include "pctlab/rng.hpp"

namespace pctlab {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::span<const Vec> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw ConfigError("Matrix::from_rows: row " + std::to_string(r) + " has length " +
                        std::to_string(rows[r].size()) + ", expected " +
                        std::to_string(m.cols()));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ConfigError("matrix product: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string("matrix ") + op + ": shapes differ");
}
}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sum");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "difference");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double trace(const Matrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
  return t;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double squared_l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("squared_l2_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw ConfigError("log_sum_exp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw ConfigError("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    s += out[i];
  }
  for (double& p : out) p /= s;
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ConfigError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

GaussianEstimate estimate_mean_cov(const Matrix& samples) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n < 2) throw ConfigError("estimate_mean_cov: need at least 2 samples");
  GaussianEstimate est{Vec(d, 0.0), Matrix(d, d)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) est.mean[j] += samples(r, j);
  for (double& m : est.mean) m /= static_cast<double>(n);

  Vec centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = samples(r, j) - est.mean[j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) est.cov(i, j) += centered[i] * centered[j];
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      est.cov(i, j) /= denom;
      est.cov(j, i) = est.cov(i, j);
    }
  return est;
}

GaussianEstimate estimate_mean_cov(std::span<const Vec> samples) {
  if (samples.size() < 2) throw ConfigError("estimate_mean_cov: need at least 2 samples");
  return estimate_mean_cov(Matrix::from_rows(samples));
}

namespace {

// Cholesky-Banachiewicz that tolerates semidefinite input. Returns false on a
// clearly negative pivot.
bool try_cholesky(const Matrix& a, Matrix& lower) {
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
  const double tiny = 1e-13 * std::max(scale, 1e-300);

  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (pivot < -tiny) return false;
    if (pivot <= tiny) continue;  // zero column
    const double ljj = std::sqrt(pivot);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

bool reconstructs(const Matrix& target, const Matrix& lower) {
  const Matrix diff = lower * lower.transpose() - target;
  const double ref = std::max(frobenius_norm(target), 1e-300);
  const double err = frobenius_norm(diff);
  return err <= 1e-8 * ref || err <= 1e-300;
}

Matrix with_jitter(const Matrix& cov, double jitter) {
  Matrix out = cov;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += jitter;
  return out;
}

}  // namespace

CholeskyFactor cholesky_factor(const Matrix& cov, double jitter) {
  const std::size_t d = cov.rows();
  if (cov.cols() != d) throw ConfigError("cholesky_factor: matrix must be square");
  if (jitter < 0.0) throw ConfigError("cholesky_factor: jitter must be nonnegative");
  for (double v : cov.data())
    if (!std::isfinite(v)) throw NumericalError("cholesky_factor: non-finite entry");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::abs(cov(i, j) - cov(j, i)) > 1e-10 * std::max(1.0, std::abs(cov(i, j))))
        throw ConfigError("cholesky_factor: matrix is not symmetric");

  // Attempt the requested jitter, then a trace-relative start, then up to
  // three escalations by a factor of ten.
  const double base = d == 0 ? 0.0 : 1e-10 * std::abs(trace(cov)) / static_cast<double>(d);
  std::vector<double> schedule{jitter};
  double start = std::max(jitter, base);
  if (start == jitter) start *= 10.0;
  if (start > 0.0) {
    schedule.push_back(start);
    for (int i = 0; i < 3; ++i) schedule.push_back(schedule.back() * 10.0);
  }
  CholeskyFactor result;
  double current = jitter;
  for (double j : schedule) {
    current = j;
    const Matrix target = with_jitter(cov, current);
    if (try_cholesky(target, result.lower) && reconstructs(target, result.lower)) {
      result.jitter = current;
      return result;
    }
  }
  throw NumericalError("cholesky_factor: matrix is not positive semidefinite even after "
                       "jitter escalation (last jitter " + std::to_string(current) + ")");
}

Matrix sample_mvn(const GaussianEstimate& est, std::size_t n, std::uint64_t seed,
                  std::uint64_t stream) {
  const std::size_t d = est.mean.size();
  if (est.cov.rows() != d || est.cov.cols() != d)
    throw ConfigError("sample_mvn: covariance shape does not match mean");
  if (n == 0) throw ConfigError("sample_mvn: n must be at least 1");
  const CholeskyFactor chol = cholesky_factor(est.cov);
  Rng rng(seed, stream);
  Matrix out(n, d);
  Vec z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (double& v : z) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double s = est.mean[i];
      for (std::size_t k = 0; k <= i; ++k) s += chol.lower(i, k) * z[k];
      out(r, i) = s;
    }
  }
  return out;
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n == 0) throw ConfigError("silverman_bandwidth: no samples");
  if (n == 1) return 1e-3;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sigma > 0.0)) return 1e-3;
  return 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
}

DensityCurve kde_density(std::span<const double> samples, double bandwidth,
                         std::span<const double> query_points) {
  if (samples.empty()) throw ConfigError("kde_density: need at least one sample");
  if (!(bandwidth > 0.0)) throw ConfigError("kde_density: bandwidth must be positive");
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  DensityCurve curve;
  curve.query_points.assign(query_points.begin(), query_points.end());
  curve.densities.resize(query_points.size());
  for (std::size_t q = 0; q < query_points.size(); ++q) {
    double s = 0.0;
    for (double x : samples) {
      const double u = (query_points[q] - x) / bandwidth;
      s += std::exp(-0.5 * u * u);
    }
    curve.densities[q] = s * norm;
  }
  return curve;
}

double kde_interval_mass(std::span<const double> samples, double bandwidth, double lo,
                         double hi) {
  if (samples.empty()) throw ConfigError("kde_interval_mass: need at least one sample");
  if (!(bandwidth > 0.0)) throw ConfigError("kde_interval_mass: bandwidth must be positive");
  const double k = 1.0 / (bandwidth * std::numbers::sqrt2);
  double s = 0.0;
  for (double x : samples) s += 0.5 * (std::erf((hi - x) * k) - std::erf((lo - x) * k));
  return s / static_cast<double>(samples.size());
}

Vec linspace(double lo, double hi, std::size_t count) {
  Vec out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

Histogram histogram(std::span<const double> values, double bin_width, double origin) {
  if (!(bin_width > 0.0)) throw ConfigError("histogram: bin_width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  h.origin = origin;
  if (values.empty()) return h;

  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool first = true;
  std::vector<std::int64_t> index(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ConfigError("histogram: non-finite value");
    index[i] = static_cast<std::int64_t>(std::floor((values[i] - origin) / bin_width));
    if (first) {
      lo = hi = index[i];
      first = false;
    }
    lo = std::min(lo, index[i]);
    hi = std::max(hi, index[i]);
  }
  const std::int64_t shift = std::min<std::int64_t>(lo, 0);
  h.origin = origin + static_cast<double>(shift) * bin_width;
  h.counts.assign(static_cast<std::size_t>(hi - shift + 1), 0);
  for (std::int64_t idx : index) ++h.counts[static_cast<std::size_t>(idx - shift)];
  h.total = static_cast<std::int64_t>(values.size());
  return h;
}

}  // namespace pctlab
