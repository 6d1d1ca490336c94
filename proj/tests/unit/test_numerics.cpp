#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "pctlab/errors.hpp"
#include "pctlab/numerics.hpp"
#include "pctlab/rng.hpp"

using namespace pctlab;

TEST(Rng, SameKeySameStream) {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer) {
  Rng a(42, 0), b(42, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(7), b(7);
  (void)a.split(5).next_u64();
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformMoments) {
  Rng r(1);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng r(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng(3).shuffle(std::span(v));
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Softmax, Symmetric) {
  const Vec p = softmax(Vec{0.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, LnTwo) {
  const Vec p = softmax(Vec{std::log(2.0), 0.0});
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  Rng r(11);
  for (int t = 0; t < 200; ++t) {
    Vec v(5);
    for (double& x : v) x = r.normal(0.0, 5.0);
    const double c = r.normal(0.0, 50.0);
    Vec w = v;
    for (double& x : w) x += c;
    const Vec p = softmax(v), q = softmax(w);
    double sum = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_NEAR(p[k], q[k], 1e-12);
      EXPECT_GT(p[k], 0.0);
      sum += p[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, EmptyThrows) { EXPECT_THROW(softmax(Vec{}), ConfigError); }

TEST(Softmax, LargeLogitsStayFinite) {
  const Vec p = softmax(Vec{1000.0, 999.0});
  EXPECT_TRUE(std::isfinite(p[0]));
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Argmax, LowestIndexOnTies) {
  EXPECT_EQ(argmax(Vec{1, 3, 2}), 1u);
  EXPECT_EQ(argmax(Vec{2, 2, 0}), 0u);
}

TEST(MeanCov, HandExample) {
  const std::vector<Vec> s{{0, 0}, {2, 2}};
  const auto est = estimate_mean_cov(std::span<const Vec>(s));
  EXPECT_EQ(est.mean, (Vec{1, 1}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(est.cov(i, j), 2.0);
}

TEST(MeanCov, IdenticalSamplesGiveZeroCov) {
  const std::vector<Vec> s(5, Vec{1.5, -2.0, 3.0});
  const auto est = estimate_mean_cov(std::span<const Vec>(s));
  for (double v : est.cov.data()) EXPECT_EQ(v, 0.0);
}

TEST(MeanCov, Errors) {
  const std::vector<Vec> one{{1, 2}};
  EXPECT_THROW(estimate_mean_cov(std::span<const Vec>(one)), ConfigError);
  const std::vector<Vec> ragged{{1, 2}, {1}};
  EXPECT_THROW(estimate_mean_cov(std::span<const Vec>(ragged)), ConfigError);
}

TEST(MeanCov, MonteCarloUnitSource) {
  Rng r(5);
  Matrix x(10000, 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    x(i, 0) = r.normal();
    x(i, 1) = r.normal();
  }
  const auto est = estimate_mean_cov(x);
  EXPECT_NEAR(est.cov(0, 0), 1.0, 0.1);
  EXPECT_NEAR(est.cov(1, 1), 1.0, 0.1);
  EXPECT_NEAR(est.cov(0, 1), 0.0, 0.1);
  EXPECT_EQ(est.cov(0, 1), est.cov(1, 0));
}

namespace {

double reconstruction_error(const Matrix& l, const Matrix& target) {
  return frobenius_norm(l * l.transpose() - target) / std::max(frobenius_norm(target), 1e-300);
}

}  // namespace

TEST(Cholesky, Identity) {
  const auto f = cholesky_factor(Matrix::identity(3));
  EXPECT_EQ(f.lower, Matrix::identity(3));
  EXPECT_EQ(f.jitter, 0.0);
}

TEST(Cholesky, Diagonal) {
  Matrix c(2, 2);
  c(0, 0) = 4;
  c(1, 1) = 9;
  const auto f = cholesky_factor(c);
  EXPECT_DOUBLE_EQ(f.lower(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.lower(1, 1), 3.0);
  EXPECT_EQ(f.lower(0, 1), 0.0);
  EXPECT_EQ(f.lower(1, 0), 0.0);
}

TEST(Cholesky, RankDeficientWithJitter) {
  Matrix c(2, 2, 1.0);
  const auto f = cholesky_factor(c, 1e-8);
  Matrix target = c;
  target(0, 0) += f.jitter;
  target(1, 1) += f.jitter;
  EXPECT_LT(reconstruction_error(f.lower, target), 1e-8);
}

TEST(Cholesky, IndefiniteFails) {
  Matrix c(2, 2);
  c(0, 0) = 1;
  c(1, 1) = -1;
  EXPECT_THROW(cholesky_factor(c), NumericalError);
}

TEST(Cholesky, RandomSpdReconstructs) {
  Rng r(21);
  for (int t = 0; t < 20; ++t) {
    Matrix a(4, 4);
    for (double& v : a.data()) v = r.normal();
    const Matrix c = a * a.transpose();
    const auto f = cholesky_factor(c);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) EXPECT_EQ(f.lower(i, j), 0.0);
    Matrix target = c;
    for (std::size_t i = 0; i < 4; ++i) target(i, i) += f.jitter;
    EXPECT_LT(reconstruction_error(f.lower, target), 1e-8);
  }
}

TEST(SampleMvn, StandardNormalMean) {
  GaussianEstimate est{Vec(3, 0.0), Matrix::identity(3)};
  const std::size_t n = 10000;
  const Matrix s = sample_mvn(est, n, 17);
  for (std::size_t k = 0; k < 3; ++k) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += s(i, k);
    EXPECT_LT(std::abs(m / n), 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(SampleMvn, ZeroCovarianceGivesMean) {
  GaussianEstimate est{Vec{1.0, -2.0}, Matrix(2, 2)};
  const Matrix s = sample_mvn(est, 50, 3);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(s(i, 0), 1.0);
    EXPECT_EQ(s(i, 1), -2.0);
  }
}

TEST(SampleMvn, Deterministic) {
  GaussianEstimate est{Vec{0.5, 0.5}, Matrix::identity(2)};
  EXPECT_EQ(sample_mvn(est, 100, 8, 2), sample_mvn(est, 100, 8, 2));
  EXPECT_NE(sample_mvn(est, 100, 8, 2), sample_mvn(est, 100, 8, 3));
}

TEST(SampleMvn, RoundTripRecoversParameters) {
  Matrix cov(2, 2);
  cov(0, 0) = 2.0;
  cov(0, 1) = cov(1, 0) = 0.6;
  cov(1, 1) = 0.5;
  GaussianEstimate truth{Vec{1.0, -3.0}, cov};
  const auto est = estimate_mean_cov(sample_mvn(truth, 100000, 4));
  EXPECT_NEAR(est.mean[0], 1.0, 0.05);
  EXPECT_NEAR(est.mean[1], -3.0, 0.05);
  EXPECT_LT(frobenius_norm(est.cov - cov) / frobenius_norm(cov), 0.10);
}

TEST(Kde, SingleSamplePeak) {
  const Vec s{0.0}, q{0.0};
  const auto d = kde_density(s, 1.0, q);
  EXPECT_NEAR(d.densities[0], 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
}

TEST(Kde, FarQueryDecays) {
  const Vec s{0.0, 0.1}, q{11.0, -12.0};
  for (double v : kde_density(s, 1.0, q).densities) EXPECT_LT(v, 1e-10);
}

TEST(Kde, Symmetric) {
  const Vec s{-1.0, 1.0};
  const Vec q{-0.7, 0.7, -2.5, 2.5};
  const auto d = kde_density(s, 0.4, q);
  EXPECT_DOUBLE_EQ(d.densities[0], d.densities[1]);
  EXPECT_DOUBLE_EQ(d.densities[2], d.densities[3]);
}

TEST(Kde, IntegratesToOneAndBoundedByPeak) {
  Rng r(2);
  Vec s(300);
  for (double& v : s) v = r.normal(3.0, 1.5);
  const double h = silverman_bandwidth(s);
  const Vec grid = linspace(-10, 16, 4001);
  const auto d = kde_density(s, h, grid);
  double area = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    area += 0.5 * (d.densities[i] + d.densities[i - 1]) * (grid[i] - grid[i - 1]);
  EXPECT_NEAR(area, 1.0, 0.02);
  const double peak = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  for (double v : d.densities) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, peak);
  }
}

TEST(Kde, BadBandwidthThrows) {
  const Vec s{0.0}, q{0.0};
  EXPECT_THROW(kde_density(s, 0.0, q), ConfigError);
  EXPECT_THROW(kde_density(s, -1.0, q), ConfigError);
}

TEST(Kde, IntervalMassMatchesQuadrature) {
  const Vec s{0.0, 1.0, 1.7};
  const double h = 0.3;
  const Vec grid = linspace(0.25, 1.25, 20001);
  const auto d = kde_density(s, h, grid);
  double area = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    area += 0.5 * (d.densities[i] + d.densities[i - 1]) * (grid[i] - grid[i - 1]);
  EXPECT_NEAR(kde_interval_mass(s, h, 0.25, 1.25), area, 1e-8);
}

TEST(Silverman, HandValue) {
  const Vec s{1.0, 2.0, 3.0, 4.0};
  const double sd = std::sqrt(5.0 / 3.0);
  EXPECT_NEAR(silverman_bandwidth(s), 1.06 * sd * std::pow(4.0, -0.2), 1e-14);
}

TEST(Silverman, ZeroSpreadFallsBack) {
  const Vec s(10, 2.0);
  EXPECT_GT(silverman_bandwidth(s), 0.0);
}

TEST(Histogram, HandBinning) {
  const Vec v{0.1, 0.2, 0.7};
  const auto h = histogram(v, 0.5, 0.0);
  ASSERT_EQ(h.counts.size(), 2u);
  EXPECT_EQ(h.counts[0], 2);
  EXPECT_EQ(h.counts[1], 1);
  EXPECT_EQ(h.total, 3);
}

TEST(Histogram, Empty) {
  const auto h = histogram(Vec{}, 0.5);
  EXPECT_EQ(h.total, 0);
}

TEST(Histogram, AllEqualSingleBin) {
  const auto h = histogram(Vec(9, 1.3), 0.5);
  int nonzero = 0;
  for (auto c : h.counts) nonzero += c != 0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(h.total, 9);
}

TEST(Histogram, BinRuleAndTotalProperty) {
  Rng r(31);
  for (int t = 0; t < 50; ++t) {
    Vec v(1 + r.below(200));
    for (double& x : v) x = r.normal(0.0, 3.0);
    const double w = 0.1 + r.uniform();
    const auto h = histogram(v, w, 0.0);
    std::int64_t sum = 0;
    for (auto c : h.counts) sum += c;
    EXPECT_EQ(sum, static_cast<std::int64_t>(v.size()));
    EXPECT_EQ(h.total, static_cast<std::int64_t>(v.size()));
    // origin stays on the lattice {k * w}
    EXPECT_NEAR(std::remainder(h.origin, w), 0.0, 1e-9);
    for (double x : v) {
      const auto bin = static_cast<std::size_t>(std::floor((x - h.origin) / w));
      ASSERT_LT(bin, h.counts.size());
      EXPECT_GT(h.counts[bin], 0);
    }
  }
}

TEST(Histogram, BadWidthThrows) { EXPECT_THROW(histogram(Vec{1.0}, 0.0), ConfigError); }
