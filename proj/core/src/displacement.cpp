#include "pctlab/displacement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pctlab/errors.hpp"
#include "pctlab/rng.hpp"

namespace pctlab {

Matrix pool_logits(const SeedPool& pool, std::span<const double> x) {
  if (pool.models.empty()) throw ConfigError("pool_logits: empty pool");
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.row(0).begin());
  std::vector<Vec> rows;
  rows.reserve(pool.models.size());
  for (const auto& m : pool.models) rows.push_back(forward_logits(m, batch).row_vec(0));
  return Matrix::from_rows(rows);
}

namespace {

// First k entries of a uniformly random permutation of [0, n).
std::vector<std::size_t> partial_permutation(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

void mean_of_rows(const Matrix& pool, std::span<const std::size_t> rows, Vec& out) {
  out.assign(pool.cols(), 0.0);
  for (std::size_t r : rows) {
    const auto v = pool.row(r);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
  }
  for (double& v : out) v /= static_cast<double>(rows.size());
}

}  // namespace

DisjointPair draw_disjoint_pair(std::size_t pool_size, std::size_t m, std::uint64_t trial_seed,
                                std::uint64_t stream) {
  if (m < 1) throw ConfigError("draw_disjoint_pair: m must be >= 1");
  if (pool_size < 2 * m)
    throw ConfigError("draw_disjoint_pair: pool of " + std::to_string(pool_size) +
                      " cannot supply two disjoint ensembles of " + std::to_string(m));
  Rng rng(trial_seed, stream);
  auto idx = partial_permutation(pool_size, 2 * m, rng);
  DisjointPair p;
  p.first.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  p.second.assign(idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end());
  return p;
}

DisjointPair draw_cross_pair(std::size_t pool_a, std::size_t pool_b, std::size_t m,
                                std::uint64_t trial_seed, std::uint64_t stream) {
  if (m < 1) throw ConfigError("draw_cross_pair: m must be >= 1");
  if (pool_a < m || pool_b < m)
    throw ConfigError("draw_cross_pair: each pool needs at least " + std::to_string(m) +
                      " members");
  Rng rng(trial_seed, stream);
  DisjointPair p;
  p.first = partial_permutation(pool_a, m, rng);
  p.second = partial_permutation(pool_b, m, rng);
  return p;
}

Vec displacement_norms(const LogitPools& pools, std::size_t m, std::size_t trials,
                       std::uint64_t base_seed) {
  if (trials < 1) throw ConfigError("displacement_norms: trials must be >= 1");
  if (!pools.homogeneous() && pools.first.cols() != pools.second.cols())
    throw ConfigError("displacement_norms: pools disagree on logit dimension");
  const Matrix& second = pools.homogeneous() ? pools.first : pools.second;
  Vec norms(trials);
  Vec a;
  Vec b;
  for (std::size_t t = 0; t < trials; ++t) {
    const DisjointPair pair =
        pools.homogeneous()
            ? draw_disjoint_pair(pools.first.rows(), m, base_seed, t)
            : draw_cross_pair(pools.first.rows(), pools.second.rows(), m, base_seed, t);
    mean_of_rows(pools.first, pair.first, a);
    mean_of_rows(second, pair.second, b);
    norms[t] = std::sqrt(squared_l2_distance(a, b));
  }
  return norms;
}

DisplacementModel fit_gaussian_model(const LogitPools& pools) {
  const GaussianEstimate a = estimate_mean_cov(pools.first);
  const std::size_t d = a.mean.size();
  DisplacementModel model;
  if (pools.homogeneous()) {
    model.delta_mu.assign(d, 0.0);
    model.sigma_prime = 2.0 * a.cov;
    return model;
  }
  if (pools.second.cols() != d) throw ConfigError("fit_gaussian_model: pool dimensions differ");
  const GaussianEstimate b = estimate_mean_cov(pools.second);
  model.delta_mu.resize(d);
  for (std::size_t k = 0; k < d; ++k) model.delta_mu[k] = a.mean[k] - b.mean[k];
  model.sigma_prime = a.cov + b.cov;
  return model;
}

SimulatedPmf simulate_displacement_pmf(const DisplacementModel& model, std::size_t m,
                                       std::size_t n_mc, std::uint64_t seed,
                                       std::span<const double> grid, double bandwidth) {
  if (m < 1) throw ConfigError("simulate_displacement_pmf: m must be >= 1");
  if (n_mc < 100) throw ConfigError("simulate_displacement_pmf: need at least 100 MC samples");
  GaussianEstimate est{model.delta_mu, (1.0 / static_cast<double>(m)) * model.sigma_prime};
  const Matrix draws = sample_mvn(est, n_mc, seed, m);
  SimulatedPmf pmf;
  pmf.norms.resize(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) pmf.norms[i] = l2_norm(draws.row(i));
  pmf.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(pmf.norms);
  pmf.curve = kde_density(pmf.norms, pmf.bandwidth, grid);
  return pmf;
}

double histogram_pmf_tv(const Histogram& hist, const SimulatedPmf& pmf) {
  if (hist.total == 0) throw ConfigError("histogram_pmf_tv: empty histogram");
  if (pmf.norms.empty()) throw ConfigError("histogram_pmf_tv: no simulated norms");
  const double w = hist.bin_width;
  const auto [mn, mx] = std::minmax_element(pmf.norms.begin(), pmf.norms.end());
  const double reach = 8.0 * pmf.bandwidth;
  const auto k_lo = std::min<std::int64_t>(
      0, static_cast<std::int64_t>(std::floor((*mn - reach - hist.origin) / w)));
  const auto k_hi = std::max<std::int64_t>(
      static_cast<std::int64_t>(hist.counts.size()),
      static_cast<std::int64_t>(std::ceil((*mx + reach - hist.origin) / w)));
  double tv = 0.0;
  double covered = 0.0;
  for (std::int64_t k = k_lo; k < k_hi; ++k) {
    const double lo = hist.origin + static_cast<double>(k) * w;
    const double q = kde_interval_mass(pmf.norms, pmf.bandwidth, lo, lo + w);
    double p = 0.0;
    if (k >= 0 && k < static_cast<std::int64_t>(hist.counts.size()))
      p = static_cast<double>(hist.counts[static_cast<std::size_t>(k)]) /
          static_cast<double>(hist.total);
    tv += std::abs(p - q);
    covered += q;
  }
  return 0.5 * (tv + std::max(0.0, 1.0 - covered));
}

std::vector<ScalingRow> scaling_report(const LogitPools& pools, std::span<const std::size_t> sizes,
                                       std::size_t trials, std::uint64_t seed) {
  const DisplacementModel model = fit_gaussian_model(pools);
  const double offset_sq = [&] {
    double s = 0.0;
    for (double v : model.delta_mu) s += v * v;
    return s;
  }();
  std::vector<ScalingRow> rows;
  for (std::size_t m : sizes) {
    if (m > pools.max_ensemble_size())
      throw ConfigError("scaling_report: ensemble size " + std::to_string(m) +
                        " exceeds what the pool supports");
    const Vec norms = displacement_norms(pools, m, trials, seed);
    ScalingRow row;
    row.m = m;
    for (double v : norms) {
      row.mean_norm += v;
      row.mean_sq_norm += v * v;
    }
    row.mean_norm /= static_cast<double>(trials);
    row.mean_sq_norm /= static_cast<double>(trials);
    row.predicted_mean_sq = trace(model.sigma_prime) / static_cast<double>(m) + offset_sq;
    rows.push_back(row);
  }
  return rows;
}

DisplacementStats displacement_study(const LogitPools& pools, std::int64_t input_id,
                                     std::size_t m, const StudyOptions& options) {
  DisplacementStats s;
  s.input_id = input_id;
  s.m = m;
  s.norms = displacement_norms(pools, m, options.trials, options.trial_seed);
  s.histogram = histogram(s.norms, options.bin_width, 0.0);
  s.model = fit_gaussian_model(pools);

  // Grid spans the observed range plus a margin on each side.
  double hi = *std::max_element(s.norms.begin(), s.norms.end());
  double mu_norm = l2_norm(s.model.delta_mu);
  hi = std::max(hi, mu_norm + 4.0 * std::sqrt(std::max(trace(s.model.sigma_prime), 0.0)));
  hi = std::max(hi, options.bin_width) * 1.25;
  const Vec grid = linspace(0.0, hi, options.grid_points);
  s.simulated = simulate_displacement_pmf(s.model, m, options.mc_samples, options.mc_seed, grid);
  s.tv_distance = histogram_pmf_tv(s.histogram, s.simulated);
  return s;
}

}  // namespace pctlab
