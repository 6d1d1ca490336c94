#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pctlab/model.hpp"
#include "pctlab/numerics.hpp"

namespace pctlab {

/// Independently seeded models of one architecture trained on the same data.
struct SeedPool {
  std::vector<MlpModel> models;
  std::string arch_tag;
};

/// Member logits at one input, one row per member.
Matrix pool_logits(const SeedPool& pool, std::span<const double> x);

/// Logits of one or two pools at a fixed input. An empty `second` means the
/// homogeneous case: both ensembles are drawn from `first` without overlap.
struct LogitPools {
  Matrix first;
  Matrix second;

  [[nodiscard]] bool homogeneous() const { return second.empty(); }
  [[nodiscard]] std::size_t max_ensemble_size() const {
    return homogeneous() ? first.rows() / 2 : std::min(first.rows(), second.rows());
  }
};

struct DisjointPair {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

/// Two disjoint m-subsets of one pool of size n, uniform over such pairs.
DisjointPair draw_disjoint_pair(std::size_t pool_size, std::size_t m, std::uint64_t trial_seed,
                                std::uint64_t stream = 0);
/// An m-subset of each of two pools.
DisjointPair draw_cross_pair(std::size_t pool_a, std::size_t pool_b, std::size_t m,
                                std::uint64_t trial_seed, std::uint64_t stream = 0);

/// ||mean(E1) - mean(E2)||_2 for `trials` independent disjoint draws;
/// trial t uses stream t of base_seed.
Vec displacement_norms(const LogitPools& pools, std::size_t m, std::size_t trials,
                       std::uint64_t base_seed);

/// Gaussian model of single-model displacement: N(delta_mu, sigma_prime).
struct DisplacementModel {
  Vec delta_mu;
  Matrix sigma_prime;
};

/// Homogeneous: delta_mu = 0 and sigma' = 2 * (pooled) covariance.
/// Heterogeneous: delta_mu = mu_1 - mu_2 and sigma' = Sigma_1 + Sigma_2.
DisplacementModel fit_gaussian_model(const LogitPools& pools);

struct SimulatedPmf {
  DensityCurve curve;
  /// Monte Carlo norms the curve was smoothed from.
  Vec norms;
  double bandwidth = 0.0;
};

/// Norms of n_mc draws from N(delta_mu, sigma'/m), KDE-smoothed onto `grid`.
/// A non-positive bandwidth selects Silverman's rule.
SimulatedPmf simulate_displacement_pmf(const DisplacementModel& model, std::size_t m,
                                       std::size_t n_mc, std::uint64_t seed,
                                       std::span<const double> grid, double bandwidth = 0.0);

/// Total variation distance between a histogram of observed norms and the
/// bin masses of the simulated KDE on the same bin lattice. Simulated mass
/// falling outside every bin (tails) counts toward the distance.
double histogram_pmf_tv(const Histogram& hist, const SimulatedPmf& pmf);

struct ScalingRow {
  std::size_t m = 0;
  double mean_norm = 0.0;
  double mean_sq_norm = 0.0;
  /// trace(sigma'/m) + ||delta_mu||^2 under the fitted Gaussian model.
  double predicted_mean_sq = 0.0;
};

std::vector<ScalingRow> scaling_report(const LogitPools& pools, std::span<const std::size_t> sizes,
                                       std::size_t trials, std::uint64_t seed);

/// Everything produced for one (probe, m) cell of a displacement study.
struct DisplacementStats {
  std::int64_t input_id = 0;
  std::size_t m = 0;
  Vec norms;
  Histogram histogram;
  SimulatedPmf simulated;
  DisplacementModel model;
  double tv_distance = 0.0;
};

struct StudyOptions {
  std::size_t trials = 2000;
  std::size_t mc_samples = 5000;
  double bin_width = 0.5;
  std::size_t grid_points = 200;
  std::uint64_t trial_seed = 0;
  std::uint64_t mc_seed = 1;
};

DisplacementStats displacement_study(const LogitPools& pools, std::int64_t input_id,
                                     std::size_t m, const StudyOptions& options);

}  // namespace pctlab
