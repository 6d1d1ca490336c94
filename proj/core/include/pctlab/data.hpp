#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pctlab/numerics.hpp"

namespace pctlab {

/// Feature rows with integer class labels and stable sample ids.
///
/// Freshly generated sets have ids 0..n-1; subsets produced by split()
/// keep the ids of the parent set.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
  int num_classes = 0;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::size_t dim() const { return features.cols(); }

  /// Checks shape agreement, label range, finiteness and id uniqueness.
  void validate() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Isotropic Gaussian blobs around seeded, well-separated centers.
LabeledDataset make_blobs(int num_classes, int dim, int n_per_class, double separation,
                          double spread, std::uint64_t seed);

/// Concentric 2-D annuli, class k at radius k + 1 with radial Gaussian noise.
LabeledDataset make_rings(int num_classes, int n_per_class, double noise, std::uint64_t seed);

/// Class centers used by make_blobs, exposed for oracle checks.
Matrix blob_centers(int num_classes, int dim, double separation, std::uint64_t seed);

enum class SplitMode { half_classes, half_samples, train_test };

struct SplitSpec {
  SplitMode mode = SplitMode::train_test;
  double fraction = 0.5;
  std::uint64_t seed = 0;
};

/// half_classes: (lowest ceil(f*C) classes, full set).
/// half_samples: (seeded per-class fraction of samples, full set).
/// train_test:   disjoint stratified (train, test) at `fraction`, rounding toward train.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec);

/// Samples whose label is below `num_classes`, relabeled to that many classes.
LabeledDataset restrict_to_classes(const LabeledDataset& ds, int num_classes);

SplitMode parse_split_mode(const std::string& name);
std::string to_string(SplitMode mode);

/// Columnar CSV: header "id,label,x0,x1,...", 17 significant digits.
void write_csv(const LabeledDataset& ds, std::ostream& out);
/// Inverse of write_csv; num_classes defaults to max label + 1.
LabeledDataset read_csv(std::istream& in, int num_classes = 0);

}  // namespace pctlab
