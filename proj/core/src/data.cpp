#include "pctlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <string>

#include "pctlab/errors.hpp"
#include "pctlab/rng.hpp"
#include "pctlab/text_io.hpp"

namespace pctlab {

namespace {

constexpr int kCenterAttempts = 1000;

// Stream ids for the generators so centers and samples never share draws.
constexpr std::uint64_t kCenterStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kSplitStream = 3;

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.features = Matrix(rows.size(), ds.dim());
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = ds.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(ds.labels[rows[i]]);
    out.ids.push_back(ds.ids[rows[i]]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> rows_by_class(const LabeledDataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return by_class;
}

}  // namespace

void LabeledDataset::validate() const {
  if (features.rows() != labels.size() || ids.size() != labels.size())
    throw ConfigError("dataset: features, labels and ids disagree in length");
  if (num_classes < 1) throw ConfigError("dataset: num_classes must be positive");
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ConfigError("dataset: label " + std::to_string(labels[i]) + " out of range");
    if (!seen.insert(ids[i]).second)
      throw ConfigError("dataset: duplicate id " + std::to_string(ids[i]));
  }
  for (double v : features.data())
    if (!std::isfinite(v)) throw ConfigError("dataset: non-finite feature");
}

Matrix blob_centers(int num_classes, int dim, double separation, std::uint64_t seed) {
  if (num_classes < 2 || dim < 2) throw ConfigError("make_blobs: need C >= 2 and d >= 2");
  if (!(separation > 0.0)) throw ConfigError("make_blobs: separation must be positive");
  // Tight box so that neighbouring classes sit near the requested separation.
  const double per_axis = std::ceil(std::pow(static_cast<double>(num_classes), 1.0 / dim));
  const double half_side = 0.5 * separation * per_axis;
  Rng rng(seed, kCenterStream);
  Matrix centers(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim));
  for (int c = 0; c < num_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kCenterAttempts && !placed; ++attempt) {
      auto row = centers.row(static_cast<std::size_t>(c));
      for (double& v : row) v = (2.0 * rng.uniform() - 1.0) * half_side;
      placed = true;
      for (int o = 0; o < c && placed; ++o)
        placed = std::sqrt(squared_l2_distance(row, centers.row(static_cast<std::size_t>(o)))) >=
                 separation;
    }
    if (!placed)
      throw ConfigError("make_blobs: could not place " + std::to_string(num_classes) +
                        " centers at separation " + format_double(separation));
  }
  return centers;
}

LabeledDataset make_blobs(int num_classes, int dim, int n_per_class, double separation,
                          double spread, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("make_blobs: n_per_class must be positive");
  if (!(spread > 0.0)) throw ConfigError("make_blobs: spread must be positive");
  const Matrix centers = blob_centers(num_classes, dim, separation, seed);

  LabeledDataset ds;
  ds.num_classes = num_classes;
  const auto n = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(n_per_class);
  ds.features = Matrix(n, static_cast<std::size_t>(dim));
  Rng rng(seed, kSampleStream);
  std::size_t r = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++r) {
      for (int j = 0; j < dim; ++j)
        ds.features(r, static_cast<std::size_t>(j)) =
            centers(static_cast<std::size_t>(c), static_cast<std::size_t>(j)) +
            spread * rng.normal();
      ds.labels.push_back(c);
      ds.ids.push_back(static_cast<std::int64_t>(r));
    }
  }
  return ds;
}

LabeledDataset make_rings(int num_classes, int n_per_class, double noise, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("make_rings: need C >= 2");
  if (n_per_class < 1) throw ConfigError("make_rings: n_per_class must be positive");
  if (noise < 0.0) throw ConfigError("make_rings: noise must be nonnegative");
  LabeledDataset ds;
  ds.num_classes = num_classes;
  const auto n = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(n_per_class);
  ds.features = Matrix(n, 2);
  Rng rng(seed, kSampleStream);
  std::size_t r = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++r) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      const double radius = static_cast<double>(c + 1) + noise * rng.normal();
      ds.features(r, 0) = radius * std::cos(theta);
      ds.features(r, 1) = radius * std::sin(theta);
      ds.labels.push_back(c);
      ds.ids.push_back(static_cast<std::int64_t>(r));
    }
  }
  return ds;
}

LabeledDataset restrict_to_classes(const LabeledDataset& ds, int num_classes) {
  if (num_classes < 1 || num_classes > ds.num_classes)
    throw ConfigError("restrict_to_classes: class count out of range");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] < num_classes) rows.push_back(i);
  LabeledDataset out = subset(ds, rows);
  out.num_classes = num_classes;
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec) {
  if (!(spec.fraction > 0.0) || spec.fraction > 1.0)
    throw ConfigError("split: fraction must be in (0, 1]");
  ds.validate();

  switch (spec.mode) {
    case SplitMode::half_classes: {
      const int kept = static_cast<int>(std::ceil(spec.fraction * ds.num_classes - 1e-12));
      // Lowest class ids are kept, so the compact relabeling is the identity.
      return {restrict_to_classes(ds, std::max(kept, 1)), ds};
    }
    case SplitMode::half_samples: {
      Rng rng(spec.seed, kSplitStream);
      std::vector<std::size_t> keep;
      auto by_class = rows_by_class(ds);
      for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        const auto take = static_cast<std::size_t>(
            std::floor(spec.fraction * static_cast<double>(rows.size()) + 1e-9));
        if (take == 0)
          throw ConfigError("split: class " + std::to_string(c) +
                            " would receive no samples under half_samples");
        Rng class_rng = rng.split(c);
        class_rng.shuffle(std::span<std::size_t>(rows));
        keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
      }
      std::sort(keep.begin(), keep.end());
      return {subset(ds, keep), ds};
    }
    case SplitMode::train_test: {
      Rng rng(spec.seed, kSplitStream);
      std::vector<std::size_t> train;
      std::vector<std::size_t> test;
      auto by_class = rows_by_class(ds);
      for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        auto take = static_cast<std::size_t>(
            std::ceil(spec.fraction * static_cast<double>(rows.size()) - 1e-9));
        if (rows.size() >= 2) take = std::min(take, rows.size() - 1);
        Rng class_rng = rng.split(c);
        class_rng.shuffle(std::span<std::size_t>(rows));
        train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
        test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
      }
      std::sort(train.begin(), train.end());
      std::sort(test.begin(), test.end());
      return {subset(ds, train), subset(ds, test)};
    }
  }
  throw ConfigError("split: unknown mode");
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "half_classes") return SplitMode::half_classes;
  if (name == "half_samples") return SplitMode::half_samples;
  if (name == "train_test") return SplitMode::train_test;
  throw ConfigError("unknown split mode '" + name + "'");
}

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::half_classes: return "half_classes";
    case SplitMode::half_samples: return "half_samples";
    case SplitMode::train_test: return "train_test";
  }
  return "?";
}

void write_csv(const LabeledDataset& ds, std::ostream& out) {
  out << "id,label";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",x" << j;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << ds.ids[i] << ',' << ds.labels[i] << ',' << join_doubles(ds.features.row(i)) << '\n';
}

LabeledDataset read_csv(std::istream& in, int num_classes) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("read_csv: missing header");
  const auto header = split_string(trim(line), ',');
  if (header.size() < 2 || header[0] != "id" || header[1] != "label")
    throw ConfigError("read_csv: header must start with id,label");
  const std::size_t dim = header.size() - 2;

  std::vector<Vec> rows;
  LabeledDataset ds;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_string(trim(line), ',');
    if (cells.size() != header.size())
      throw ConfigError("read_csv: row " + std::to_string(rows.size()) + " has wrong arity");
    ds.ids.push_back(parse_int(cells[0]));
    ds.labels.push_back(static_cast<int>(parse_int(cells[1])));
    Vec x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = parse_double(cells[j + 2]);
    rows.push_back(std::move(x));
  }
  ds.features = rows.empty() ? Matrix(0, dim) : Matrix::from_rows(rows);
  int max_label = -1;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  ds.validate();
  return ds;
}

}  // namespace pctlab
