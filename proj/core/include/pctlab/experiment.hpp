#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pctlab/config.hpp"
#include "pctlab/data.hpp"
#include "pctlab/displacement.hpp"
#include "pctlab/ensemble.hpp"
#include "pctlab/losses.hpp"
#include "pctlab/metrics.hpp"
#include "pctlab/model.hpp"
#include "pctlab/train.hpp"

namespace pctlab {

struct DatasetSpec {
  std::string kind = "blobs";  // blobs | rings
  int classes = 3;
  int dim = 2;
  int n_per_class = 200;
  double separation = 3.0;
  double spread = 1.0;
  double noise = 0.1;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  std::string growth = "none";  // none | half_classes | half_samples
  double growth_fraction = 0.5;
};

enum class ChainScheme { chain, radial, fc };
ChainScheme parse_chain_scheme(const std::string& name);
std::string to_string(ChainScheme s);

/// Base seeds per role. Every role occupies a contiguous, non-overlapping
/// range starting at its base (shifted by `offset`).
struct SeedPlan {
  std::int64_t offset = 0;
  std::uint64_t pool_base = 1000;
  std::uint64_t old_base = 1;
  std::uint64_t new_base = 101;
  std::uint64_t chain_base = 201;
  std::uint64_t teacher_base = 10000;
  std::uint64_t stats = 7;

  [[nodiscard]] std::uint64_t shifted(std::uint64_t base) const {
    return base + static_cast<std::uint64_t>(offset);
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  /// Architecture of the old model, seed pools and chain models by default.
  MlpArch arch;
  /// Architecture of the new model in update runs.
  MlpArch arch_new;
  TrainSchedule schedule;
  /// Objective of the new model (update) or of every non-root model (chain).
  ObjectiveSpec objective;
  /// Objective kind for the old model in update runs; shares objective's parameters.
  ObjectiveKind old_kind = ObjectiveKind::ce_only;
  /// Whom kd/fd distill from: "old" model(s) or the "ensemble" teacher.
  std::string distill_reference = "old";
  int ensemble_m = 4;
  TeacherMode teacher_mode = TeacherMode::online;
  SeedPlan seeds;
  int pairs = 8;

  int chain_length = 3;
  ChainScheme chain_scheme = ChainScheme::chain;
  std::vector<MlpArch> chain_archs;
  ObjectiveKind chain_root_kind = ObjectiveKind::ce_only;

  int pool_size = 16;
  std::optional<MlpArch> pool_second_arch;
  std::string stats_mode = "homogeneous";  // homogeneous | heterogeneous
  std::vector<std::size_t> stats_sizes{1, 2, 4};
  StudyOptions study;
  std::vector<std::int64_t> probes;  // test-split ids; empty = first three

  /// Every resolved key, sorted; hashing this gives config_hash().
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::string config_hash() const;
  /// Hash over the keys that determine seed-pool checkpoints.
  [[nodiscard]] std::string pool_hash() const;

  /// Structural checks, including disjointness of the seed roles.
  void validate() const;
};

/// Parses and validates; unknown keys are rejected.
ExperimentConfig parse_experiment_config(const ConfigFile& file);

struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
};

ExperimentData make_experiment_data(const DatasetSpec& spec);

/// Records which files a run read and why. Entries are sorted on output so
/// parallel runs produce identical logs.
class AccessAudit {
 public:
  void record(const std::string& purpose, const std::string& path);
  [[nodiscard]] std::vector<std::string> lines() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

struct RunOptions {
  std::filesystem::path out_dir = "out";
  int jobs = 1;
};

struct Manifest {
  std::string command;
  std::string config_hash;
  std::string version;
  /// Paths relative to the manifest's directory.
  std::vector<std::string> artifacts;
  /// Main report for consolidation, if any.
  std::string report;
  double wall_clock_ms = 0.0;

  /// Hash over everything except wall-clock time.
  [[nodiscard]] std::string content_hash() const;
  [[nodiscard]] std::string render() const;
  static Manifest parse(const std::string& text);
};

Manifest read_manifest(const std::filesystem::path& path);
/// Checks that every artifact listed next to the manifest exists.
void verify_manifest(const Manifest& manifest, const std::filesystem::path& dir);

struct PoolRunResult {
  Manifest manifest;
  int trained = 0;
  int skipped = 0;
};

/// Trains the configured seed pool(s) into <out>/pool/{a,b}/model_NNN.ckpt.
/// Existing checkpoints with a matching pool hash are reused; a mismatched
/// or corrupted checkpoint raises IntegrityError.
PoolRunResult run_train_pool(const ExperimentConfig& cfg, const RunOptions& opts);

struct PairOutcome {
  UpdateReport report;
  std::vector<EpochStats> new_history;
  std::string new_checkpoint;  // serialized with the run's config hash
};

struct UpdateRunResult {
  Manifest manifest;
  std::vector<PairOutcome> pairs;
  UpdateReport aggregate;
  double mean_er_old = 0.0;
  double mean_er_new = 0.0;
  double mean_nfr = 0.0;
  double mean_pfr = 0.0;
  std::vector<std::string> audit;
};

/// Old/new update pairs evaluated on the held-out split; writes per-pair
/// reports and flip CSVs plus an aggregate report under <out>/update.
UpdateRunResult run_update(const ExperimentConfig& cfg, const RunOptions& opts);

struct ChainRunResult {
  Manifest manifest;
  Matrix pairwise_nfr;
  std::vector<Rate> error_rates;
  std::vector<std::vector<EpochStats>> histories;
  /// For each model, the indices of the predecessors it was regularized toward.
  std::vector<std::vector<int>> references;
  std::vector<std::string> warnings;
};

ChainRunResult run_chain(const ExperimentConfig& cfg, const RunOptions& opts);

struct ProbeStudy {
  std::int64_t probe_id = 0;
  DisplacementModel model;
  std::vector<DisplacementStats> cells;  // one per size
  std::vector<ScalingRow> scaling;
};

struct StatsRunResult {
  Manifest manifest;
  std::vector<ProbeStudy> probes;
  std::vector<double> pool_error_rates_first;
  std::vector<double> pool_error_rates_second;
};

/// Displacement study over the trained pools; needs run_train_pool first.
StatsRunResult run_stats(const ExperimentConfig& cfg, const RunOptions& opts);

struct ReportRow {
  std::string source;
  std::string objective;
  Rate er_old;
  Rate er_new;
  Rate nfr;
  Rate pfr;
  bool identity_holds = false;
};

struct ConsolidatedReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> errors;
};

/// One summary row per update manifest; writes summary.txt and summary.csv.
ConsolidatedReport run_report(const std::vector<std::filesystem::path>& manifests,
                              const std::filesystem::path& out_dir);

}  // namespace pctlab
