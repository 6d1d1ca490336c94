#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "pctlab/data.hpp"
#include "pctlab/model.hpp"
#include "pctlab/train.hpp"

namespace pctlab {

/// Averaged teacher logits keyed by sample id.
struct LogitsCache {
  int num_classes = 0;
  std::map<std::int64_t, Vec> entries;

  [[nodiscard]] std::size_t size() const { return entries.size(); }
  /// Throws ConfigError naming the id on a miss.
  [[nodiscard]] const Vec& at(std::int64_t id) const;

  friend bool operator==(const LogitsCache&, const LogitsCache&) = default;
};

enum class TeacherMode { online, offline };

/// m frozen members whose logits are averaged. Members may differ in
/// architecture as long as they agree on the number of classes.
///
/// In online mode every request runs all members; in offline mode requests
/// are answered from a LogitsCache and unknown ids are an error.
class EnsembleTeacher final : public LogitSource {
 public:
  explicit EnsembleTeacher(std::vector<MlpModel> members);

  [[nodiscard]] int num_classes() const override { return num_classes_; }
  [[nodiscard]] std::size_t size() const { return members_.size(); }
  [[nodiscard]] const std::vector<MlpModel>& members() const { return members_; }
  [[nodiscard]] TeacherMode mode() const { return cache_ ? TeacherMode::offline : TeacherMode::online; }

  /// Switch to offline serving from `cache`.
  void use_cache(std::shared_ptr<const LogitsCache> cache);
  void use_online() { cache_.reset(); }

  [[nodiscard]] Matrix logits(const Matrix& batch,
                              std::span<const std::int64_t> ids) const override;
  /// Always runs the members, regardless of mode.
  [[nodiscard]] Matrix online_logits(const Matrix& batch) const;

 private:
  std::vector<MlpModel> members_;
  int num_classes_ = 0;
  std::shared_ptr<const LogitsCache> cache_;
};

/// m independent cross-entropy runs with init and shuffle seeds base_seed + i.
/// Members are trained on up to `jobs` threads; the result does not depend on it.
EnsembleTeacher train_ensemble(const MlpArch& arch, const LabeledDataset& ds,
                               const TrainSchedule& schedule, int m, std::uint64_t base_seed,
                               int jobs = 1);

/// Averaged teacher logits for one sample.
Vec teacher_logits(const EnsembleTeacher& teacher, std::span<const double> x, std::int64_t id);

LogitsCache build_offline_cache(const EnsembleTeacher& teacher, const LabeledDataset& ds);

/// CSV with header "id,l0,l1,..." at 17 significant digits.
void write_cache_csv(const LogitsCache& cache, std::ostream& out);
LogitsCache read_cache_csv(std::istream& in);

/// Runs f(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& f);

}  // namespace pctlab
