#include "pctlab/ensemble.hpp"

#include <atomic>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "pctlab/errors.hpp"
#include "pctlab/text_io.hpp"

namespace pctlab {

const Vec& LogitsCache::at(std::int64_t id) const {
  const auto it = entries.find(id);
  if (it == entries.end())
    throw ConfigError("offline teacher cache has no entry for sample id " + std::to_string(id));
  return it->second;
}

EnsembleTeacher::EnsembleTeacher(std::vector<MlpModel> members) : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("EnsembleTeacher: need at least one member");
  num_classes_ = members_.front().arch.output_dim;
  for (const auto& m : members_)
    if (m.arch.output_dim != num_classes_)
      throw ConfigError("EnsembleTeacher: member output dimensions differ");
}

void EnsembleTeacher::use_cache(std::shared_ptr<const LogitsCache> cache) {
  if (!cache) throw ConfigError("EnsembleTeacher: null cache");
  if (cache->num_classes != num_classes_)
    throw ConfigError("EnsembleTeacher: cache class count does not match members");
  cache_ = std::move(cache);
}

Matrix EnsembleTeacher::online_logits(const Matrix& batch) const {
  Matrix sum(batch.rows(), static_cast<std::size_t>(num_classes_));
  for (const auto& member : members_) {
    const Matrix l = forward_logits(member, batch);
    auto s = sum.data();
    auto d = l.data();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += d[i];
  }
  const double m = static_cast<double>(members_.size());
  for (double& v : sum.data()) v /= m;
  return sum;
}

Matrix EnsembleTeacher::logits(const Matrix& batch, std::span<const std::int64_t> ids) const {
  if (!cache_) return online_logits(batch);
  if (ids.size() != batch.rows()) throw ConfigError("EnsembleTeacher: ids do not match batch");
  Matrix out(batch.rows(), static_cast<std::size_t>(num_classes_));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const Vec& v = cache_->at(ids[r]);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  threads.clear();
  if (first_error) std::rethrow_exception(first_error);
}

EnsembleTeacher train_ensemble(const MlpArch& arch, const LabeledDataset& ds,
                               const TrainSchedule& schedule, int m, std::uint64_t base_seed,
                               int jobs) {
  if (m < 1) throw ConfigError("train_ensemble: m must be >= 1");
  std::vector<MlpModel> members(static_cast<std::size_t>(m));
  ObjectiveSpec ce;
  ce.kind = ObjectiveKind::ce_only;
  parallel_for(members.size(), jobs, [&](std::size_t i) {
    const std::uint64_t seed = base_seed + i;
    TrainSchedule s = schedule;
    s.shuffle_seed = seed;
    try {
      members[i] = train(init_mlp(arch, seed), ds, s, ce).model;
    } catch (const std::exception& e) {
      throw NumericalError("ensemble member " + std::to_string(i) + " (seed " +
                           std::to_string(seed) + ") failed: " + e.what());
    }
  });
  return EnsembleTeacher(std::move(members));
}

Vec teacher_logits(const EnsembleTeacher& teacher, std::span<const double> x, std::int64_t id) {
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.row(0).begin());
  const std::int64_t ids[] = {id};
  return teacher.logits(batch, ids).row_vec(0);
}

LogitsCache build_offline_cache(const EnsembleTeacher& teacher, const LabeledDataset& ds) {
  LogitsCache cache;
  cache.num_classes = teacher.num_classes();
  const Matrix l = teacher.online_logits(ds.features);
  for (std::size_t r = 0; r < ds.size(); ++r) cache.entries.emplace(ds.ids[r], l.row_vec(r));
  return cache;
}

void write_cache_csv(const LogitsCache& cache, std::ostream& out) {
  out << "id";
  for (int k = 0; k < cache.num_classes; ++k) out << ",l" << k;
  out << '\n';
  for (const auto& [id, v] : cache.entries) out << id << ',' << join_doubles(v) << '\n';
}

LogitsCache read_cache_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IntegrityError("logits cache: missing header");
  const auto header = split_string(trim(line), ',');
  if (header.empty() || header[0] != "id") throw IntegrityError("logits cache: bad header");
  LogitsCache cache;
  cache.num_classes = static_cast<int>(header.size() - 1);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_string(trim(line), ',');
    if (cells.size() != header.size()) throw IntegrityError("logits cache: ragged row");
    Vec v(static_cast<std::size_t>(cache.num_classes));
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = parse_double(cells[k + 1]);
    if (!cache.entries.emplace(parse_int(cells[0]), std::move(v)).second)
      throw IntegrityError("logits cache: duplicate id " + cells[0]);
  }
  return cache;
}

}  // namespace pctlab
