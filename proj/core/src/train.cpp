#include "pctlab/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "pctlab/errors.hpp"
#include "pctlab/rng.hpp"

namespace pctlab {

void TrainSchedule::validate() const {
  if (epochs < 0) throw ConfigError("schedule: epochs must be >= 0");
  if (!(base_lr > 0.0)) throw ConfigError("schedule: base_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("schedule: momentum must be in [0, 1)");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("schedule: lr_decay_factor must be > 0");
  if (decay_every < 1) throw ConfigError("schedule: decay_every must be >= 1");
  if (batch_size < 1) throw ConfigError("schedule: batch_size must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("schedule: weight_decay must be >= 0");
}

double TrainSchedule::lr_at(int epoch) const {
  return base_lr * std::pow(lr_decay_factor, epoch / decay_every);
}

namespace {

void check_references(const MlpModel& model, const ObjectiveSpec& objective,
                      const TrainReferences& refs) {
  const int c = model.arch.output_dim;
  switch (objective.kind) {
    case ObjectiveKind::ce_only:
      return;
    case ObjectiveKind::ldi_single:
      if (refs.legacy.empty()) throw ConfigError("train: ldi_single requires a reference model");
      break;
    case ObjectiveKind::elodi:
      if (!refs.ensemble) throw ConfigError("train: elodi requires an ensemble teacher");
      break;
    case ObjectiveKind::elodi_plus_legacy_ldi:
      if (!refs.ensemble || refs.legacy.empty())
        throw ConfigError("train: elodi_plus_legacy_ldi requires an ensemble and a legacy model");
      break;
    case ObjectiveKind::kd:
    case ObjectiveKind::fd:
      if (!refs.ensemble && refs.legacy.empty())
        throw ConfigError("train: " + to_string(objective.kind) + " requires a teacher");
      break;
  }
  if (refs.ensemble && refs.ensemble->num_classes() != c)
    throw ConfigError("train: teacher has " + std::to_string(refs.ensemble->num_classes()) +
                      " classes, student has " + std::to_string(c));
  for (const auto* l : refs.legacy)
    if (!l || l->num_classes() > c) throw ConfigError("train: legacy reference has too many classes");
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

TrainResult train(MlpModel model, const LabeledDataset& train_set, const TrainSchedule& schedule,
                  const ObjectiveSpec& objective, const TrainReferences& refs) {
  schedule.validate();
  objective.validate();
  train_set.validate();
  if (train_set.num_classes != model.arch.output_dim)
    throw ConfigError("train: dataset has " + std::to_string(train_set.num_classes) +
                      " classes, model outputs " + std::to_string(model.arch.output_dim));
  if (train_set.dim() != static_cast<std::size_t>(model.arch.input_dim))
    throw ConfigError("train: feature dimension mismatch");
  check_references(model, objective, refs);
  const bool use_ensemble = refs.ensemble && (objective.needs_ensemble() ||
                                              ((objective.kind == ObjectiveKind::kd ||
                                                objective.kind == ObjectiveKind::fd) &&
                                               refs.legacy.empty()));
  const bool use_legacy = objective.kind != ObjectiveKind::ce_only &&
                          objective.kind != ObjectiveKind::elodi && !refs.legacy.empty();

  TrainResult result;
  ParamBuffers velocity = ParamBuffers::zeros_like(model);
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  const auto batch_size = static_cast<std::size_t>(schedule.batch_size);

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(schedule.shuffle_seed, static_cast<std::uint64_t>(epoch)).shuffle(std::span(order));
    const double lr = schedule.lr_at(epoch);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    double loss_sum = 0.0;
    std::size_t errors = 0;
    std::vector<double> ref_sums;

    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Matrix x = gather_rows(train_set.features, rows);
      std::vector<std::int64_t> ids(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) ids[i] = train_set.ids[rows[i]];

      Matrix ens_logits;
      std::vector<Matrix> legacy_logits;
      if (use_ensemble) ens_logits = refs.ensemble->logits(x, ids);
      if (use_legacy)
        for (const auto* l : refs.legacy) legacy_logits.push_back(l->logits(x, ids));

      ForwardResult fwd = forward(model, x);
      Matrix dlogits(rows.size(), fwd.logits.cols());
      const double inv_batch = 1.0 / static_cast<double>(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        SampleReferences sr;
        if (use_ensemble) sr.ensemble = ens_logits.row(i);
        for (const auto& lm : legacy_logits) sr.legacy.push_back(lm.row(i));
        const int label = train_set.labels[rows[i]];
        const SampleObjective obj = sample_objective(objective, fwd.logits.row(i), label, sr);
        if (!std::isfinite(obj.total.loss))
          throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                               ", sample id " + std::to_string(ids[i]) + " (lr " +
                               std::to_string(lr) + ")");
        loss_sum += obj.total.loss;
        if (argmax(fwd.logits.row(i)) != static_cast<std::size_t>(label)) ++errors;
        if (ref_sums.size() < obj.reference_terms.size()) ref_sums.resize(obj.reference_terms.size(), 0.0);
        for (std::size_t t = 0; t < obj.reference_terms.size(); ++t) ref_sums[t] += obj.reference_terms[t];
        auto drow = dlogits.row(i);
        for (std::size_t k = 0; k < drow.size(); ++k) drow[k] = obj.total.grad[k] * inv_batch;
      }
      const ParamBuffers grads = backward(model, fwd.cache, dlogits);
      sgd_momentum_step(model, grads, velocity, lr, schedule.momentum, schedule.weight_decay);
    }
    const double denom = static_cast<double>(std::max<std::size_t>(n, 1));
    stats.mean_loss = loss_sum / denom;
    stats.train_error = static_cast<double>(errors) / denom;
    for (double s : ref_sums) stats.reference_terms.push_back(s / denom);
    result.history.push_back(std::move(stats));
  }
  result.model = std::move(model);
  return result;
}

}  // namespace pctlab
