#pragma once

#include <cstdint>
#include <vector>

#include "pctlab/data.hpp"
#include "pctlab/losses.hpp"
#include "pctlab/model.hpp"

namespace pctlab {

struct TrainSchedule {
  int epochs = 30;
  double base_lr = 0.1;
  double momentum = 0.9;
  double lr_decay_factor = 0.1;
  int decay_every = 10;
  int batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
  [[nodiscard]] double lr_at(int epoch) const;
};

/// Frozen models the student is regularized toward. Nothing here is ever
/// written to by train().
struct TrainReferences {
  /// Ensemble teacher (or any single reference) for elodi/kd/fd.
  const LogitSource* ensemble = nullptr;
  /// Old models for ldi_single and the legacy term; weighted equally.
  std::vector<const LogitSource*> legacy;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  /// Error of the pre-update mini-batch predictions across the epoch.
  double train_error = 0.0;
  /// Mean raw value of each reference term (see SampleObjective).
  std::vector<double> reference_terms;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochStats> history;
};

/// Mini-batch SGD with momentum on mean-reduced per-sample objectives.
///
/// Batches are drawn from a fresh seeded permutation every epoch; the
/// learning rate decays by lr_decay_factor every decay_every epochs. Throws
/// ConfigError if the objective is missing a reference and NumericalError on
/// a non-finite loss.
TrainResult train(MlpModel model, const LabeledDataset& train_set, const TrainSchedule& schedule,
                  const ObjectiveSpec& objective, const TrainReferences& refs = {});

}  // namespace pctlab
