#pragma once

#include <span>
#include <string>
#include <vector>

#include "pctlab/numerics.hpp"

namespace pctlab {

/// Loss value and its gradient with respect to the student's logits.
struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

enum class SubsetMode { all, top_k };

/// Logit difference inhibition: a hinge on per-class |new - ref| beyond
/// `xi`, raised to the power `p`, summed over the inhibition set.
struct LdiConfig {
  double xi = 0.0;
  int p = 2;
  SubsetMode subset = SubsetMode::all;
  int top_k = 0;

  void validate() const;
};

enum class ObjectiveKind { ce_only, ldi_single, elodi, elodi_plus_legacy_ldi, kd, fd };

ObjectiveKind parse_objective_kind(const std::string& name);
std::string to_string(ObjectiveKind kind);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::ce_only;
  /// Weight of the reference term against cross-entropy.
  double alpha = 0.8;
  /// Share of the ensemble term when mixing in a legacy-model LDI term.
  double lambda = 0.5;
  LdiConfig ldi;
  double kd_temperature = 1.0;
  double fd_base_weight = 1.0;
  double fd_old_correct_weight = 5.0;

  void validate() const;
  [[nodiscard]] bool needs_ensemble() const;
  [[nodiscard]] bool needs_legacy() const;
};

LossGrad cross_entropy(std::span<const double> logits, int label);

/// Classes whose differences are inhibited, ascending. top_k picks the K
/// largest reference logits, preferring lower indices on ties.
std::vector<int> select_inhibition_set(std::span<const double> reference_logits,
                                       const LdiConfig& config);

/// sum_{k in K} max(0, |new_k - ref_k| - xi)^p. No gradient reaches `ref`;
/// the gradient at |d| == xi is taken as zero.
LossGrad ldi(std::span<const double> new_logits, std::span<const double> ref_logits,
             const LdiConfig& config);

/// Elementwise mean of member logit vectors.
Vec average_logits(std::span<const Vec> member_logits);

/// LDI against the averaged member logits.
LossGrad elodi(std::span<const double> new_logits, std::span<const Vec> member_logits,
               const LdiConfig& config);

/// (1 - alpha) * ce + alpha * inhibition.
LossGrad combined_objective(const LossGrad& ce, const LossGrad& inhibition, double alpha);

/// lambda * ensemble_term + (1 - lambda) * legacy_term.
LossGrad legacy_objective(const LossGrad& ensemble_term, const LossGrad& legacy_term,
                          double lambda);

/// tau^2 * KL(softmax(ref / tau) || softmax(new / tau)).
LossGrad kd(std::span<const double> new_logits, std::span<const double> ref_logits,
            double temperature);

/// (base + focal * [old_correct]) * ||new - ref||^2, the logit-matching form
/// of focal distillation.
LossGrad fd(std::span<const double> new_logits, std::span<const double> ref_logits,
            bool old_correct, double base_weight, double focal_weight);

/// Reference logits for one sample. `ensemble` is empty when absent; each
/// legacy entry may cover a prefix of the student's classes.
struct SampleReferences {
  std::span<const double> ensemble;
  std::vector<std::span<const double>> legacy;
};

struct SampleObjective {
  LossGrad total;
  /// Raw reference terms before mixing: the ensemble/teacher term first (if
  /// used) followed by one entry per legacy reference.
  std::vector<double> reference_terms;
};

/// The full per-sample training objective for `spec`.
///
/// ldi_single, kd and fd average their term over the legacy references with
/// equal weights (falling back to the ensemble teacher for kd/fd when no
/// legacy reference is given).
SampleObjective sample_objective(const ObjectiveSpec& spec, std::span<const double> new_logits,
                                 int label, const SampleReferences& refs);

}  // namespace pctlab
