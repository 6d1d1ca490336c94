#include "pctlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pctlab/errors.hpp"

namespace pctlab {

void LdiConfig::validate() const {
  if (!(xi >= 0.0)) throw ConfigError("ldi: xi must be >= 0");
  if (p < 1) throw ConfigError("ldi: p must be a positive integer");
  if (subset == SubsetMode::top_k && top_k < 1) throw ConfigError("ldi: top_k must be >= 1");
}

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "ce_only") return ObjectiveKind::ce_only;
  if (name == "ldi_single") return ObjectiveKind::ldi_single;
  if (name == "elodi") return ObjectiveKind::elodi;
  if (name == "elodi_plus_legacy_ldi") return ObjectiveKind::elodi_plus_legacy_ldi;
  if (name == "kd") return ObjectiveKind::kd;
  if (name == "fd") return ObjectiveKind::fd;
  throw ConfigError("unknown objective kind '" + name + "'");
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::ce_only: return "ce_only";
    case ObjectiveKind::ldi_single: return "ldi_single";
    case ObjectiveKind::elodi: return "elodi";
    case ObjectiveKind::elodi_plus_legacy_ldi: return "elodi_plus_legacy_ldi";
    case ObjectiveKind::kd: return "kd";
    case ObjectiveKind::fd: return "fd";
  }
  return "?";
}

void ObjectiveSpec::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("objective: alpha must be in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("objective: lambda must be in [0, 1]");
  if (!(kd_temperature > 0.0)) throw ConfigError("objective: kd temperature must be > 0");
  if (fd_base_weight < 0.0 || fd_old_correct_weight < 0.0)
    throw ConfigError("objective: fd weights must be >= 0");
  ldi.validate();
}

bool ObjectiveSpec::needs_ensemble() const {
  return kind == ObjectiveKind::elodi || kind == ObjectiveKind::elodi_plus_legacy_ldi;
}

bool ObjectiveSpec::needs_legacy() const {
  return kind == ObjectiveKind::ldi_single || kind == ObjectiveKind::elodi_plus_legacy_ldi;
}

LossGrad cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " out of range");
  LossGrad out;
  out.loss = log_sum_exp(logits) - logits[static_cast<std::size_t>(label)];
  out.grad = softmax(logits);
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

std::vector<int> select_inhibition_set(std::span<const double> reference_logits,
                                       const LdiConfig& config) {
  const int c = static_cast<int>(reference_logits.size());
  std::vector<int> idx(static_cast<std::size_t>(c));
  std::iota(idx.begin(), idx.end(), 0);
  if (config.subset == SubsetMode::all) return idx;
  if (config.top_k < 1 || config.top_k > c)
    throw ConfigError("select_inhibition_set: K=" + std::to_string(config.top_k) +
                      " outside [1, " + std::to_string(c) + "]");
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return reference_logits[static_cast<std::size_t>(a)] >
           reference_logits[static_cast<std::size_t>(b)];
  });
  idx.resize(static_cast<std::size_t>(config.top_k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

double ipow(double base, int exponent) {
  double r = 1.0;
  for (int i = 0; i < exponent; ++i) r *= base;
  return r;
}

}  // namespace

LossGrad ldi(std::span<const double> new_logits, std::span<const double> ref_logits,
             const LdiConfig& config) {
  if (new_logits.size() != ref_logits.size())
    throw ConfigError("ldi: logit dimensions differ (" + std::to_string(new_logits.size()) +
                      " vs " + std::to_string(ref_logits.size()) + ")");
  config.validate();
  LossGrad out;
  out.grad.assign(new_logits.size(), 0.0);
  for (int k : select_inhibition_set(ref_logits, config)) {
    const auto i = static_cast<std::size_t>(k);
    const double d = new_logits[i] - ref_logits[i];
    const double excess = std::abs(d) - config.xi;
    if (excess <= 0.0) continue;
    out.loss += ipow(excess, config.p);
    const double slope = static_cast<double>(config.p) * ipow(excess, config.p - 1);
    out.grad[i] = d > 0.0 ? slope : -slope;
  }
  return out;
}

Vec average_logits(std::span<const Vec> member_logits) {
  if (member_logits.empty()) throw ConfigError("average_logits: no members");
  const std::size_t c = member_logits.front().size();
  Vec avg(c, 0.0);
  for (const auto& m : member_logits) {
    if (m.size() != c) throw ConfigError("average_logits: member output dimensions differ");
    for (std::size_t k = 0; k < c; ++k) avg[k] += m[k];
  }
  for (double& v : avg) v /= static_cast<double>(member_logits.size());
  return avg;
}

LossGrad elodi(std::span<const double> new_logits, std::span<const Vec> member_logits,
               const LdiConfig& config) {
  const Vec ref = average_logits(member_logits);
  return ldi(new_logits, ref, config);
}

LossGrad combined_objective(const LossGrad& ce, const LossGrad& inhibition, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("combined_objective: alpha not in [0, 1]");
  if (ce.grad.size() != inhibition.grad.size())
    throw ConfigError("combined_objective: gradient sizes differ");
  LossGrad out;
  out.loss = (1.0 - alpha) * ce.loss + alpha * inhibition.loss;
  out.grad.resize(ce.grad.size());
  for (std::size_t k = 0; k < out.grad.size(); ++k)
    out.grad[k] = (1.0 - alpha) * ce.grad[k] + alpha * inhibition.grad[k];
  return out;
}

LossGrad legacy_objective(const LossGrad& ensemble_term, const LossGrad& legacy_term,
                          double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("legacy_objective: lambda not in [0, 1]");
  if (ensemble_term.grad.size() != legacy_term.grad.size())
    throw ConfigError("legacy_objective: gradient sizes differ");
  LossGrad out;
  out.loss = lambda * ensemble_term.loss + (1.0 - lambda) * legacy_term.loss;
  out.grad.resize(ensemble_term.grad.size());
  for (std::size_t k = 0; k < out.grad.size(); ++k)
    out.grad[k] = lambda * ensemble_term.grad[k] + (1.0 - lambda) * legacy_term.grad[k];
  return out;
}

LossGrad kd(std::span<const double> new_logits, std::span<const double> ref_logits,
            double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("kd: temperature must be > 0");
  if (new_logits.size() != ref_logits.size()) throw ConfigError("kd: logit dimensions differ");
  const std::size_t c = new_logits.size();
  Vec new_scaled(c);
  Vec ref_scaled(c);
  for (std::size_t k = 0; k < c; ++k) {
    new_scaled[k] = new_logits[k] / temperature;
    ref_scaled[k] = ref_logits[k] / temperature;
  }
  const double lse_new = log_sum_exp(new_scaled);
  const double lse_ref = log_sum_exp(ref_scaled);
  const Vec p_ref = softmax(ref_scaled);
  const Vec p_new = softmax(new_scaled);
  const double t2 = temperature * temperature;
  LossGrad out;
  double kl = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    if (p_ref[k] == 0.0) continue;
    // log p_ref - log p_new, written in terms of the scaled logits.
    kl += p_ref[k] * ((ref_scaled[k] - lse_ref) - (new_scaled[k] - lse_new));
  }
  out.loss = t2 * kl;
  out.grad.resize(c);
  for (std::size_t k = 0; k < c; ++k) out.grad[k] = temperature * (p_new[k] - p_ref[k]);
  return out;
}

LossGrad fd(std::span<const double> new_logits, std::span<const double> ref_logits,
            bool old_correct, double base_weight, double focal_weight) {
  if (base_weight < 0.0 || focal_weight < 0.0) throw ConfigError("fd: weights must be >= 0");
  if (new_logits.size() != ref_logits.size()) throw ConfigError("fd: logit dimensions differ");
  const double w = base_weight + (old_correct ? focal_weight : 0.0);
  LossGrad out;
  out.grad.resize(new_logits.size());
  double s = 0.0;
  for (std::size_t k = 0; k < new_logits.size(); ++k) {
    const double d = new_logits[k] - ref_logits[k];
    s += d * d;
    out.grad[k] = 2.0 * w * d;
  }
  out.loss = w * s;
  return out;
}

namespace {

// Applies `term` to the first ref.size() logits and pads the gradient.
template <typename Term>
LossGrad on_prefix(std::span<const double> new_logits, std::span<const double> ref, Term&& term) {
  if (ref.size() > new_logits.size() || ref.empty())
    throw ConfigError("reference logits have " + std::to_string(ref.size()) +
                      " classes, student has " + std::to_string(new_logits.size()));
  LossGrad r = term(new_logits.first(ref.size()), ref);
  r.grad.resize(new_logits.size(), 0.0);
  return r;
}

LossGrad average_terms(const std::vector<LossGrad>& terms, std::size_t c) {
  LossGrad out;
  out.grad.assign(c, 0.0);
  const double w = 1.0 / static_cast<double>(terms.size());
  for (const auto& t : terms) {
    out.loss += w * t.loss;
    for (std::size_t k = 0; k < c; ++k) out.grad[k] += w * t.grad[k];
  }
  return out;
}

}  // namespace

SampleObjective sample_objective(const ObjectiveSpec& spec, std::span<const double> new_logits,
                                 int label, const SampleReferences& refs) {
  SampleObjective result;
  const LossGrad ce = cross_entropy(new_logits, label);
  const std::size_t c = new_logits.size();

  auto legacy_terms = [&](auto&& term) {
    std::vector<LossGrad> terms;
    for (const auto& ref : refs.legacy) {
      terms.push_back(on_prefix(new_logits, ref, term));
      result.reference_terms.push_back(terms.back().loss);
    }
    return terms;
  };
  // A legacy head over fewer classes cannot supply more than its own top-K.
  auto ldi_term = [&](std::span<const double> n, std::span<const double> r) {
    LdiConfig cfg = spec.ldi;
    if (cfg.subset == SubsetMode::top_k) cfg.top_k = std::min(cfg.top_k, static_cast<int>(r.size()));
    return ldi(n, r, cfg);
  };

  switch (spec.kind) {
    case ObjectiveKind::ce_only:
      result.total = ce;
      return result;
    case ObjectiveKind::ldi_single: {
      if (refs.legacy.empty()) throw ConfigError("ldi_single objective needs a reference model");
      const auto terms = legacy_terms(ldi_term);
      result.total = combined_objective(ce, average_terms(terms, c), spec.alpha);
      return result;
    }
    case ObjectiveKind::elodi: {
      if (refs.ensemble.empty()) throw ConfigError("elodi objective needs an ensemble teacher");
      const LossGrad term = ldi(new_logits, refs.ensemble, spec.ldi);
      result.reference_terms.push_back(term.loss);
      result.total = combined_objective(ce, term, spec.alpha);
      return result;
    }
    case ObjectiveKind::elodi_plus_legacy_ldi: {
      if (refs.ensemble.empty() || refs.legacy.empty())
        throw ConfigError("elodi_plus_legacy_ldi needs both an ensemble and a legacy model");
      const LossGrad ens = ldi(new_logits, refs.ensemble, spec.ldi);
      result.reference_terms.push_back(ens.loss);
      const auto terms = legacy_terms(ldi_term);
      const LossGrad mixed = legacy_objective(ens, average_terms(terms, c), spec.lambda);
      result.total = combined_objective(ce, mixed, spec.alpha);
      return result;
    }
    case ObjectiveKind::kd:
    case ObjectiveKind::fd: {
      auto term = [&](std::span<const double> n, std::span<const double> r) {
        if (spec.kind == ObjectiveKind::kd) return kd(n, r, spec.kd_temperature);
        const bool old_correct = static_cast<std::size_t>(label) < r.size() &&
                                 argmax(r) == static_cast<std::size_t>(label);
        return fd(n, r, old_correct, spec.fd_base_weight, spec.fd_old_correct_weight);
      };
      std::vector<LossGrad> terms;
      if (!refs.legacy.empty()) {
        if (spec.kind == ObjectiveKind::kd)
          for (const auto& r : refs.legacy)
            if (r.size() != c) throw ConfigError("kd needs references over the same classes");
        terms = legacy_terms(term);
      } else if (!refs.ensemble.empty()) {
        terms.push_back(term(new_logits, refs.ensemble));
        result.reference_terms.push_back(terms.back().loss);
      } else {
        throw ConfigError(to_string(spec.kind) + " objective needs a reference");
      }
      result.total = combined_objective(ce, average_terms(terms, c), spec.alpha);
      return result;
    }
  }
  throw ConfigError("unknown objective kind");
}

}  // namespace pctlab
