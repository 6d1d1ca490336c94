#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pctlab/data.hpp"
#include "pctlab/model.hpp"

namespace pctlab {

/// A rate kept as an exact count ratio so identities can be checked exactly.
struct Rate {
  std::int64_t count = 0;
  std::int64_t total = 0;

  [[nodiscard]] double value() const {
    return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
  }
  /// "count/total (0.1234)"
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Rate&, const Rate&) = default;
};

/// Predictions of one model on an evaluation set. `logits` may be empty.
struct PredictionSet {
  std::string model_tag;
  std::vector<std::int64_t> ids;
  std::vector<int> predictions;
  Matrix logits;

  [[nodiscard]] bool has_logits() const { return logits.rows() == ids.size() && !ids.empty(); }
};

PredictionSet make_prediction_set(const std::string& tag, const MlpModel& model,
                                  const LabeledDataset& eval);

enum class FlipCategory { neg_flip, pos_flip, both_correct, both_wrong };
std::string to_string(FlipCategory c);

struct FlipRecord {
  std::int64_t id = 0;
  int label = 0;
  int old_pred = 0;
  int new_pred = 0;
  FlipCategory category = FlipCategory::both_correct;
  /// Old model's top-1 minus top-2 logit; NaN when logits are unavailable.
  double old_margin = 0.0;
  /// ||new logits - old logits||_2; NaN when unavailable.
  double displacement_norm = 0.0;
};

struct UpdateReport {
  Rate er_old;
  Rate er_new;
  Rate nfr;
  Rate pfr;
  bool margins_available = false;
  std::vector<FlipRecord> records;
  /// Free-form key/value pairs echoed into the text report.
  std::map<std::string, std::string> config_echo;
};

Rate error_rate(const PredictionSet& preds, const LabeledDataset& eval);
Rate negative_flip_rate(const PredictionSet& old_preds, const PredictionSet& new_preds,
                        const LabeledDataset& eval);
Rate positive_flip_rate(const PredictionSet& old_preds, const PredictionSet& new_preds,
                        const LabeledDataset& eval);

/// Per-sample flip accounting. Logit-derived columns are NaN (and
/// margins_available false) unless both sets carry logits of equal width.
UpdateReport flip_report(const PredictionSet& old_preds, const PredictionSet& new_preds,
                         const LabeledDataset& eval);

/// Entry (i, j) is the NFR of model j measured against model i.
Matrix pairwise_nfr_matrix(const std::vector<PredictionSet>& preds, const LabeledDataset& eval);

/// Aggregate over several reports: counts are summed, so the flip identity
/// survives aggregation.
UpdateReport merge_reports(const std::vector<UpdateReport>& reports);

/// Structured text ("key = value" lines) with exact rates.
std::string render_report_text(const UpdateReport& report);
/// id,label,old_pred,new_pred,category,old_margin,displacement_norm
std::string render_flip_csv(const UpdateReport& report);

/// Parses the "key = value" lines written by render_report_text.
std::map<std::string, std::string> parse_key_values(const std::string& text);
Rate parse_rate(const std::string& text);

}  // namespace pctlab
