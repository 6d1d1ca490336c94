#include "pctlab/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pctlab/errors.hpp"
#include "pctlab/text_io.hpp"

namespace pctlab {

std::string Rate::str() const {
  return std::to_string(count) + "/" + std::to_string(total) + " (" + format_fixed4(value()) + ")";
}

PredictionSet make_prediction_set(const std::string& tag, const MlpModel& model,
                                  const LabeledDataset& eval) {
  Predictions p = predict_logits(model, eval.features);
  return {tag, eval.ids, std::move(p.labels), std::move(p.logits)};
}

std::string to_string(FlipCategory c) {
  switch (c) {
    case FlipCategory::neg_flip: return "neg_flip";
    case FlipCategory::pos_flip: return "pos_flip";
    case FlipCategory::both_correct: return "both_correct";
    case FlipCategory::both_wrong: return "both_wrong";
  }
  return "?";
}

namespace {

void check_aligned(const PredictionSet& p, const LabeledDataset& eval) {
  if (p.ids != eval.ids || p.predictions.size() != eval.labels.size())
    throw ConfigError("prediction set '" + p.model_tag + "' is not aligned with the evaluation ids");
}

struct Counts {
  std::int64_t n = 0, old_wrong = 0, new_wrong = 0, neg = 0, pos = 0;
};

Counts count_flips(const PredictionSet& o, const PredictionSet& nw, const LabeledDataset& eval) {
  check_aligned(o, eval);
  check_aligned(nw, eval);
  Counts c;
  c.n = static_cast<std::int64_t>(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const bool old_ok = o.predictions[i] == eval.labels[i];
    const bool new_ok = nw.predictions[i] == eval.labels[i];
    c.old_wrong += !old_ok;
    c.new_wrong += !new_ok;
    c.neg += old_ok && !new_ok;
    c.pos += !old_ok && new_ok;
  }
  return c;
}

double top2_margin(std::span<const double> l) {
  if (l.size() < 2) return 0.0;
  double a = -std::numeric_limits<double>::infinity();
  double b = a;
  for (double v : l) {
    if (v > a) {
      b = a;
      a = v;
    } else if (v > b) {
      b = v;
    }
  }
  return a - b;
}

}  // namespace

Rate error_rate(const PredictionSet& preds, const LabeledDataset& eval) {
  check_aligned(preds, eval);
  Rate r{0, static_cast<std::int64_t>(eval.size())};
  for (std::size_t i = 0; i < eval.size(); ++i) r.count += preds.predictions[i] != eval.labels[i];
  return r;
}

Rate negative_flip_rate(const PredictionSet& old_preds, const PredictionSet& new_preds,
                        const LabeledDataset& eval) {
  const Counts c = count_flips(old_preds, new_preds, eval);
  return {c.neg, c.n};
}

Rate positive_flip_rate(const PredictionSet& old_preds, const PredictionSet& new_preds,
                        const LabeledDataset& eval) {
  const Counts c = count_flips(old_preds, new_preds, eval);
  return {c.pos, c.n};
}

UpdateReport flip_report(const PredictionSet& old_preds, const PredictionSet& new_preds,
                         const LabeledDataset& eval) {
  const Counts c = count_flips(old_preds, new_preds, eval);
  UpdateReport rep;
  rep.er_old = {c.old_wrong, c.n};
  rep.er_new = {c.new_wrong, c.n};
  rep.nfr = {c.neg, c.n};
  rep.pfr = {c.pos, c.n};
  rep.margins_available = old_preds.has_logits() && new_preds.has_logits() &&
                          old_preds.logits.cols() == new_preds.logits.cols();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.records.reserve(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    FlipRecord r;
    r.id = eval.ids[i];
    r.label = eval.labels[i];
    r.old_pred = old_preds.predictions[i];
    r.new_pred = new_preds.predictions[i];
    const bool old_ok = r.old_pred == r.label;
    const bool new_ok = r.new_pred == r.label;
    r.category = old_ok ? (new_ok ? FlipCategory::both_correct : FlipCategory::neg_flip)
                        : (new_ok ? FlipCategory::pos_flip : FlipCategory::both_wrong);
    if (rep.margins_available) {
      r.old_margin = top2_margin(old_preds.logits.row(i));
      r.displacement_norm =
          std::sqrt(squared_l2_distance(old_preds.logits.row(i), new_preds.logits.row(i)));
    } else {
      r.old_margin = nan;
      r.displacement_norm = nan;
    }
    rep.records.push_back(r);
  }
  return rep;
}

Matrix pairwise_nfr_matrix(const std::vector<PredictionSet>& preds, const LabeledDataset& eval) {
  if (preds.size() < 2) throw ConfigError("pairwise_nfr_matrix: need at least two prediction sets");
  Matrix m(preds.size(), preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < preds.size(); ++j)
      m(i, j) = i == j ? (check_aligned(preds[i], eval), 0.0)
                       : negative_flip_rate(preds[i], preds[j], eval).value();
  return m;
}

UpdateReport merge_reports(const std::vector<UpdateReport>& reports) {
  UpdateReport out;
  out.margins_available = !reports.empty();
  for (const auto& r : reports) {
    auto add = [](Rate& a, const Rate& b) {
      a.count += b.count;
      a.total += b.total;
    };
    add(out.er_old, r.er_old);
    add(out.er_new, r.er_new);
    add(out.nfr, r.nfr);
    add(out.pfr, r.pfr);
    out.margins_available = out.margins_available && r.margins_available;
  }
  return out;
}

std::string render_report_text(const UpdateReport& report) {
  std::ostringstream out;
  out << "# pctlab update report\n";
  for (const auto& [k, v] : report.config_echo) out << k << " = " << v << '\n';
  out << "samples = " << report.er_old.total << '\n';
  out << "er_old = " << report.er_old.str() << '\n';
  out << "er_new = " << report.er_new.str() << '\n';
  out << "nfr = " << report.nfr.str() << '\n';
  out << "pfr = " << report.pfr.str() << '\n';
  out << "margins_available = " << (report.margins_available ? "true" : "false") << '\n';
  if (!report.records.empty()) {
    std::int64_t counts[4] = {0, 0, 0, 0};
    for (const auto& r : report.records) ++counts[static_cast<int>(r.category)];
    out << "count.neg_flip = " << counts[0] << '\n';
    out << "count.pos_flip = " << counts[1] << '\n';
    out << "count.both_correct = " << counts[2] << '\n';
    out << "count.both_wrong = " << counts[3] << '\n';
  }
  return out.str();
}

std::string render_flip_csv(const UpdateReport& report) {
  std::ostringstream out;
  out << "id,label,old_pred,new_pred,category,old_margin,displacement_norm\n";
  for (const auto& r : report.records) {
    out << r.id << ',' << r.label << ',' << r.old_pred << ',' << r.new_pred << ','
        << to_string(r.category) << ',';
    out << (std::isnan(r.old_margin) ? "NA" : format_double(r.old_margin)) << ',';
    out << (std::isnan(r.displacement_norm) ? "NA" : format_double(r.displacement_norm)) << '\n';
  }
  return out.str();
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

Rate parse_rate(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw ConfigError("malformed rate '" + text + "'");
  const auto space = text.find(' ', slash);
  Rate r;
  r.count = parse_int(text.substr(0, slash));
  r.total = parse_int(text.substr(slash + 1, space == std::string::npos ? std::string::npos
                                                                        : space - slash - 1));
  return r;
}

}  // namespace pctlab
