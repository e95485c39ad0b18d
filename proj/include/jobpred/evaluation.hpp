#pragma once

// Classification metrics, comparison tables and the length-bucket analysis.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "jobpred/data.hpp"
#include "jobpred/error.hpp"

namespace jobpred {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw InputError("confusion matrix needs at least one class");
  }

  void add(std::size_t truth, std::size_t predicted) {
    if (truth >= n_ || predicted >= n_) {
      throw InputError("label out of range: truth " + std::to_string(truth) + ", prediction " +
                       std::to_string(predicted) + " with " + std::to_string(n_) + " classes");
    }
    ++counts_[truth * n_ + predicted];
    ++total_;
  }

  std::size_t classes() const { return n_; }
  std::size_t total() const { return total_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }

  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }
  std::size_t row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < n_; ++j) s += at(truth, j);
    return s;
  }
  std::size_t col_sum(std::size_t predicted) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < n_; ++i) s += at(i, predicted);
    return s;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // true instances
  std::size_t predicted = 0;  // predicted instances
  std::size_t true_positives = 0;
};

// Which labels enter the macro mean: every label, or only labels that occur
// among the truths or predictions.
enum class MacroScope { all_labels, present_labels };

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<LabelMetrics> per_label;
  std::size_t total = 0;

  double micro_precision() const {
    std::size_t tp = 0, pred = 0;
    for (const auto& l : per_label) tp += l.true_positives, pred += l.predicted;
    return pred ? double(tp) / double(pred) : 0.0;
  }
  double micro_recall() const {
    std::size_t tp = 0, sup = 0;
    for (const auto& l : per_label) tp += l.true_positives, sup += l.support;
    return sup ? double(tp) / double(sup) : 0.0;
  }
};

/// Labels with no true and no predicted instances score 0 (and count in the
/// mean under MacroScope::all_labels).
inline MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, MacroScope scope = MacroScope::all_labels) {
  if (cm.total() == 0) throw InputError("no examples to score");
  MetricsReport r;
  r.total = cm.total();
  r.accuracy = double(cm.trace()) / double(cm.total());
  std::size_t counted = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    LabelMetrics l;
    l.true_positives = cm.at(c, c);
    l.support = cm.row_sum(c);
    l.predicted = cm.col_sum(c);
    l.precision = l.predicted ? double(l.true_positives) / double(l.predicted) : 0.0;
    l.recall = l.support ? double(l.true_positives) / double(l.support) : 0.0;
    l.f1 = (l.precision + l.recall) > 0 ? 2 * l.precision * l.recall / (l.precision + l.recall) : 0.0;
    r.per_label.push_back(l);
    if (scope == MacroScope::all_labels || l.support > 0 || l.predicted > 0) {
      r.macro_precision += l.precision;
      r.macro_recall += l.recall;
      r.macro_f1 += l.f1;
      ++counted;
    }
  }
  r.macro_precision /= double(counted);
  r.macro_recall /= double(counted);
  r.macro_f1 /= double(counted);
  return r;
}

inline MetricsReport compute_metrics(std::span<const std::size_t> truths, std::span<const std::size_t> predictions,
                                     std::size_t num_classes = 25, MacroScope scope = MacroScope::all_labels) {
  if (truths.size() != predictions.size()) {
    throw InputError("truths has " + std::to_string(truths.size()) + " entries, predictions " +
                     std::to_string(predictions.size()));
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truths.size(); ++i) cm.add(truths[i], predictions[i]);
  return metrics_from_confusion(cm, scope);
}

struct BucketResult {
  std::string name;
  std::size_t count = 0;
  std::optional<double> macro_f1;  // absent when the bucket is empty
};

/// Macro F1 for documents of at most `boundary` raw words and for longer
/// ones. Within a bucket the mean runs over labels present in that bucket.
inline std::vector<BucketResult> length_bucket_f1(std::span<const std::size_t> word_lengths,
                                                  std::span<const std::size_t> truths,
                                                  std::span<const std::size_t> predictions,
                                                  std::size_t num_classes = 25, std::size_t boundary = 500) {
  if (word_lengths.size() != truths.size() || truths.size() != predictions.size()) {
    throw InputError("length, truth and prediction lists differ in size");
  }
  std::vector<BucketResult> out{{"<=" + std::to_string(boundary), 0, std::nullopt},
                                {">" + std::to_string(boundary), 0, std::nullopt}};
  ConfusionMatrix cms[2] = {ConfusionMatrix(num_classes), ConfusionMatrix(num_classes)};
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int b = word_lengths[i] <= boundary ? 0 : 1;
    cms[b].add(truths[i], predictions[i]);
    ++out[b].count;
  }
  for (int b = 0; b < 2; ++b)
    if (out[b].count) out[b].macro_f1 = metrics_from_confusion(cms[b], MacroScope::present_labels).macro_f1;
  return out;
}

namespace detail {

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

inline std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline std::string pad_left(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace detail

struct NamedReport {
  std::string model;
  MetricsReport report;
};

/// Aligned comparison table in percent; '*' marks the best value per column.
inline std::string render_report(const std::vector<NamedReport>& rows) {
  if (rows.empty()) throw InputError("no reports to render");
  const char* headers[] = {"Accuracy", "Precision", "Recall", "F1-score"};
  auto value = [](const MetricsReport& r, int col) {
    switch (col) {
      case 0: return r.accuracy;
      case 1: return r.macro_precision;
      case 2: return r.macro_recall;
      default: return r.macro_f1;
    }
  };
  std::size_t name_w = 6;
  for (const auto& row : rows) name_w = std::max(name_w, row.model.size());
  std::string out = "Macro-averaged precision/recall/F1, values in %\n";
  out += detail::pad_right("Models", name_w);
  for (const char* h : headers) out += "  " + detail::pad_left(h, 10);
  out += "\n";
  for (const auto& row : rows) {
    out += detail::pad_right(row.model, name_w);
    for (int col = 0; col < 4; ++col) {
      double best = value(rows[0].report, col);
      for (const auto& other : rows) best = std::max(best, value(other.report, col));
      const double v = value(row.report, col);
      out += "  " + detail::pad_left(detail::percent(v) + (v == best ? "*" : " "), 10);
    }
    out += "\n";
  }
  return out;
}

/// Per-label precision/recall/F1 table in percent.
inline std::string render_label_report(const MetricsReport& r, const LabelRegistry& labels) {
  if (r.per_label.size() != labels.size()) throw InputError("report and label registry differ in size");
  std::size_t name_w = 5;
  for (const auto& n : labels.names()) name_w = std::max(name_w, n.size());
  std::string out = detail::pad_right("Label", name_w) + "   Precision      Recall    F1-score   Support\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = r.per_label[i];
    out += detail::pad_right(labels.name(i), name_w) + "  " + detail::pad_left(detail::percent(l.precision), 10) +
           "  " + detail::pad_left(detail::percent(l.recall), 10) + "  " +
           detail::pad_left(detail::percent(l.f1), 10) + "  " + detail::pad_left(std::to_string(l.support), 8) + "\n";
  }
  return out;
}

/// One JSON record per model, for plotting scripts.
inline nlohmann::json report_json(const std::string& model, const MetricsReport& r,
                                  const LabelRegistry* labels = nullptr) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_label.size(); ++i) {
    const auto& l = r.per_label[i];
    nlohmann::json e = {{"label_id", i}, {"precision", l.precision}, {"recall", l.recall}, {"f1", l.f1}, {"support", l.support}};
    if (labels) e["label"] = labels->name(i);
    per.push_back(e);
  }
  return {{"model", model},
          {"averaging", "macro"},
          {"total", r.total},
          {"accuracy", r.accuracy},
          {"precision", r.macro_precision},
          {"recall", r.macro_recall},
          {"f1", r.macro_f1},
          {"per_label", per}};
}

}  // namespace jobpred
