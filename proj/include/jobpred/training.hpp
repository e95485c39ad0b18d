#pragma once

// Mini-batch training with Adam, global-norm clipping and early stopping on
// validation macro-F1.

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "jobpred/evaluation.hpp"
#include "jobpred/models.hpp"

namespace jobpred {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t early_stop_patience = 5;
  double gradient_clip_norm = 5.0;
  std::uint64_t seed = 0;
  // Stop as soon as accuracy on the training set reaches this value.
  std::optional<double> target_train_accuracy;

  void validate() const {
    if (!(learning_rate > 0) || !(epsilon > 0) || !(gradient_clip_norm > 0)) {
      throw ConfigError("learning_rate, epsilon and gradient_clip_norm must be positive");
    }
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must be in [0,1)");
    if (batch_size == 0 || max_epochs == 0) throw ConfigError("batch_size and max_epochs must be positive");
    if (early_stop_patience > max_epochs) throw ConfigError("early_stop_patience exceeds max_epochs");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean per-document cross-entropy
  double validation_accuracy = 0.0;
  double validation_macro_f1 = 0.0;
  std::optional<double> train_accuracy;
};

inline std::string format_epoch(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%zu loss=%.6f val_acc=%.4f val_f1=%.4f", r.epoch, r.loss,
                r.validation_accuracy, r.validation_macro_f1);
  std::string s = buf;
  if (r.train_accuracy) {
    std::snprintf(buf, sizeof buf, " train_acc=%.4f", *r.train_accuracy);
    s += buf;
  }
  return s;
}

/// Scales gradients in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_gradients(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor& p : params)
      for (double& g : p.mutable_grad()) g *= s;
  }
  return norm;
}

class Adam {
 public:
  Adam(std::vector<Tensor> params, const TrainConfig& c)
      : params_(std::move(params)), lr_(c.learning_rate), b1_(c.beta1), b2_(c.beta2), eps_(c.epsilon) {
    for (const Tensor& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, double(t_));
    const double c2 = 1.0 - std::pow(b2_, double(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto w = params_[k].mutable_values();
      auto g = params_[k].grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = b1_ * m[i] + (1 - b1_) * g[i];
        v[i] = b2_ * v[i] + (1 - b2_) * g[i] * g[i];
        w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  std::vector<Tensor>& params() { return params_; }

 private:
  std::vector<Tensor> params_;
  double lr_, b1_, b2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Cross-entropy of one labelled document; gradients flow to the bundle.
inline Tensor document_loss(const ModelBundle& b, const EncodedDocument& doc, Mode mode, Rng& rng) {
  if (!doc.label_id) throw InputError("training document has no label");
  const Tensor logits = forward_logits(b, doc, mode, rng);
  const std::size_t target = *doc.label_id;
  return softmax_cross_entropy(reshape(logits, {1, logits.size()}), std::span<const std::size_t>(&target, 1));
}

inline std::vector<std::size_t> predict_all(const ModelBundle& b, std::span<const EncodedDocument> docs) {
  std::vector<std::size_t> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(predict(b, d));
  return out;
}

inline std::vector<std::size_t> labels_of(std::span<const EncodedDocument> docs) {
  std::vector<std::size_t> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    if (!d.label_id) throw InputError("document has no label");
    out.push_back(*d.label_id);
  }
  return out;
}

inline MetricsReport evaluate(const ModelBundle& b, std::span<const EncodedDocument> docs) {
  const auto truth = labels_of(docs);
  const auto pred = predict_all(b, docs);
  return compute_metrics(truth, pred, b.config.num_classes);
}

struct TrainResult {
  ModelBundle bundle;  // parameters from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Trains a copy of `initial`. The caller's bundle is left untouched.
inline TrainResult train(const ModelBundle& initial, std::span<const EncodedDocument> train_docs,
                         std::span<const EncodedDocument> validation_docs, const TrainConfig& config,
                         std::ostream* log = nullptr) {
  config.validate();
  if (train_docs.empty()) throw InputError("empty training set");
  if (validation_docs.empty()) throw InputError("empty validation set");
  for (auto docs : {train_docs, validation_docs})
    for (const auto& d : docs) check_compatible(initial, d);
  const auto val_truth = labels_of(validation_docs);

  TrainResult result{initial.clone(), {}, 0};
  ModelBundle& b = result.bundle;
  std::vector<Tensor> params;
  for (auto& [name, t] : b.trainable()) {
    t.set_requires_grad(true);
    params.push_back(t);
  }
  Adam opt(params, config);
  Rng shuffle_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));

  std::vector<std::size_t> order(train_docs.size());
  std::vector<std::vector<double>> best;
  double best_f1 = -1.0;
  std::size_t wait = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0, batch = 1; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / double(end - start);
      opt.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        Tensor loss = document_loss(b, train_docs[order[i]], Mode::train, dropout_rng);
        if (!std::isfinite(loss.item())) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch));
        }
        loss_sum += loss.item();
        jobpred::scale(loss, scale).backward();
      }
      clip_gradients(opt.params(), config.gradient_clip_norm);
      opt.step();
    }
    opt.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / double(train_docs.size());
    const auto val = compute_metrics(val_truth, predict_all(b, validation_docs), b.config.num_classes);
    rec.validation_accuracy = val.accuracy;
    rec.validation_macro_f1 = val.macro_f1;
    if (config.target_train_accuracy) rec.train_accuracy = evaluate(b, train_docs).accuracy;
    result.history.push_back(rec);
    if (log) *log << format_epoch(rec) << "\n";

    if (val.macro_f1 > best_f1) {
      best_f1 = val.macro_f1;
      result.best_epoch = epoch;
      best.clear();
      for (const Tensor& p : params) best.emplace_back(p.values().begin(), p.values().end());
      wait = 0;
    } else if (++wait >= config.early_stop_patience) {
      break;
    }
    if (rec.train_accuracy && *rec.train_accuracy >= *config.target_train_accuracy) break;
  }

  for (std::size_t k = 0; k < params.size(); ++k) std::copy(best[k].begin(), best[k].end(), params[k].mutable_values().begin());
  b.training.epochs_run = result.history.size();
  b.training.best_validation_f1 = best_f1;
  return result;
}

}  // namespace jobpred
