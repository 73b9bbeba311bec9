#ifndef SENTINEL_MODELS_HPP
#define SENTINEL_MODELS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sentinel/features.hpp"

namespace sentinel {

enum class ModelKind { logistic, svm };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

struct Hyper {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  double class_weight = 1.0; // multiplies the loss of suspicious examples
  double threshold = 0.5;    // logistic decision threshold on probability

  /// Throws Error(invalid_argument) naming the bad field.
  void validate() const;
  bool operator==(const Hyper &) const = default;
};

struct LinearModel {
  ModelKind kind = ModelKind::logistic;
  std::vector<double> weights;
  double bias = 0.0;
  Hyper hyper;
  std::string vocabulary_digest;

  std::size_t dimension() const { return weights.size(); }
  bool operator==(const LinearModel &) const = default;
};

/// w.x + b over the active indices. Throws Error(dimension_mismatch).
double predict_score(const LinearModel &model, const FeatureVector &x);

/// Overflow-safe logistic function.
double sigmoid(double score);

/// Throws Error(wrong_model_kind) for an SVM.
double predict_prob(const LinearModel &model, const FeatureVector &x);

/// Logistic: probability strictly above the threshold is suspicious.
/// SVM: score strictly above zero is suspicious.
Label classify(const LinearModel &model, const FeatureVector &x);

/// Value used to rank sessions: probability for logistic, score for SVM.
double ranking_score(const LinearModel &model, const FeatureVector &x);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

/// Mean class-weighted loss plus (l2/2)|w|^2 and its (sub)gradient.
/// Logistic uses cross-entropy; SVM uses the hinge max(0, 1 - y*score) with
/// y in {-1, +1} and a zero subgradient at the kink. The bias is not
/// regularized.
LossGradient loss_and_gradient(const LinearModel &model,
                               const LabeledDataset &dataset,
                               const Hyper &hyper);

/// Full-batch gradient descent from zero weights for hyper.epochs steps.
/// Returns the visited iterate with the lowest objective, so the result
/// never has a higher loss than the zero model. Throws
/// Error(single_class_dataset) unless both labels are present.
LinearModel train(const LabeledDataset &dataset, const Hyper &hyper,
                  ModelKind kind);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  bool operator==(const Metrics &) const = default;
};

/// Throws Error(length_mismatch).
Metrics compute_metrics(std::span<const Label> predictions,
                        std::span<const Label> truth);

std::vector<Label> predict_labels(const LinearModel &model,
                                  const LabeledDataset &dataset);

struct CVReport {
  ModelKind kind = ModelKind::logistic;
  std::size_t k = 0;
  std::vector<Metrics> fold_metrics;
  double mean_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;

  bool operator==(const CVReport &) const = default;
};

/// Fold id per example. Each class is shuffled with SplitMix64(seed) and
/// dealt round-robin, so per-class fold sizes differ by at most one.
std::vector<std::size_t> stratified_folds(std::span<const Label> labels,
                                          std::size_t k, std::uint64_t seed);

/// Stratified k-fold CV seeded by hyper.seed. Folds train concurrently when
/// threads > 1; the report does not depend on the thread count.
/// Throws Error(too_few_examples) when a class has fewer than k examples.
CVReport cross_validate(const LabeledDataset &dataset, std::size_t k,
                        ModelKind kind, const Hyper &hyper,
                        unsigned threads = 1);

nlohmann::json hyper_to_json(const Hyper &hyper);
Hyper hyper_from_json(const nlohmann::json &obj, Hyper defaults = {});
nlohmann::json model_to_json(const LinearModel &model);
/// Throws Error(invalid_format) on missing fields, non-finite values or a
/// weights/dimension disagreement.
LinearModel model_from_json(const nlohmann::json &obj);
nlohmann::json metrics_to_json(const Metrics &metrics);
Metrics metrics_from_json(const nlohmann::json &obj);
nlohmann::json cv_report_to_json(const CVReport &report);
CVReport cv_report_from_json(const nlohmann::json &obj);

} // namespace sentinel

#endif // SENTINEL_MODELS_HPP
