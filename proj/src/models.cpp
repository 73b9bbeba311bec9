#include "sentinel/models.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "sentinel/error.hpp"
#include "sentinel/random.hpp"

namespace sentinel {

using nlohmann::json;

namespace {

void check_dimensions(const LinearModel &model, const LabeledDataset &dataset) {
  if (dataset.dimension != model.weights.size())
    throw Error(ErrorCode::dimension_mismatch,
                "dataset " + std::to_string(dataset.dimension) + " vs model " +
                    std::to_string(model.weights.size()));
  for (const auto &v : dataset.vectors) {
    if (v.dimension != model.weights.size())
      throw Error(ErrorCode::dimension_mismatch, "feature vector dimension");
    if (!v.values.empty() && v.values.size() != v.active.size())
      throw Error(ErrorCode::dimension_mismatch, "feature values length");
  }
}

double softplus(double s) {
  return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

double sparse_score(const std::vector<double> &w, double b,
                    const FeatureVector &x) {
  double s = b;
  for (std::size_t k = 0; k < x.active.size(); ++k)
    s += w[x.active[k]] * x.value(k);
  return s;
}

// Loss and gradient at (w, b) without re-validating shapes.
LossGradient objective(ModelKind kind, const std::vector<double> &w, double b,
                       const LabeledDataset &ds, const Hyper &hyper) {
  LossGradient out;
  out.grad_w.assign(w.size(), 0.0);
  const double n = static_cast<double>(ds.size());
  double loss = 0.0;
  double grad_b = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto &x = ds.vectors[i];
    const bool positive = ds.labels[i] == Label::suspicious;
    const double weight = positive ? hyper.class_weight : 1.0;
    const double s = sparse_score(w, b, x);
    double dloss = 0.0;
    if (kind == ModelKind::logistic) {
      const double target = positive ? 1.0 : 0.0;
      loss += weight * (softplus(s) - target * s);
      dloss = weight * (sigmoid(s) - target);
    } else {
      const double y = positive ? 1.0 : -1.0;
      const double margin = y * s;
      if (margin < 1.0) {
        loss += weight * (1.0 - margin);
        dloss = -weight * y;
      }
    }
    if (dloss != 0.0) {
      for (std::size_t k = 0; k < x.active.size(); ++k)
        out.grad_w[x.active[k]] += dloss * x.value(k);
      grad_b += dloss;
    }
  }
  double norm2 = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    out.grad_w[j] = out.grad_w[j] / n + hyper.l2 * w[j];
    norm2 += w[j] * w[j];
  }
  out.loss = loss / n + 0.5 * hyper.l2 * norm2;
  out.grad_b = grad_b / n;
  return out;
}

double mean_of(const std::vector<Metrics> &folds, double Metrics::*field) {
  double sum = 0.0;
  for (const auto &m : folds)
    sum += m.*field;
  return folds.empty() ? 0.0 : sum / static_cast<double>(folds.size());
}

double finite_number(const json &v, const char *field) {
  if (!v.is_number())
    throw Error(ErrorCode::invalid_format, field);
  double d = v.get<double>();
  if (!std::isfinite(d))
    throw Error(ErrorCode::invalid_format, field);
  return d;
}

} // namespace

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::svm ? "svm" : "logistic";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "logistic")
    return ModelKind::logistic;
  if (text == "svm")
    return ModelKind::svm;
  return std::nullopt;
}

void Hyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::invalid_argument, "learning_rate");
  if (!(l2 >= 0.0) || !std::isfinite(l2))
    throw Error(ErrorCode::invalid_argument, "l2");
  if (!(class_weight > 0.0) || !std::isfinite(class_weight))
    throw Error(ErrorCode::invalid_argument, "class_weight");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorCode::invalid_argument, "threshold");
}

double predict_score(const LinearModel &model, const FeatureVector &x) {
  if (x.dimension != model.weights.size())
    throw Error(ErrorCode::dimension_mismatch,
                "vector " + std::to_string(x.dimension) + " vs model " +
                    std::to_string(model.weights.size()));
  for (auto i : x.active)
    if (i >= model.weights.size())
      throw Error(ErrorCode::dimension_mismatch, "active index out of range");
  if (!x.values.empty() && x.values.size() != x.active.size())
    throw Error(ErrorCode::dimension_mismatch, "values length differs from active indices");
  return sparse_score(model.weights, model.bias, x);
}

double sigmoid(double score) {
  if (score >= 0.0)
    return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

double predict_prob(const LinearModel &model, const FeatureVector &x) {
  if (model.kind != ModelKind::logistic)
    throw Error(ErrorCode::wrong_model_kind, "probabilities need a logistic model");
  return sigmoid(predict_score(model, x));
}

Label classify(const LinearModel &model, const FeatureVector &x) {
  if (model.kind == ModelKind::logistic)
    return predict_prob(model, x) > model.hyper.threshold ? Label::suspicious
                                                          : Label::benign;
  return predict_score(model, x) > 0.0 ? Label::suspicious : Label::benign;
}

double ranking_score(const LinearModel &model, const FeatureVector &x) {
  return model.kind == ModelKind::logistic ? predict_prob(model, x)
                                           : predict_score(model, x);
}

LossGradient loss_and_gradient(const LinearModel &model,
                               const LabeledDataset &dataset,
                               const Hyper &hyper) {
  if (dataset.size() == 0)
    throw Error(ErrorCode::invalid_argument, "empty dataset");
  check_dimensions(model, dataset);
  return objective(model.kind, model.weights, model.bias, dataset, hyper);
}

LinearModel train(const LabeledDataset &dataset, const Hyper &hyper,
                  ModelKind kind) {
  hyper.validate();
  if (dataset.count(Label::suspicious) == 0)
    throw Error(ErrorCode::single_class_dataset, "no suspicious examples");
  if (dataset.count(Label::benign) == 0)
    throw Error(ErrorCode::single_class_dataset, "no benign examples");

  LinearModel model;
  model.kind = kind;
  model.hyper = hyper;
  model.weights.assign(dataset.dimension, 0.0);
  check_dimensions(model, dataset);

  std::vector<double> w(dataset.dimension, 0.0);
  double b = 0.0;
  double best_loss = 0.0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto lg = objective(kind, w, b, dataset, hyper);
    if (epoch == 0 || lg.loss < best_loss) {
      best_loss = lg.loss;
      model.weights = w;
      model.bias = b;
    }
    for (std::size_t j = 0; j < w.size(); ++j)
      w[j] -= hyper.learning_rate * lg.grad_w[j];
    b -= hyper.learning_rate * lg.grad_b;
  }
  if (hyper.epochs > 0) {
    const double final_loss = objective(kind, w, b, dataset, hyper).loss;
    if (final_loss <= best_loss) {
      model.weights = std::move(w);
      model.bias = b;
    }
  }
  return model;
}

Metrics compute_metrics(std::span<const Label> predictions,
                        std::span<const Label> truth) {
  if (predictions.size() != truth.size())
    throw Error(ErrorCode::length_mismatch,
                std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(truth.size()) + " labels");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] == Label::suspicious;
    const bool t = truth[i] == Label::suspicious;
    if (p && t)
      ++m.tp;
    else if (p)
      ++m.fp;
    else if (t)
      ++m.fn;
    else
      ++m.tn;
  }
  const auto total = static_cast<double>(truth.size());
  m.accuracy = truth.empty() ? 0.0 : static_cast<double>(m.tp + m.tn) / total;
  m.precision = (m.tp + m.fp) == 0 ? 0.0
                                   : static_cast<double>(m.tp) /
                                         static_cast<double>(m.tp + m.fp);
  m.recall = (m.tp + m.fn) == 0 ? 0.0
                                : static_cast<double>(m.tp) /
                                      static_cast<double>(m.tp + m.fn);
  m.f1 = (m.precision + m.recall) == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::vector<Label> predict_labels(const LinearModel &model,
                                  const LabeledDataset &dataset) {
  std::vector<Label> out;
  out.reserve(dataset.size());
  for (const auto &x : dataset.vectors)
    out.push_back(classify(model, x));
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const Label> labels,
                                          std::size_t k, std::uint64_t seed) {
  if (k < 2)
    throw Error(ErrorCode::invalid_argument, "k must be >= 2");
  SplitMix64 rng(seed);
  std::vector<std::size_t> folds(labels.size(), 0);
  for (Label cls : {Label::benign, Label::suspicious}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls)
        members.push_back(i);
    rng.shuffle(members);
    for (std::size_t pos = 0; pos < members.size(); ++pos)
      folds[members[pos]] = pos % k;
  }
  return folds;
}

CVReport cross_validate(const LabeledDataset &dataset, std::size_t k,
                        ModelKind kind, const Hyper &hyper, unsigned threads) {
  if (k < 2)
    throw Error(ErrorCode::invalid_argument, "k must be >= 2");
  hyper.validate();
  for (Label cls : {Label::benign, Label::suspicious})
    if (dataset.count(cls) < k)
      throw Error(ErrorCode::too_few_examples, std::string(to_string(cls)));

  const auto folds = stratified_folds(dataset.labels, k, hyper.seed);
  CVReport report;
  report.kind = kind;
  report.k = k;
  report.fold_metrics.resize(k);

  auto run_fold = [&](std::size_t f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < folds.size(); ++i)
      (folds[i] == f ? test_idx : train_idx).push_back(i);
    auto model = train(dataset.subset(train_idx), hyper, kind);
    auto held_out = dataset.subset(test_idx);
    report.fold_metrics[f] =
        compute_metrics(predict_labels(model, held_out), held_out.labels);
  };

  if (threads <= 1) {
    for (std::size_t f = 0; f < k; ++f)
      run_fold(f);
  } else {
    for (std::size_t start = 0; start < k; start += threads) {
      std::vector<std::thread> workers;
      for (std::size_t f = start; f < std::min(k, start + threads); ++f)
        workers.emplace_back(run_fold, f);
      for (auto &w : workers)
        w.join();
    }
  }

  report.mean_accuracy = mean_of(report.fold_metrics, &Metrics::accuracy);
  report.mean_precision = mean_of(report.fold_metrics, &Metrics::precision);
  report.mean_recall = mean_of(report.fold_metrics, &Metrics::recall);
  report.mean_f1 = mean_of(report.fold_metrics, &Metrics::f1);
  return report;
}

json hyper_to_json(const Hyper &h) {
  return json{{"learning_rate", h.learning_rate}, {"l2", h.l2},
              {"epochs", h.epochs},               {"seed", h.seed},
              {"class_weight", h.class_weight},   {"threshold", h.threshold}};
}

Hyper hyper_from_json(const json &obj, Hyper h) {
  if (!obj.is_object())
    throw Error(ErrorCode::invalid_argument, "hyper must be an object");
  for (const auto &[key, value] : obj.items()) {
    if (key == "learning_rate")
      h.learning_rate = finite_number(value, "learning_rate");
    else if (key == "l2")
      h.l2 = finite_number(value, "l2");
    else if (key == "class_weight")
      h.class_weight = finite_number(value, "class_weight");
    else if (key == "threshold")
      h.threshold = finite_number(value, "threshold");
    else if (key == "epochs" && value.is_number_unsigned())
      h.epochs = value.get<std::size_t>();
    else if (key == "seed" && value.is_number_unsigned())
      h.seed = value.get<std::uint64_t>();
    else
      throw Error(ErrorCode::invalid_argument, "hyper." + key);
  }
  h.validate();
  return h;
}

json model_to_json(const LinearModel &model) {
  return json{{"kind", to_string(model.kind)},
              {"dimension", model.weights.size()},
              {"weights", model.weights},
              {"bias", model.bias},
              {"hyper", hyper_to_json(model.hyper)},
              {"vocabulary_digest", model.vocabulary_digest}};
}

LinearModel model_from_json(const json &obj) {
  try {
    LinearModel m;
    auto kind = parse_model_kind(obj.at("kind").get<std::string>());
    if (!kind)
      throw Error(ErrorCode::invalid_format, "kind");
    m.kind = *kind;
    const auto dim = obj.at("dimension").get<std::size_t>();
    for (const auto &w : obj.at("weights"))
      m.weights.push_back(finite_number(w, "weights"));
    if (m.weights.size() != dim)
      throw Error(ErrorCode::invalid_format, "weights length differs from dimension");
    m.bias = finite_number(obj.at("bias"), "bias");
    m.hyper = hyper_from_json(obj.at("hyper"));
    m.vocabulary_digest = obj.at("vocabulary_digest").get<std::string>();
    return m;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::invalid_format, e.what());
  } catch (const Error &e) {
    if (e.code() == ErrorCode::invalid_format)
      throw;
    throw Error(ErrorCode::invalid_format, e.what());
  }
}

json metrics_to_json(const Metrics &m) {
  return json{{"accuracy", m.accuracy},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
}

Metrics metrics_from_json(const json &obj) {
  Metrics m;
  m.accuracy = obj.at("accuracy").get<double>();
  m.precision = obj.at("precision").get<double>();
  m.recall = obj.at("recall").get<double>();
  m.f1 = obj.at("f1").get<double>();
  const auto &c = obj.at("confusion");
  m.tp = c.at("tp").get<std::size_t>();
  m.fp = c.at("fp").get<std::size_t>();
  m.tn = c.at("tn").get<std::size_t>();
  m.fn = c.at("fn").get<std::size_t>();
  return m;
}

json cv_report_to_json(const CVReport &r) {
  json folds = json::array();
  for (const auto &m : r.fold_metrics)
    folds.push_back(metrics_to_json(m));
  return json{{"kind", to_string(r.kind)},
              {"k", r.k},
              {"fold_metrics", std::move(folds)},
              {"mean_accuracy", r.mean_accuracy},
              {"mean_precision", r.mean_precision},
              {"mean_recall", r.mean_recall},
              {"mean_f1", r.mean_f1}};
}

CVReport cv_report_from_json(const json &obj) {
  try {
    CVReport r;
    auto kind = parse_model_kind(obj.at("kind").get<std::string>());
    if (!kind)
      throw Error(ErrorCode::invalid_format, "kind");
    r.kind = *kind;
    r.k = obj.at("k").get<std::size_t>();
    for (const auto &m : obj.at("fold_metrics"))
      r.fold_metrics.push_back(metrics_from_json(m));
    if (r.fold_metrics.size() != r.k)
      throw Error(ErrorCode::invalid_format, "fold_metrics length differs from k");
    r.mean_accuracy = obj.at("mean_accuracy").get<double>();
    r.mean_precision = obj.at("mean_precision").get<double>();
    r.mean_recall = obj.at("mean_recall").get<double>();
    r.mean_f1 = obj.at("mean_f1").get<double>();
    return r;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::invalid_format, e.what());
  }
}

} // namespace sentinel
