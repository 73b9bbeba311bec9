#include "doctest.h"

#include <cmath>
#include <numeric>

#include "sentinel/error.hpp"
#include "sentinel/models.hpp"
#include "sentinel/random.hpp"

using namespace sentinel;

namespace {

ErrorCode code_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

FeatureVector fv(std::size_t dim, std::vector<std::uint32_t> active) {
  return FeatureVector{dim, std::move(active)};
}

LabeledDataset make_dataset(std::size_t dim,
                            std::vector<std::pair<std::vector<std::uint32_t>, Label>> rows) {
  LabeledDataset ds;
  ds.dimension = dim;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.vectors.push_back(fv(dim, rows[i].first));
    ds.labels.push_back(rows[i].second);
    ds.session_ids.push_back("s" + std::to_string(100 + i));
  }
  return ds;
}

LabeledDataset random_dataset(SplitMix64 &rng, std::size_t n, std::size_t dim,
                              double p_active = 0.3, bool weighted = false) {
  LabeledDataset ds;
  ds.dimension = dim;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> active;
    for (std::uint32_t j = 0; j < dim; ++j)
      if (rng.chance(p_active))
        active.push_back(j);
    auto v = fv(dim, active);
    if (weighted)
      for (std::size_t k = 0; k < v.active.size(); ++k)
        v.values.push_back(static_cast<double>(rng.between(1, 4)));
    ds.vectors.push_back(std::move(v));
    ds.labels.push_back(i % 2 == 0 ? Label::suspicious : Label::benign);
    ds.session_ids.push_back("s" + std::to_string(1000 + i));
  }
  return ds;
}

LinearModel random_model(SplitMix64 &rng, ModelKind kind, std::size_t dim) {
  LinearModel m;
  m.kind = kind;
  for (std::size_t j = 0; j < dim; ++j)
    m.weights.push_back(rng.unit() * 2.0 - 1.0);
  m.bias = rng.unit() - 0.5;
  return m;
}

// The separable toy set: feature 0 marks suspicious, feature 1 marks benign,
// feature 2 is shared noise.
LabeledDataset toy_set() {
  using L = Label;
  return make_dataset(3, {{{0}, L::suspicious},
                          {{0, 2}, L::suspicious},
                          {{0}, L::suspicious},
                          {{0, 2}, L::suspicious},
                          {{0}, L::suspicious},
                          {{1}, L::benign},
                          {{1, 2}, L::benign},
                          {{}, L::benign},
                          {{2}, L::benign},
                          {{1}, L::benign}});
}

double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

} // namespace

TEST_CASE("predict_score and sigmoid examples") {
  LinearModel m;
  m.weights = {1.0, 2.0};
  m.bias = 0.5;
  CHECK(predict_score(m, fv(2, {1})) == 2.5);
  CHECK(predict_score(m, fv(2, {})) == 0.5);
  CHECK(predict_score(m, fv(2, {0, 1})) == 3.5);
  FeatureVector weighted{2, {1}, {3.0}};
  CHECK(predict_score(m, weighted) == 6.5);
  weighted.values = {1.0, 2.0};
  CHECK(code_of([&] { predict_score(m, weighted); }) == ErrorCode::dimension_mismatch);
  CHECK(code_of([&] { predict_score(m, fv(3, {0})); }) == ErrorCode::dimension_mismatch);
  CHECK(code_of([&] { predict_score(m, fv(2, {5})); }) == ErrorCode::dimension_mismatch);

  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(std::isfinite(sigmoid(-1000.0)));
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));

  CHECK(predict_prob(m, fv(2, {1})) == doctest::Approx(1.0 / (1.0 + std::exp(-2.5))));
  m.kind = ModelKind::svm;
  CHECK(code_of([&] { predict_prob(m, fv(2, {1})); }) == ErrorCode::wrong_model_kind);
  CHECK(ranking_score(m, fv(2, {1})) == 2.5);
}

TEST_CASE("classification thresholds are strict") {
  LinearModel m;
  m.weights = {0.0};
  m.bias = 0.0;
  CHECK(classify(m, fv(1, {})) == Label::benign); // probability exactly 0.5
  m.bias = 0.1;
  CHECK(classify(m, fv(1, {})) == Label::suspicious);
  m.hyper.threshold = 0.9;
  CHECK(classify(m, fv(1, {})) == Label::benign);
  m.kind = ModelKind::svm;
  m.bias = 0.0;
  CHECK(classify(m, fv(1, {})) == Label::benign);
  m.bias = 1e-9;
  CHECK(classify(m, fv(1, {})) == Label::suspicious);
}

TEST_CASE("loss examples") {
  const auto ds = toy_set();
  LinearModel zero;
  zero.weights.assign(3, 0.0);
  Hyper h;
  h.l2 = 0.0;
  CHECK(loss_and_gradient(zero, ds, h).loss == doctest::Approx(std::log(2.0)));
  zero.kind = ModelKind::svm;
  CHECK(loss_and_gradient(zero, ds, h).loss == doctest::Approx(1.0));

  // Margin 2 on every example: no hinge loss and zero subgradient.
  LinearModel wide;
  wide.kind = ModelKind::svm;
  wide.weights = {2.0, -2.0, 0.0};
  wide.bias = 0.0;
  const auto two = make_dataset(3, {{{0}, Label::suspicious}, {{1}, Label::benign}});
  const auto lg = loss_and_gradient(wide, two, h);
  CHECK(lg.loss == 0.0);
  CHECK(lg.grad_b == 0.0);
  CHECK(lg.grad_w == std::vector<double>{0.0, 0.0, 0.0});

  // L2 term is (l2/2)|w|^2 and leaves the bias alone.
  h.l2 = 0.5;
  CHECK(loss_and_gradient(wide, two, h).loss == doctest::Approx(0.25 * 8.0));
  CHECK(loss_and_gradient(wide, two, h).grad_w[0] == doctest::Approx(1.0));

  // Class weight multiplies suspicious losses.
  h.l2 = 0.0;
  h.class_weight = 3.0;
  LinearModel z2;
  z2.weights.assign(3, 0.0);
  CHECK(loss_and_gradient(z2, two, h).loss == doctest::Approx(2.0 * std::log(2.0)));

  LinearModel wrong;
  wrong.weights.assign(4, 0.0);
  CHECK(code_of([&] { loss_and_gradient(wrong, ds, Hyper{}); }) ==
        ErrorCode::dimension_mismatch);
}

TEST_CASE("analytic gradients agree with finite differences") {
  SplitMix64 rng(8080);
  const double h = 1e-5;
  for (ModelKind kind : {ModelKind::logistic, ModelKind::svm}) {
    int checked = 0;
    while (checked < 20) {
      const std::size_t dim = rng.between(2, 8);
      const auto ds = random_dataset(rng, rng.between(4, 20), dim, 0.3, checked % 2 == 1);
      auto model = random_model(rng, kind, dim);
      Hyper hyper;
      hyper.l2 = rng.unit() * 0.1;
      hyper.class_weight = 0.5 + rng.unit() * 2.0;
      if (kind == ModelKind::svm) {
        // Finite differences are only meaningful away from the hinge kink.
        bool near_kink = false;
        for (std::size_t i = 0; i < ds.size(); ++i) {
          const double y = ds.labels[i] == Label::suspicious ? 1.0 : -1.0;
          near_kink |= std::abs(y * predict_score(model, ds.vectors[i]) - 1.0) < 1e-3;
        }
        if (near_kink)
          continue;
      }
      const auto lg = loss_and_gradient(model, ds, hyper);
      for (std::size_t j = 0; j <= dim; ++j) {
        auto plus = model, minus = model;
        if (j < dim) {
          plus.weights[j] += h;
          minus.weights[j] -= h;
        } else {
          plus.bias += h;
          minus.bias -= h;
        }
        const double numeric = (loss_and_gradient(plus, ds, hyper).loss -
                                loss_and_gradient(minus, ds, hyper).loss) /
                               (2.0 * h);
        const double analytic = j < dim ? lg.grad_w[j] : lg.grad_b;
        CHECK(relative_error(analytic, numeric) <= 1e-4);
      }
      ++checked;
    }
  }
}

TEST_CASE("training descends and returns the best visited iterate") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = random_dataset(rng, 30, 6);
    Hyper hyper;
    hyper.learning_rate = 0.2;
    hyper.epochs = 40;
    hyper.l2 = 0.01;

    // Logistic: manual descent with a small step never increases the loss,
    // so the trained model is the last manual iterate.
    LinearModel manual;
    manual.weights.assign(6, 0.0);
    double previous = loss_and_gradient(manual, ds, hyper).loss;
    for (std::size_t e = 0; e < hyper.epochs; ++e) {
      const auto lg = loss_and_gradient(manual, ds, hyper);
      for (std::size_t j = 0; j < 6; ++j)
        manual.weights[j] -= hyper.learning_rate * lg.grad_w[j];
      manual.bias -= hyper.learning_rate * lg.grad_b;
      const double now = loss_and_gradient(manual, ds, hyper).loss;
      CHECK(now <= previous);
      previous = now;
    }
    const auto trained = train(ds, hyper, ModelKind::logistic);
    CHECK(trained.weights == manual.weights);
    CHECK(trained.bias == manual.bias);
    CHECK(trained.hyper == hyper);

    LinearModel zero;
    zero.kind = ModelKind::svm;
    zero.weights.assign(6, 0.0);
    const auto svm = train(ds, hyper, ModelKind::svm);
    CHECK(loss_and_gradient(svm, ds, hyper).loss <= loss_and_gradient(zero, ds, hyper).loss);
  }
}

TEST_CASE("separable toy set is learned perfectly") {
  const auto ds = toy_set();
  // The line 2*x0 - 2*x1 - 1 separates every row.
  LinearModel line;
  line.kind = ModelKind::svm;
  line.weights = {2.0, -2.0, 0.0};
  line.bias = -1.0;
  CHECK(compute_metrics(predict_labels(line, ds), ds.labels).accuracy == 1.0);

  Hyper hyper;
  hyper.learning_rate = 0.5;
  hyper.epochs = 2000;
  for (ModelKind kind : {ModelKind::logistic, ModelKind::svm}) {
    const auto model = train(ds, hyper, kind);
    CHECK(model.kind == kind);
    CHECK(compute_metrics(predict_labels(model, ds), ds.labels).accuracy == 1.0);
  }
}

TEST_CASE("zero epochs returns the zero model and training is deterministic") {
  SplitMix64 rng(3);
  const auto ds = random_dataset(rng, 25, 5);
  Hyper hyper;
  hyper.epochs = 0;
  const auto m = train(ds, hyper, ModelKind::svm);
  CHECK(m.weights == std::vector<double>(5, 0.0));
  CHECK(m.bias == 0.0);
  hyper.epochs = 300;
  for (ModelKind kind : {ModelKind::logistic, ModelKind::svm})
    CHECK(train(ds, hyper, kind) == train(ds, hyper, kind));
}

TEST_CASE("training rejects single-class data and bad hyperparameters") {
  auto ds = make_dataset(2, {{{0}, Label::benign}, {{1}, Label::benign}});
  CHECK(code_of([&] { train(ds, Hyper{}, ModelKind::logistic); }) ==
        ErrorCode::single_class_dataset);
  ds.labels = {Label::suspicious, Label::suspicious};
  CHECK(code_of([&] { train(ds, Hyper{}, ModelKind::svm); }) ==
        ErrorCode::single_class_dataset);
  ds.labels = {Label::suspicious, Label::benign};
  Hyper bad;
  bad.learning_rate = 0.0;
  CHECK(code_of([&] { train(ds, bad, ModelKind::svm); }) == ErrorCode::invalid_argument);
  bad = Hyper{};
  bad.threshold = 1.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::invalid_argument);
  bad = Hyper{};
  bad.l2 = -1.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::invalid_argument);
}

TEST_CASE("metric examples") {
  using L = Label;
  const std::vector<L> truth = {L::suspicious, L::suspicious, L::benign, L::benign};
  const std::vector<L> pred = {L::suspicious, L::benign, L::benign, L::suspicious};
  const auto m = compute_metrics(pred, truth);
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == 0.5);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.tn == 1);
  CHECK(m.fn == 1);

  const auto perfect = compute_metrics(truth, truth);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);

  std::vector<L> skewed(100, L::benign);
  for (int i = 0; i < 6; ++i)
    skewed[i] = L::suspicious;
  const auto all_benign = compute_metrics(std::vector<L>(100, L::benign), skewed);
  CHECK(all_benign.accuracy == doctest::Approx(0.94));
  CHECK(all_benign.recall == 0.0);
  CHECK(all_benign.precision == 0.0);
  CHECK(all_benign.f1 == 0.0);

  CHECK(code_of([&] { compute_metrics(pred, std::vector<L>(3, L::benign)); }) ==
        ErrorCode::length_mismatch);
}

TEST_CASE("stratified folds partition each class evenly") {
  using L = Label;
  const std::vector<L> ten = {L::suspicious, L::benign, L::benign, L::suspicious, L::benign,
                              L::suspicious, L::benign, L::suspicious, L::benign, L::suspicious};
  const auto folds = stratified_folds(ten, 5, 11);
  REQUIRE(folds.size() == 10);
  for (std::size_t f = 0; f < 5; ++f) {
    int s = 0, b = 0;
    for (std::size_t i = 0; i < 10; ++i)
      if (folds[i] == f)
        (ten[i] == L::suspicious ? s : b)++;
    CHECK(s == 1);
    CHECK(b == 1);
  }

  SplitMix64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.between(2, 80);
    const std::size_t k = rng.between(2, 10);
    std::vector<L> labels;
    for (std::size_t i = 0; i < n; ++i)
      labels.push_back(rng.chance(0.3) ? L::suspicious : L::benign);
    const auto seed = rng.next();
    const auto f = stratified_folds(labels, k, seed);
    CHECK(f == stratified_folds(labels, k, seed));
    for (L cls : {L::benign, L::suspicious}) {
      std::vector<std::size_t> sizes(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(f[i] < k);
        if (labels[i] == cls)
          ++sizes[f[i]];
      }
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
    }
  }
  CHECK(code_of([&] { stratified_folds(ten, 1, 0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("cross-validation is deterministic and thread-independent") {
  SplitMix64 rng(21);
  const auto ds = random_dataset(rng, 60, 8);
  Hyper hyper;
  hyper.epochs = 100;
  hyper.seed = 5;
  for (ModelKind kind : {ModelKind::logistic, ModelKind::svm}) {
    const auto a = cross_validate(ds, 5, kind, hyper, 1);
    CHECK(a == cross_validate(ds, 5, kind, hyper, 1));
    CHECK(a == cross_validate(ds, 5, kind, hyper, 3));
    CHECK(a.k == 5);
    REQUIRE(a.fold_metrics.size() == 5);
    double sum = 0.0;
    std::size_t evaluated = 0;
    for (const auto &m : a.fold_metrics) {
      sum += m.accuracy;
      evaluated += m.tp + m.fp + m.tn + m.fn;
    }
    CHECK(evaluated == ds.size());
    CHECK(a.mean_accuracy == doctest::Approx(sum / 5.0));
  }
  const auto few = make_dataset(1, {{{0}, Label::suspicious},
                                    {{}, Label::benign},
                                    {{}, Label::benign},
                                    {{0}, Label::benign}});
  CHECK(code_of([&] { cross_validate(few, 2, ModelKind::svm, Hyper{}); }) ==
        ErrorCode::too_few_examples);
}

TEST_CASE("decisions are invariant to positive scaling") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = rng.between(1, 10);
    auto model = random_model(rng, trial % 2 ? ModelKind::svm : ModelKind::logistic, dim);
    const auto ds = random_dataset(rng, 20, dim);
    const double c = std::ldexp(1.0, static_cast<int>(rng.between(-8, 8)));
    auto scaled = model;
    for (auto &w : scaled.weights)
      w *= c;
    scaled.bias *= c;
    for (const auto &x : ds.vectors) {
      if (std::abs(predict_score(model, x)) < 1e-6)
        continue;
      CHECK(classify(model, x) == classify(scaled, x));
    }
  }
}

TEST_CASE("swapping class labels mirrors the SVM") {
  SplitMix64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = random_dataset(rng, 30, 6);
    auto flipped = ds;
    for (auto &l : flipped.labels)
      l = l == Label::suspicious ? Label::benign : Label::suspicious;
    Hyper hyper;
    hyper.epochs = 60;
    const auto a = train(ds, hyper, ModelKind::svm);
    const auto b = train(flipped, hyper, ModelKind::svm);
    for (std::size_t j = 0; j < a.weights.size(); ++j)
      CHECK(a.weights[j] == -b.weights[j]);
    CHECK(a.bias == -b.bias);

    const auto la = train(ds, hyper, ModelKind::logistic);
    const auto lb = train(flipped, hyper, ModelKind::logistic);
    for (std::size_t j = 0; j < la.weights.size(); ++j)
      CHECK(la.weights[j] == doctest::Approx(-lb.weights[j]).epsilon(1e-9));
  }
}

TEST_CASE("model, hyper and report JSON round-trips") {
  SplitMix64 rng(1);
  auto model = random_model(rng, ModelKind::svm, 7);
  model.hyper.seed = 123;
  model.hyper.epochs = 17;
  model.vocabulary_digest = std::string(64, 'a');
  CHECK(model_from_json(model_to_json(model)) == model);
  CHECK(hyper_from_json(hyper_to_json(model.hyper)) == model.hyper);

  auto doc = model_to_json(model);
  doc["dimension"] = 8;
  CHECK(code_of([&] { model_from_json(doc); }) == ErrorCode::invalid_format);
  doc = model_to_json(model);
  doc["kind"] = "tree";
  CHECK(code_of([&] { model_from_json(doc); }) == ErrorCode::invalid_format);
  doc = model_to_json(model);
  doc.erase("bias");
  CHECK(code_of([&] { model_from_json(doc); }) == ErrorCode::invalid_format);
  CHECK(code_of([] { hyper_from_json(nlohmann::json{{"momentum", 0.9}}); }) ==
        ErrorCode::invalid_argument);

  const auto ds = random_dataset(rng, 40, 5);
  Hyper hyper;
  hyper.epochs = 50;
  const auto report = cross_validate(ds, 4, ModelKind::logistic, hyper);
  CHECK(cv_report_from_json(cv_report_to_json(report)) == report);
  CHECK(parse_model_kind("svm") == ModelKind::svm);
  CHECK_FALSE(parse_model_kind("SVM").has_value());
}
