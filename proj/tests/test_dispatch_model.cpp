#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "reposim/dispatch_model.hpp"
#include "reposim/errors.hpp"

using namespace reposim;

namespace {

// reference AUC: explicit ROC trapezoid integration over unique thresholds
double auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg) += 1;
  double tp = 0, fp = 0, prev_tpr = 0, prev_fpr = 0, area = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (size_t k = i; k <= j; ++k) (labels[order[k]] ? tp : fp) += 1;
    double tpr = tp / n_pos, fpr = fp / n_neg;
    area += 0.5 * (tpr + prev_tpr) * (fpr - prev_fpr);
    prev_tpr = tpr;
    prev_fpr = fpr;
    i = j + 1;
  }
  return area;
}

DispatchContext random_ctx(Rng& rng) {
  DispatchContext c;
  c.cell = static_cast<CellId>(rng() % 200);
  c.minute_of_day = static_cast<double>(rng() % (24 * 60));
  c.day_of_week = static_cast<int>(rng() % 7);
  c.driver_id = static_cast<int64_t>(rng() % 500);
  return c;
}

struct Generated {
  std::vector<LabeledExample> train, test;
  std::vector<double> test_true_prob;
};

// labels drawn from a logistic model over the real feature encoding, so the
// Bayes-optimal scores are known exactly
Generated logistic_generator(int n_train, int n_test, uint64_t seed,
                             DispatchFeatureConfig fcfg = {}) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd w_true(fcfg.width());
  for (Eigen::Index i = 0; i < w_true.size(); ++i) w_true[i] = 0.8 * g(rng);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  Generated out;
  auto draw = [&](int n, std::vector<LabeledExample>* dst, std::vector<double>* probs) {
    for (int i = 0; i < n; ++i) {
      LabeledExample e;
      e.ctx = random_ctx(rng);
      double z = w_true.dot(encode_dispatch_features(fcfg, e.ctx));
      double p = 1.0 / (1.0 + std::exp(-z));
      e.label = u(rng) < p ? 1 : 0;
      dst->push_back(e);
      if (probs) probs->push_back(p);
    }
  };
  draw(n_train, &out.train, nullptr);
  draw(n_test, &out.test, &out.test_true_prob);
  return out;
}

}  // namespace

TEST_CASE("feature encoding shape and determinism") {
  DispatchFeatureConfig cfg;
  CHECK(cfg.width() == 64 + 48 + 7 + 5 + 1);
  DispatchContext ctx{42, 615.0, 3, 1234};
  Eigen::VectorXd x = encode_dispatch_features(cfg, ctx);
  CHECK(x.size() == cfg.width());
  // one-hot groups each sum to 1
  CHECK(x.segment(0, 64).sum() == 1.0);
  CHECK(x.segment(64, 48).sum() == 1.0);
  CHECK(x.segment(112, 7).sum() == 1.0);
  // driver code is a +-1 vector; bias is 1
  for (int i = 0; i < 5; ++i) CHECK(std::abs(x[119 + i]) == 1.0);
  CHECK(x[124] == 1.0);
  CHECK((encode_dispatch_features(cfg, ctx) - x).norm() == 0.0);
  // 10:15 = minute 615 lands in bin 20 of 48
  CHECK(x[64 + 20] == 1.0);
}

TEST_CASE("training set construction and negative cap") {
  std::vector<DriverEvent> events;
  DispatchContext c{};
  events.push_back({DriverEventKind::kDispatchReceipt, c});
  events.push_back({DriverEventKind::kIdleStart, c});
  events.push_back({DriverEventKind::kOffline, c});
  TrainingSetCounts counts;
  auto set = build_training_set(events, 5, 1, &counts);
  CHECK(counts.positives == 1);
  CHECK(counts.negatives_idle == 1);
  CHECK(counts.negatives_onoff == 1);
  CHECK(counts.negatives_kept == 2);
  CHECK(set.size() == 3);

  // downsampling: 2 positives, 40 negatives -> 10 kept at weight 4
  events.clear();
  for (int i = 0; i < 2; ++i) events.push_back({DriverEventKind::kDispatchReceipt, c});
  for (int i = 0; i < 40; ++i) events.push_back({DriverEventKind::kIdleStart, c});
  set = build_training_set(events, 5, 7, &counts);
  CHECK(counts.negatives_kept == 10);
  int64_t n_neg = 0;
  double wsum = 0;
  for (const LabeledExample& e : set)
    if (!e.label) {
      ++n_neg;
      wsum += e.weight;
    }
  CHECK(n_neg == 10);
  CHECK(wsum == doctest::Approx(40.0));  // weights restore the original mass

  // event counts by category on a synthetic log
  Rng rng(3);
  events.clear();
  int exp_pos = 0, exp_idle = 0, exp_onoff = 0;
  for (int i = 0; i < 500; ++i) {
    int k = static_cast<int>(rng() % 4);
    DriverEvent e{static_cast<DriverEventKind>(k), random_ctx(rng)};
    events.push_back(e);
    if (k == 0) ++exp_pos;
    else if (k == 1) ++exp_idle;
    else ++exp_onoff;
  }
  build_training_set(events, 1000000, 1, &counts);
  CHECK(counts.positives == exp_pos);
  CHECK(counts.negatives_idle == exp_idle);
  CHECK(counts.negatives_onoff == exp_onoff);

  CHECK(build_training_set({}, 5, 1, &counts).empty());
}

TEST_CASE("auc rank statistic") {
  // perfect and inverted separations
  CHECK(auc_rank({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc_rank({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  // all-tied scores -> 0.5
  CHECK(auc_rank({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auc_rank({0.5}, {1}), DataError);

  // rank statistic equals trapezoidal ROC integration, ties included
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    int n = 50 + static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      scores.push_back(std::round(u(rng) * 20) / 20.0);
      labels.push_back(u(rng) < 0.4 ? 1 : 0);
    }
    int pos = std::accumulate(labels.begin(), labels.end(), 0);
    if (pos == 0 || pos == n) continue;
    CHECK(auc_rank(scores, labels) ==
          doctest::Approx(auc_trapezoid(scores, labels)).epsilon(1e-9));
  }
}

TEST_CASE("isotonic regression by pool-adjacent-violators") {
  // already monotone input is unchanged
  std::vector<double> inc{1, 2, 3};
  CHECK(pav_isotonic(inc, {1, 1, 1}) == inc);
  // fully decreasing collapses to the weighted mean
  auto flat = pav_isotonic({3, 2, 1}, {1, 1, 1});
  for (double v : flat) CHECK(v == doctest::Approx(2.0));
  // weighted violation: block mean respects weights
  auto w = pav_isotonic({0.0, 1.0}, {1, 1});
  CHECK(w[0] == 0.0);
  CHECK(w[1] == 1.0);
  auto w2 = pav_isotonic({1.0, 0.0}, {3, 1});
  CHECK(w2[0] == doctest::Approx(0.75));
  CHECK(w2[1] == doctest::Approx(0.75));
  // random fit is always nondecreasing
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> ys, ws;
  for (int i = 0; i < 200; ++i) {
    ys.push_back(u(rng));
    ws.push_back(0.5 + u(rng));
  }
  auto fit = pav_isotonic(ys, ws);
  for (size_t i = 1; i < fit.size(); ++i) CHECK(fit[i] >= fit[i - 1]);
}

TEST_CASE("separable data trains to near-perfect auc") {
  // positives live in cells 0..99, negatives in 100..199, all else random
  Rng rng(9);
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 2000; ++i) {
    LabeledExample e;
    e.ctx = random_ctx(rng);
    e.label = i % 2;
    e.ctx.cell = e.label ? static_cast<CellId>(rng() % 4) : static_cast<CellId>(100 + rng() % 4);
    ex.push_back(e);
  }
  DispatchTrainConfig tcfg;
  tcfg.calibrate = false;
  DispatchClassifier clf = DispatchClassifier::train(ex, {}, tcfg);
  ClassifierReport r = evaluate(clf, ex);
  CHECK(r.auc >= 0.99);
  CHECK(r.accuracy >= 0.95);
}

TEST_CASE("shuffled labels score chance auc") {
  Generated gen = logistic_generator(4000, 2000, 21);
  // destroy the signal
  Rng rng(22);
  for (LabeledExample& e : gen.train) e.label = static_cast<int>(rng() % 2);
  for (LabeledExample& e : gen.test) e.label = static_cast<int>(rng() % 2);
  DispatchClassifier clf = DispatchClassifier::train(gen.train);
  ClassifierReport r = evaluate(clf, gen.test);
  CHECK(r.auc == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("logistic generator: auc near bayes and calibrated probabilities") {
  // fewer cell buckets keep the per-weight estimation error well under the
  // probability-recovery tolerance at this sample size
  DispatchFeatureConfig fcfg;
  fcfg.cell_buckets = 32;
  Generated gen = logistic_generator(24000, 8000, 31, fcfg);
  DispatchClassifier clf = DispatchClassifier::train(gen.train, fcfg);

  std::vector<double> scores, bayes;
  std::vector<int> labels;
  for (size_t i = 0; i < gen.test.size(); ++i) {
    scores.push_back(clf.predict(gen.test[i].ctx));
    bayes.push_back(gen.test_true_prob[i]);
    labels.push_back(gen.test[i].label);
  }
  double auc_model = auc_rank(scores, labels);
  double auc_bayes = auc_rank(bayes, labels);
  CHECK(std::abs(auc_model - auc_bayes) < 0.02);

  // mid-region probability recovery
  double err_sum = 0;
  int mid = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (bayes[i] < 0.3 || bayes[i] > 0.7) continue;
    err_sum += std::abs(scores[i] - bayes[i]);
    ++mid;
  }
  REQUIRE(mid > 300);
  CHECK(err_sum / mid < 0.05);

  // reliability bins deviate by at most 0.05 after calibration
  const int bins = 10;
  std::vector<double> bin_pred(bins, 0), bin_label(bins, 0);
  std::vector<int> bin_n(bins, 0);
  for (size_t i = 0; i < scores.size(); ++i) {
    int b = std::min(bins - 1, static_cast<int>(scores[i] * bins));
    bin_pred[b] += scores[i];
    bin_label[b] += labels[i];
    bin_n[b] += 1;
  }
  for (int b = 0; b < bins; ++b) {
    if (bin_n[b] < 150) continue;  // too noisy to judge
    CHECK(std::abs(bin_pred[b] / bin_n[b] - bin_label[b] / bin_n[b]) <= 0.05);
  }
}

TEST_CASE("probabilities are complementary and deterministic") {
  Generated gen = logistic_generator(1500, 10, 41);
  DispatchClassifier a = DispatchClassifier::train(gen.train);
  DispatchClassifier b = DispatchClassifier::train(gen.train);
  for (const LabeledExample& e : gen.test) {
    CHECK(a.predict(e.ctx) + a.predict_idle(e.ctx) == 1.0);
    CHECK(a.predict(e.ctx) == b.predict(e.ctx));
    CHECK(a.predict(e.ctx) >= 0.0);
    CHECK(a.predict(e.ctx) <= 1.0);
  }
}

TEST_CASE("single-class training is an error") {
  std::vector<LabeledExample> ex(10);
  for (LabeledExample& e : ex) e.label = 1;
  CHECK_THROWS_AS(DispatchClassifier::train(ex), DataError);
}

TEST_CASE("model file round trip") {
  Generated gen = logistic_generator(2000, 50, 51);
  DispatchClassifier clf = DispatchClassifier::train(gen.train);
  std::string path = "test_dispatch_model.json";
  clf.save(path);
  DispatchClassifier back = DispatchClassifier::load(path);
  std::remove(path.c_str());
  for (const LabeledExample& e : gen.test)
    CHECK(back.predict(e.ctx) == clf.predict(e.ctx));
  CHECK(back.calibrated() == clf.calibrated());
}
