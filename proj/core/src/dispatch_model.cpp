#include "reposim/dispatch_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "reposim/errors.hpp"

namespace reposim {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd encode_dispatch_features(const DispatchFeatureConfig& cfg,
                                         const DispatchContext& ctx) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.width());
  int off = 0;

  uint64_t hc = hash_combine(cfg.hash_seed, static_cast<uint64_t>(static_cast<int64_t>(ctx.cell)));
  x[off + static_cast<int>(hc % static_cast<uint64_t>(cfg.cell_buckets))] = 1.0;
  off += cfg.cell_buckets;

  double day_min = 24.0 * 60.0;
  double m = ctx.minute_of_day - day_min * std::floor(ctx.minute_of_day / day_min);
  int tod = static_cast<int>(m / day_min * cfg.tod_bins);
  x[off + std::min(tod, cfg.tod_bins - 1)] = 1.0;
  off += cfg.tod_bins;

  int dow = ((ctx.day_of_week % cfg.dow_bins) + cfg.dow_bins) % cfg.dow_bins;
  x[off + dow] = 1.0;
  off += cfg.dow_bins;

  for (int i = 0; i < cfg.driver_dims; ++i) {
    uint64_t h = hash_combine(hash_combine(cfg.hash_seed ^ 0x9e37u, static_cast<uint64_t>(ctx.driver_id)),
                              static_cast<uint64_t>(i));
    x[off + i] = (h & 1) ? 1.0 : -1.0;
  }
  off += cfg.driver_dims;

  x[off] = 1.0;  // bias
  return x;
}

std::vector<LabeledExample> build_training_set(const std::vector<DriverEvent>& events,
                                               int max_neg_ratio, uint64_t seed,
                                               TrainingSetCounts* counts) {
  std::vector<LabeledExample> pos, neg;
  TrainingSetCounts c;
  for (const DriverEvent& e : events) {
    LabeledExample ex;
    ex.ctx = e.ctx;
    if (e.kind == DriverEventKind::kDispatchReceipt) {
      ex.label = 1;
      pos.push_back(ex);
      ++c.positives;
    } else {
      ex.label = 0;
      neg.push_back(ex);
      if (e.kind == DriverEventKind::kIdleStart)
        ++c.negatives_idle;
      else
        ++c.negatives_onoff;
    }
  }

  int64_t cap = c.positives * max_neg_ratio;
  if (cap > 0 && static_cast<int64_t>(neg.size()) > cap) {
    Rng rng(seed);
    std::shuffle(neg.begin(), neg.end(), rng);
    double w = static_cast<double>(neg.size()) / static_cast<double>(cap);
    neg.resize(cap);
    for (LabeledExample& e : neg) e.weight = w;
  }
  c.negatives_kept = static_cast<int64_t>(neg.size());
  if (counts) *counts = c;

  std::vector<LabeledExample> out;
  out.reserve(pos.size() + neg.size());
  out.insert(out.end(), pos.begin(), pos.end());
  out.insert(out.end(), neg.begin(), neg.end());
  return out;
}

std::vector<double> pav_isotonic(const std::vector<double>& y,
                                 const std::vector<double>& w) {
  if (y.size() != w.size()) throw DataError("isotonic inputs must align");
  size_t n = y.size();
  std::vector<double> level(n), weight(n);
  std::vector<size_t> size(n);
  size_t blocks = 0;
  for (size_t i = 0; i < n; ++i) {
    level[blocks] = y[i];
    weight[blocks] = w[i];
    size[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      double tw = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] =
          (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / tw;
      weight[blocks - 2] = tw;
      size[blocks - 2] += size[blocks - 1];
      --blocks;
    }
  }
  std::vector<double> out;
  out.reserve(n);
  for (size_t b = 0; b < blocks; ++b)
    out.insert(out.end(), size[b], level[b]);
  return out;
}

DispatchClassifier DispatchClassifier::train(const std::vector<LabeledExample>& examples,
                                             const DispatchFeatureConfig& fcfg,
                                             const DispatchTrainConfig& tcfg) {
  int64_t n_pos = 0, n_neg = 0;
  for (const LabeledExample& e : examples) (e.label ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("training set needs both classes (got " + std::to_string(n_pos) +
                    " positives, " + std::to_string(n_neg) + " negatives)");

  // split train / calibration
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(tcfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_calib = tcfg.calibrate
                       ? static_cast<size_t>(tcfg.calib_fraction * static_cast<double>(examples.size()))
                       : 0;
  // never calibrate away a whole class from training
  std::vector<size_t> calib_idx(order.begin(), order.begin() + n_calib);
  std::vector<size_t> train_idx(order.begin() + n_calib, order.end());

  int64_t tp = 0, tn = 0;
  for (size_t i : train_idx) (examples[i].label ? tp : tn) += 1;
  if (tp == 0 || tn == 0) {
    train_idx = order;  // too little data to hold out a split
    calib_idx.clear();
  }

  const int width = fcfg.width();
  Eigen::MatrixXd X(train_idx.size(), width);
  Eigen::VectorXd y(train_idx.size()), wt(train_idx.size());
  for (size_t i = 0; i < train_idx.size(); ++i) {
    const LabeledExample& e = examples[train_idx[i]];
    X.row(i) = encode_dispatch_features(fcfg, e.ctx);
    y[i] = e.label;
    wt[i] = e.weight;
  }
  double wsum = wt.sum();

  DispatchClassifier clf(fcfg);
  clf.w_ = Eigen::VectorXd::Zero(width);

  // full-batch Adam on the weighted negative log-likelihood; Adam steps are
  // not monotone, so convergence needs a few quiet epochs in a row
  Eigen::VectorXd m = Eigen::VectorXd::Zero(width), v = Eigen::VectorXd::Zero(width);
  double prev_nll = std::numeric_limits<double>::infinity();
  int quiet = 0;
  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    Eigen::VectorXd z = X * clf.w_;
    Eigen::VectorXd p(z.size());
    double nll = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      p[i] = sigmoid(z[i]);
      double pi = std::clamp(p[i], 1e-15, 1.0 - 1e-15);
      nll -= wt[i] * (y[i] * std::log(pi) + (1 - y[i]) * std::log(1 - pi));
    }
    nll = nll / wsum + 0.5 * tcfg.l2 * clf.w_.squaredNorm();

    Eigen::VectorXd grad = X.transpose() * ((p - y).cwiseProduct(wt)) / wsum + tcfg.l2 * clf.w_;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad.cwiseProduct(grad);
    double bc1 = 1 - std::pow(0.9, epoch), bc2 = 1 - std::pow(0.999, epoch);
    Eigen::VectorXd denom = (v / bc2).cwiseSqrt();
    denom.array() += 1e-8;
    clf.w_ -= (tcfg.lr / bc1) * m.cwiseQuotient(denom);

    quiet = std::abs(prev_nll - nll) < tcfg.tol * std::max(1.0, std::abs(prev_nll))
                ? quiet + 1
                : 0;
    if (quiet >= 10) break;
    prev_nll = nll;
  }

  // isotonic calibration on the held-out split
  if (!calib_idx.empty()) {
    std::vector<std::pair<double, const LabeledExample*>> scored;
    scored.reserve(calib_idx.size());
    for (size_t i : calib_idx)
      scored.push_back({clf.predict_raw(examples[i].ctx), &examples[i]});
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> ys(scored.size()), ws(scored.size());
    for (size_t i = 0; i < scored.size(); ++i) {
      ys[i] = scored[i].second->label;
      ws[i] = scored[i].second->weight;
    }
    std::vector<double> fit = pav_isotonic(ys, ws);
    // knots at distinct raw scores; linear interpolation between them
    clf.calib_x_.clear();
    clf.calib_y_.clear();
    for (size_t i = 0; i < fit.size(); ++i) {
      if (!clf.calib_x_.empty() && scored[i].first == clf.calib_x_.back()) {
        clf.calib_y_.back() = fit[i];
        continue;
      }
      clf.calib_x_.push_back(scored[i].first);
      clf.calib_y_.push_back(fit[i]);
    }
    if (clf.calib_x_.size() < 2) {
      clf.calib_x_.clear();  // degenerate: fall back to raw probabilities
      clf.calib_y_.clear();
    }
  }
  return clf;
}

double DispatchClassifier::calibrate_prob(double raw) const {
  if (calib_x_.empty()) return raw;
  if (raw <= calib_x_.front()) return calib_y_.front();
  if (raw >= calib_x_.back()) return calib_y_.back();
  auto it = std::upper_bound(calib_x_.begin(), calib_x_.end(), raw);
  size_t hi = static_cast<size_t>(it - calib_x_.begin());
  size_t lo = hi - 1;
  double t = (raw - calib_x_[lo]) / (calib_x_[hi] - calib_x_[lo]);
  return calib_y_[lo] * (1 - t) + calib_y_[hi] * t;
}

double DispatchClassifier::predict_raw(const DispatchContext& ctx) const {
  if (w_.size() == 0) throw DataError("classifier not trained");
  return sigmoid(w_.dot(encode_dispatch_features(fcfg_, ctx)));
}

double DispatchClassifier::predict(const DispatchContext& ctx) const {
  return std::clamp(calibrate_prob(predict_raw(ctx)), 0.0, 1.0);
}

double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("auc inputs must align");
  size_t n = scores.size();
  int64_t n_pos = 0;
  for (int l : labels) n_pos += l ? 1 : 0;
  int64_t n_neg = static_cast<int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc needs both classes");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // average ranks over tied scores
  double rank_sum_pos = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ClassifierReport evaluate(const DispatchClassifier& clf,
                          const std::vector<LabeledExample>& examples) {
  std::vector<double> scores(examples.size());
  std::vector<int> labels(examples.size());
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < examples.size(); ++i) {
    scores[i] = clf.predict(examples[i].ctx);
    labels[i] = examples[i].label;
    bool hat = scores[i] >= 0.5;
    if (hat && labels[i]) ++tp;
    else if (hat && !labels[i]) ++fp;
    else if (!hat && !labels[i]) ++tn;
    else ++fn;
  }
  ClassifierReport r;
  r.n_pos = tp + fn;
  r.n_neg = fp + tn;
  r.auc = auc_rank(scores, labels);
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(examples.size());
  return r;
}

std::string classifier_report_json(const ClassifierReport& r) {
  nlohmann::json j;
  j["auc"] = r.auc;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["accuracy"] = r.accuracy;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  return j.dump(2);
}

void DispatchClassifier::save(const std::string& path) const {
  nlohmann::json j;
  j["version"] = 1;
  j["type"] = "dispatch_classifier";
  j["features"] = {{"cell_buckets", fcfg_.cell_buckets},
                   {"tod_bins", fcfg_.tod_bins},
                   {"dow_bins", fcfg_.dow_bins},
                   {"driver_dims", fcfg_.driver_dims},
                   {"hash_seed", fcfg_.hash_seed}};
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index i = 0; i < w_.size(); ++i) w.push_back(w_[i]);
  j["weights"] = std::move(w);
  j["calib_x"] = calib_x_;
  j["calib_y"] = calib_y_;
  std::ofstream f(path);
  if (!f) throw DataError("cannot write model file " + path);
  f << j.dump() << "\n";
}

DispatchClassifier DispatchClassifier::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read model file " + path);
  nlohmann::json j;
  try {
    f >> j;
    if (j.at("type").get<std::string>() != "dispatch_classifier")
      throw DataError(path + " is not a dispatch classifier");
    DispatchFeatureConfig cfg;
    cfg.cell_buckets = j.at("features").at("cell_buckets").get<int>();
    cfg.tod_bins = j.at("features").at("tod_bins").get<int>();
    cfg.dow_bins = j.at("features").at("dow_bins").get<int>();
    cfg.driver_dims = j.at("features").at("driver_dims").get<int>();
    cfg.hash_seed = j.at("features").at("hash_seed").get<uint64_t>();
    DispatchClassifier clf(cfg);
    const auto& w = j.at("weights");
    clf.w_.resize(w.size());
    for (size_t i = 0; i < w.size(); ++i) clf.w_[static_cast<Eigen::Index>(i)] = w[i].get<double>();
    clf.calib_x_ = j.at("calib_x").get<std::vector<double>>();
    clf.calib_y_ = j.at("calib_y").get<std::vector<double>>();
    return clf;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path + " malformed: " + e.what());
  }
}

}  // namespace reposim
