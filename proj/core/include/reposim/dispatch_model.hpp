#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reposim/hexgrid.hpp"
#include "reposim/rng.hpp"

namespace reposim {

struct DispatchFeatureConfig {
  int cell_buckets = 64;   // hashed cell one-hot
  int tod_bins = 48;       // 30-minute time-of-day bins
  int dow_bins = 7;
  int driver_dims = 5;     // dense +-1 code hashed from the driver id
  uint64_t hash_seed = 0xd15bau;
  int width() const { return cell_buckets + tod_bins + dow_bins + driver_dims + 1; }
};

// Raw inputs of one prediction or label.
struct DispatchContext {
  CellId cell = 0;
  double minute_of_day = 0;
  int day_of_week = 0;
  int64_t driver_id = 0;
};

Eigen::VectorXd encode_dispatch_features(const DispatchFeatureConfig& cfg,
                                         const DispatchContext& ctx);

struct LabeledExample {
  DispatchContext ctx;
  int label = 0;       // 1 = received dispatch
  double weight = 1.0; // class weight after negative downsampling
};

// Events harvested from driver trajectories for training-set construction.
enum class DriverEventKind { kDispatchReceipt, kIdleStart, kOnline, kOffline };

struct DriverEvent {
  DriverEventKind kind = DriverEventKind::kDispatchReceipt;
  DispatchContext ctx;
};

struct TrainingSetCounts {
  int64_t positives = 0;
  int64_t negatives_idle = 0;
  int64_t negatives_onoff = 0;
  int64_t negatives_kept = 0;
};

// Positives: dispatch receipts. Negatives: idle-transaction starts plus
// online/offline events, downsampled to at most `max_neg_ratio` per positive
// with compensating weights on the kept negatives.
std::vector<LabeledExample> build_training_set(const std::vector<DriverEvent>& events,
                                               int max_neg_ratio, uint64_t seed,
                                               TrainingSetCounts* counts = nullptr);

struct DispatchTrainConfig {
  double l2 = 1e-5;
  double lr = 0.1;
  int max_epochs = 5000;
  double tol = 1e-6;             // relative log-likelihood improvement
  double calib_fraction = 0.2;   // validation share used for calibration
  bool calibrate = true;
  uint64_t seed = 1;
};

// Regularized logistic regression over the hashed features with optional
// isotonic (pool-adjacent-violators) calibration fitted on a held-out split.
class DispatchClassifier {
 public:
  DispatchClassifier() = default;
  explicit DispatchClassifier(DispatchFeatureConfig cfg) : fcfg_(cfg) {}

  static DispatchClassifier train(const std::vector<LabeledExample>& examples,
                                  const DispatchFeatureConfig& fcfg = {},
                                  const DispatchTrainConfig& tcfg = {});

  double predict(const DispatchContext& ctx) const;       // calibrated p_d
  double predict_raw(const DispatchContext& ctx) const;   // plain sigmoid
  double predict_idle(const DispatchContext& ctx) const { return 1.0 - predict(ctx); }

  const DispatchFeatureConfig& feature_config() const { return fcfg_; }
  const Eigen::VectorXd& weights() const { return w_; }
  bool calibrated() const { return !calib_x_.empty(); }

  void save(const std::string& path) const;
  static DispatchClassifier load(const std::string& path);

 private:
  friend double apply_calibration_for_test(const DispatchClassifier&, double);
  double calibrate_prob(double raw) const;

  DispatchFeatureConfig fcfg_;
  Eigen::VectorXd w_;
  std::vector<double> calib_x_;  // raw-probability knots (increasing)
  std::vector<double> calib_y_;  // calibrated values (nondecreasing)
};

// Mann-Whitney rank AUC with average ranks on tied scores.
double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels);

struct ClassifierReport {
  double auc = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double accuracy = 0;
  int64_t n_pos = 0;
  int64_t n_neg = 0;
};

// Threshold-0.5 metrics plus rank AUC on a held-out set.
ClassifierReport evaluate(const DispatchClassifier& clf,
                          const std::vector<LabeledExample>& examples);

std::string classifier_report_json(const ClassifierReport& r);

// Isotonic regression by pool-adjacent-violators; returns the fitted
// nondecreasing values at each input point (inputs must be sorted by x).
std::vector<double> pav_isotonic(const std::vector<double>& y,
                                 const std::vector<double>& w);

}  // namespace reposim
