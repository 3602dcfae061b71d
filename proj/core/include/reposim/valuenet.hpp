#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reposim/embedding.hpp"
#include "reposim/nn.hpp"

namespace reposim {

// R spread uniformly over k one-minute steps and discounted:
// R * (gamma^k - 1) / (k * (gamma - 1)). Equals R exactly at k=1.
double discounted_reward(double R, int k, double gamma);

// Same factor with a real-valued duration, for planner legs whose travel
// times are not whole minutes. dt == 0 returns R.
double discounted_reward_cont(double R, double dt, double gamma);

struct TrainConfig {
  double gamma = 0.92;       // per one-minute step
  double step_size = 3e-4;
  double lambda_reg = 1e-4;  // L2 on dense layer weights
  int batch_size = 256;
  int64_t max_iterations = 20000;
  int target_sync = 1000;    // frozen-net refresh cadence, in batch updates
};

// One transition prepared for value training. `dispatch` marks transitions
// whose option was a dispatch (reward >= 0 under the sign convention).
struct VnSample {
  StateKey s;
  StateKey s_next;
  double reward = 0;
  int k = 1;
  bool terminal = false;
  bool dispatch = false;
};

// Read-only view of a state-value function as the planner sees it: marginal
// V(s) and dispatch-conditioned V(s | b=1), queried at a future offset with
// the discount and horizon applied.
class ValueSource {
 public:
  virtual ~ValueSource() = default;
  virtual double value(const StateKey& s, double dt_min) const = 0;
  virtual double conditional_value(const StateKey& s, double dt_min) const = 0;

  // batch hooks so planners can submit one inference per phase; the default
  // just loops, network-backed sources override with a batched forward
  virtual void value_many(const std::vector<std::pair<StateKey, double>>& queries,
                          double* out) const {
    for (size_t i = 0; i < queries.size(); ++i)
      out[i] = value(queries[i].first, queries[i].second);
  }
  virtual void conditional_many(const std::vector<std::pair<StateKey, double>>& queries,
                                double* out) const {
    for (size_t i = 0; i < queries.size(); ++i)
      out[i] = conditional_value(queries[i].first, queries[i].second);
  }
};

// Shared cerebellar embedding and trunk with two scalar heads. The
// conditional head fuses an 8-dim learned option embedding multiplicatively
// with a projection of the trunk features.
class DualValueNet : public ValueSource {
 public:
  explicit DualValueNet(EmbeddingConfig ecfg = {}, uint64_t seed = 1);

  double gamma() const { return gamma_; }
  double horizon_min() const { return horizon_min_; }
  void set_gamma(double g) { gamma_ = g; }
  void set_horizon_min(double h) { horizon_min_ = h; }

  // raw head outputs at the state's own time
  double value_raw(const StateKey& s) const;
  double conditional_raw(const StateKey& s) const;
  Eigen::VectorXd value_raw_batch(const std::vector<StateKey>& states) const;
  Eigen::VectorXd conditional_raw_batch(const std::vector<StateKey>& states) const;

  // discounted future-time queries; past the horizon the state is terminal
  double value(const StateKey& s, double dt_min) const override;
  double conditional_value(const StateKey& s, double dt_min) const override;
  void value_many(const std::vector<std::pair<StateKey, double>>& queries,
                  double* out) const override;
  void conditional_many(const std::vector<std::pair<StateKey, double>>& queries,
                        double* out) const override;

  CerebellarEmbedding& embedding() { return embed_; }
  const CerebellarEmbedding& embedding() const { return embed_; }

  // dense parameters: trunk, V head, conditional projection/output, option
  // embedding, as one flat vector (memory matrix excluded)
  int dense_param_count() const;
  Eigen::VectorXd dense_params() const;
  void set_dense_params(const Eigen::VectorXd& p);

  void save(const std::string& path) const;
  static DualValueNet load(const std::string& path);

 private:
  friend class DpeTrainer;

  struct Forward {
    nn::Stack::Cache trunk, head_v, proj, head_b;
    Eigen::MatrixXd emb;   // batch x dim
    Eigen::MatrixXd z;     // trunk output
    Eigen::MatrixXd p;     // conditional projection output
    Eigen::MatrixXd v;     // batch x 1
    Eigen::MatrixXd vb;    // batch x 1
  };
  void forward_batch(const std::vector<StateKey>& states, Forward* f) const;

  CerebellarEmbedding embed_;
  nn::Stack trunk_;    // dim -> 32 -> 128 -> 32, relu
  nn::Stack head_v_;   // 32 -> 1
  nn::Stack proj_;     // 32 -> 8
  nn::Stack head_b_;   // 8 -> 1
  Eigen::MatrixXd u_;  // 2 x 8 option embedding; row 1 = dispatch
  double gamma_ = 0.92;
  double horizon_min_ = 1440;
};

// Gradient of a batch loss with respect to the net.
struct VnGrad {
  Eigen::VectorXd dense;
  std::map<int, Eigen::VectorXd> memory_rows;
  double loss_v = 0;
  double loss_vb = 0;
};

// Fixed regression targets for one batch (computed before any update so the
// loss is an ordinary least squares in the parameters).
struct VnTargets {
  Eigen::VectorXd y_v;
  Eigen::VectorXd y_vb;
  std::vector<char> dispatch;
};

// Dual Policy Evaluation: the marginal head bootstraps on a periodically
// synced frozen copy, the conditional head (updated only on dispatch
// transitions) bootstraps on the online marginal head.
class DpeTrainer {
 public:
  DpeTrainer(DualValueNet* net, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }

  // filters non-finite records (kept as a counter + diagnostics)
  std::vector<VnSample> sanitize(const std::vector<VnSample>& batch);

  VnTargets make_targets(const std::vector<VnSample>& batch) const;

  // pure evaluation at the current parameters; no state change
  VnGrad loss_and_grad(const std::vector<VnSample>& batch,
                       const VnTargets& targets) const;

  // one optimization step; returns per-head losses of the batch
  std::pair<double, double> update_batch(const std::vector<VnSample>& batch);

  int64_t updates_done() const { return updates_; }
  int64_t rejected_records() const { return rejected_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  void write_log_csv(const std::string& path) const;

  // trainer checkpoint (optimizer moments, step counts, frozen target) for
  // bit-compatible resume; the net itself is saved separately
  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  void sync_target();

  DualValueNet* net_;
  TrainConfig cfg_;
  DualValueNet target_;
  nn::Adam adam_dense_;
  Eigen::MatrixXd mem_m_, mem_v_;  // per-row moments for the memory matrix
  int64_t mem_t_ = 0;
  int64_t updates_ = 0;
  int64_t rejected_ = 0;
  std::vector<std::string> diagnostics_;
  struct LogRow {
    int64_t iteration;
    double loss_v;
    double loss_vb;
  };
  std::vector<LogRow> log_;
};

}  // namespace reposim
