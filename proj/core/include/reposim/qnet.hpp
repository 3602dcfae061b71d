#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reposim/embedding.hpp"
#include "reposim/hexgrid.hpp"
#include "reposim/nn.hpp"
#include "reposim/rng.hpp"

namespace reposim {

// Supply/demand features of the current cell and its six neighbors over a
// 10-minute sliding window. Column 0 is the driver's own cell, columns 1..6
// follow the fixed axial direction order; absent neighbors stay zero-filled
// with their presence flag off. Rows: idle driver count, total request
// count, unassigned order count.
struct SDContext {
  Eigen::Matrix<double, 3, 7> f = Eigen::Matrix<double, 3, 7>::Zero();
  std::array<bool, 7> present = {true, false, false, false, false, false, false};
};

// Per-destination SD gap: unassigned demand minus idle supply.
Eigen::VectorXd sd_gaps(const SDContext& sd);

// Attention over the present neighbor slots: alpha_i = softmax_i(sd0' W sd_i),
// with absent slots carrying weight 0.
Eigen::VectorXd attention_weights(const Eigen::Matrix3d& w, const SDContext& sd);

struct SdRegConfig {
  double alpha = 0.2;  // penalty weight
  double beta = 17.0;  // gap threshold, in the same count units as the gaps
};

// q'_k = q_k + alpha * g_k * 1(g_k > beta); entries at or below the
// threshold are returned bit-identical.
Eigen::VectorXd sd_regularize(const Eigen::VectorXd& q, const Eigen::VectorXd& gaps,
                              const SdRegConfig& cfg);

// Boltzmann distribution over the unmasked destinations; masked entries are
// exactly zero. Throws DataError when everything is masked.
Eigen::VectorXd boltzmann_distribution(const Eigen::VectorXd& q, const DestMask& valid);
int boltzmann_sample(const Eigen::VectorXd& q, const DestMask& valid, Rng& rng);

// Action-value network over (state, SD context): cerebellar state embedding,
// SD attention context, and a fully connected head producing one value per
// destination slot. One network is shared by the whole fleet.
class QNetwork {
 public:
  explicit QNetwork(EmbeddingConfig ecfg = {}, uint64_t seed = 1);

  double gamma() const { return gamma_; }
  void set_gamma(double g) { gamma_ = g; }

  const Eigen::Matrix3d& attention_matrix() const { return w_att_; }
  Eigen::VectorXd attention(const SDContext& sd) const;

  Eigen::VectorXd q_values(const StateKey& s, const SDContext& sd) const;
  Eigen::MatrixXd q_values_batch(const std::vector<StateKey>& states,
                                 const std::vector<SDContext>& sds) const;

  CerebellarEmbedding& embedding() { return embed_; }
  const CerebellarEmbedding& embedding() const { return embed_; }

  // flat dense parameters: head stack first, then the attention matrix
  int dense_param_count() const;
  Eigen::VectorXd dense_params() const;
  void set_dense_params(const Eigen::VectorXd& p);

  void save(const std::string& path) const;
  static QNetwork load(const std::string& path);

 private:
  friend class SarsaTrainer;

  struct Forward {
    nn::Stack::Cache stack;
    Eigen::MatrixXd emb;     // batch x dim
    Eigen::MatrixXd alphas;  // batch x 6
    Eigen::MatrixXd x;       // batch x (dim + 3)
    Eigen::MatrixXd q;       // batch x 7
  };
  void forward_batch(const std::vector<StateKey>& states, const std::vector<SDContext>& sds,
                     Forward* f) const;

  CerebellarEmbedding embed_;
  nn::Stack stack_;  // (dim + 3) -> 32 relu -> 7
  Eigen::Matrix3d w_att_;
  double gamma_ = 0.92;
};

// Stochastic policy step: mask invalid destinations, apply SD regularization,
// sample from the Boltzmann distribution.
Eigen::VectorXd act_distribution(const QNetwork& net, const StateKey& s, const SDContext& sd,
                                 const DestMask& valid, const SdRegConfig& reg);
int act(const QNetwork& net, const StateKey& s, const SDContext& sd, const DestMask& valid,
        const SdRegConfig& reg, Rng& rng);

// SD context assembly from any per-cell count source (simulator bookkeeping
// or a replayed snapshot stream). `counts` returns (idle, requests,
// unassigned) for an existing cell.
template <typename CountFn>
SDContext make_sd_context(const GridIndex& grid, CellId cell, CountFn&& counts) {
  SDContext sd;
  sd.f.col(0) = counts(cell);
  for (int dir = 1; dir <= 6; ++dir) {
    CellId nb = grid.neighbor_in_dir(cell, dir);
    if (nb != kNoCell) {
      sd.f.col(dir) = counts(nb);
      sd.present[dir] = true;
    }
  }
  return sd;
}

// One logged decision-to-decision hop for SARSA. `reward` is the equivalent
// constant per-minute rate over the k minutes (simcore compresses the accrued
// return before logging).
struct SarsaSample {
  StateKey s;
  SDContext sd;
  int option = 0;  // destination slot taken at s
  double reward = 0;
  int k = 1;
  StateKey s_next;
  SDContext sd_next;
  int option_next = -1;  // slot taken at s'; -1 when unknown
  bool terminal = false;
};

struct SarsaConfig {
  double gamma = 0.92;
  double step_size = 3e-4;
  double lambda_reg = 1e-4;  // L2 on dense weights
  int batch_size = 256;
  int64_t max_iterations = 20000;
};

struct QnGrad {
  Eigen::VectorXd dense;
  std::map<int, Eigen::VectorXd> memory_rows;
  double loss = 0;
};

// Deep SARSA on logged transitions: Q(s,o) regresses toward
// discounted_reward(r,k) + gamma^k Q(s',o'), with targets fixed per batch.
class SarsaTrainer {
 public:
  SarsaTrainer(QNetwork* net, SarsaConfig cfg);

  const SarsaConfig& config() const { return cfg_; }

  // drops non-finite records and non-terminal records without a next option
  std::vector<SarsaSample> sanitize(const std::vector<SarsaSample>& batch);

  Eigen::VectorXd make_targets(const std::vector<SarsaSample>& batch) const;

  QnGrad loss_and_grad(const std::vector<SarsaSample>& batch,
                       const Eigen::VectorXd& targets) const;

  double update_batch(const std::vector<SarsaSample>& batch);

  int64_t updates_done() const { return updates_; }
  int64_t rejected_records() const { return rejected_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  void write_log_csv(const std::string& path) const;

 private:
  QNetwork* net_;
  SarsaConfig cfg_;
  nn::Adam adam_dense_;
  Eigen::MatrixXd mem_m_, mem_v_;
  int64_t mem_t_ = 0;
  int64_t updates_ = 0;
  int64_t rejected_ = 0;
  std::vector<std::string> diagnostics_;
  std::vector<std::pair<int64_t, double>> log_;
};

}  // namespace reposim
