#pragma once

#include <vector>

#include <Eigen/Dense>

#include "reposim/rng.hpp"

namespace reposim::nn {

enum class Act { kLinear, kRelu };

// Small fully connected stack. Batches are row-major: one sample per row.
// Parameters expose a flat view (layer order, W row-major then b) so the
// optimizer and finite-difference checks can treat the net as one vector.
class Stack {
 public:
  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
    Act act = Act::kLinear;
  };

  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  void add_layer(int in, int out, Act act);
  // He-style scaling for rectified layers, Xavier otherwise.
  void init(Rng& rng);

  int input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols()); }
  int output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows()); }
  int param_count() const;
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  // d_out: gradient w.r.t. the stack output (same shape as forward result).
  // Adds parameter gradients into `grad` (flat, param_count entries) and
  // returns the gradient w.r.t. the input batch.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                           Eigen::Ref<Eigen::VectorXd> grad) const;

  // L2 penalty on weight matrices only (biases exempt): adds lambda * W to
  // the flat gradient and returns 0.5 * lambda * sum ||W||^2.
  double add_l2(double lambda, Eigen::Ref<Eigen::VectorXd> grad) const;

  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& p);

 private:
  std::vector<Layer> layers_;
};

// Adam over a flat parameter vector.
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m, v;
  int64_t t = 0;

  void reset(int dim) {
    m = Eigen::VectorXd::Zero(dim);
    v = Eigen::VectorXd::Zero(dim);
    t = 0;
  }
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);
};

// Numerically stable softmax (max-subtracted).
Eigen::VectorXd softmax(const Eigen::VectorXd& z);

// Draw an index from the softmax distribution over z.
int softmax_sample(const Eigen::VectorXd& z, Rng& rng);

}  // namespace reposim::nn
