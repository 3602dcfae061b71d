#include "reposim/nn.hpp"

#include <cmath>

#include "reposim/errors.hpp"

namespace reposim::nn {

void Stack::add_layer(int in, int out, Act act) {
  if (!layers_.empty() && static_cast<int>(layers_.back().W.rows()) != in)
    throw DataError("layer input does not match previous layer output");
  Layer l;
  l.W = Eigen::MatrixXd::Zero(out, in);
  l.b = Eigen::VectorXd::Zero(out);
  l.act = act;
  layers_.push_back(std::move(l));
}

void Stack::init(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (Layer& l : layers_) {
    double fan_in = static_cast<double>(l.W.cols());
    double scale = l.act == Act::kRelu ? std::sqrt(2.0 / fan_in)
                                       : std::sqrt(1.0 / fan_in);
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = scale * g(rng);
    l.b.setZero();
  }
}

int Stack::param_count() const {
  int n = 0;
  for (const Layer& l : layers_)
    n += static_cast<int>(l.W.size() + l.b.size());
  return n;
}

Eigen::MatrixXd Stack::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  Eigen::MatrixXd h = x;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (const Layer& l : layers_) {
    if (cache) cache->inputs.push_back(h);
    Eigen::MatrixXd z = (h * l.W.transpose()).rowwise() + l.b.transpose();
    if (cache) cache->pre.push_back(z);
    h = l.act == Act::kRelu ? z.cwiseMax(0.0).eval() : std::move(z);
  }
  return h;
}

Eigen::MatrixXd Stack::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                                Eigen::Ref<Eigen::VectorXd> grad) const {
  Eigen::MatrixXd d = d_out;
  int offset = static_cast<int>(grad.size());
  // walk layers backwards; flat offsets computed from the tail
  std::vector<int> starts(layers_.size());
  int pos = 0;
  for (size_t i = 0; i < layers_.size(); ++i) {
    starts[i] = pos;
    pos += static_cast<int>(layers_[i].W.size() + layers_[i].b.size());
  }
  if (pos != offset) throw DataError("gradient buffer size mismatch");

  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& l = layers_[li];
    Eigen::MatrixXd dz = d;
    if (l.act == Act::kRelu)
      dz = dz.cwiseProduct((cache.pre[li].array() > 0.0).cast<double>().matrix());
    Eigen::MatrixXd dW = dz.transpose() * cache.inputs[li];
    Eigen::VectorXd db = dz.colwise().sum();
    int s = starts[li];
    Eigen::Map<Eigen::VectorXd>(grad.data() + s, dW.size()) +=
        Eigen::Map<const Eigen::VectorXd>(dW.data(), dW.size());
    Eigen::Map<Eigen::VectorXd>(grad.data() + s + dW.size(), db.size()) += db;
    d = dz * l.W;
  }
  return d;
}

double Stack::add_l2(double lambda, Eigen::Ref<Eigen::VectorXd> grad) const {
  double penalty = 0;
  int pos = 0;
  for (const Layer& l : layers_) {
    penalty += 0.5 * lambda * l.W.squaredNorm();
    Eigen::Map<Eigen::VectorXd>(grad.data() + pos, l.W.size()) +=
        lambda * Eigen::Map<const Eigen::VectorXd>(l.W.data(), l.W.size());
    pos += static_cast<int>(l.W.size() + l.b.size());
  }
  return penalty;
}

Eigen::VectorXd Stack::flat_params() const {
  Eigen::VectorXd p(param_count());
  int pos = 0;
  for (const Layer& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(p.data() + pos, l.W.size()) =
        Eigen::Map<const Eigen::VectorXd>(l.W.data(), l.W.size());
    pos += static_cast<int>(l.W.size());
    p.segment(pos, l.b.size()) = l.b;
    pos += static_cast<int>(l.b.size());
  }
  return p;
}

void Stack::set_flat_params(const Eigen::VectorXd& p) {
  if (p.size() != param_count()) throw DataError("flat parameter size mismatch");
  int pos = 0;
  for (Layer& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.W.data(), l.W.size()) =
        p.segment(pos, l.W.size());
    pos += static_cast<int>(l.W.size());
    l.b = p.segment(pos, l.b.size());
    pos += static_cast<int>(l.b.size());
  }
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) reset(static_cast<int>(params.size()));
  ++t;
  m = beta1 * m + (1 - beta1) * grad;
  v = beta2 * v + (1 - beta2) * grad.cwiseProduct(grad);
  double bc1 = 1 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1 - std::pow(beta2, static_cast<double>(t));
  Eigen::VectorXd denom = (v / bc2).cwiseSqrt();
  denom.array() += eps;
  params -= (lr / bc1) * m.cwiseQuotient(denom);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  double mx = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - mx).exp();
  return e / e.sum();
}

int softmax_sample(const Eigen::VectorXd& z, Rng& rng) {
  Eigen::VectorXd p = softmax(z);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  double acc = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (r <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace reposim::nn
