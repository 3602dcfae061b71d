#include "reposim/qnet.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "reposim/errors.hpp"
#include "reposim/valuenet.hpp"
#include "serialize_nn.hpp"

namespace reposim {

Eigen::VectorXd sd_gaps(const SDContext& sd) {
  return (sd.f.row(2) - sd.f.row(0)).transpose();
}

Eigen::VectorXd attention_weights(const Eigen::Matrix3d& w, const SDContext& sd) {
  Eigen::VectorXd alphas = Eigen::VectorXd::Zero(6);
  std::vector<int> live;
  Eigen::RowVector3d probe = sd.f.col(0).transpose() * w;
  std::vector<double> logits;
  for (int i = 1; i <= 6; ++i) {
    if (!sd.present[i]) continue;
    live.push_back(i);
    logits.push_back(probe.dot(sd.f.col(i)));
  }
  if (live.empty()) return alphas;
  Eigen::VectorXd p = nn::softmax(Eigen::Map<Eigen::VectorXd>(logits.data(), logits.size()));
  for (size_t j = 0; j < live.size(); ++j) alphas[live[j] - 1] = p[static_cast<int>(j)];
  return alphas;
}

Eigen::VectorXd sd_regularize(const Eigen::VectorXd& q, const Eigen::VectorXd& gaps,
                              const SdRegConfig& cfg) {
  if (q.size() != gaps.size()) throw DataError("gap vector size mismatch");
  if (cfg.alpha < 0) throw DataError("sd regularization weight must be >= 0");
  Eigen::VectorXd out = q;
  for (int k = 0; k < q.size(); ++k)
    if (gaps[k] > cfg.beta) out[k] += cfg.alpha * gaps[k];
  return out;
}

Eigen::VectorXd boltzmann_distribution(const Eigen::VectorXd& q, const DestMask& valid) {
  if (q.size() != kNumDestSlots) throw DataError("expected one value per destination slot");
  std::vector<int> live;
  for (int k = 0; k < kNumDestSlots; ++k)
    if (valid[k]) live.push_back(k);
  if (live.empty()) throw DataError("all destinations are masked");
  Eigen::VectorXd z(live.size());
  for (size_t j = 0; j < live.size(); ++j) z[static_cast<int>(j)] = q[live[j]];
  Eigen::VectorXd p = nn::softmax(z);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kNumDestSlots);
  for (size_t j = 0; j < live.size(); ++j) out[live[j]] = p[static_cast<int>(j)];
  return out;
}

int boltzmann_sample(const Eigen::VectorXd& q, const DestMask& valid, Rng& rng) {
  Eigen::VectorXd p = boltzmann_distribution(q, valid);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0;
  int last = 0;
  for (int k = 0; k < p.size(); ++k) {
    if (p[k] <= 0) continue;
    last = k;
    acc += p[k];
    if (u < acc) return k;
  }
  return last;  // u landed in the rounding tail
}

QNetwork::QNetwork(EmbeddingConfig ecfg, uint64_t seed) : embed_(ecfg, derive_seed(seed, 0)) {
  stack_.add_layer(ecfg.dim + 3, 32, nn::Act::kRelu);
  stack_.add_layer(32, kNumDestSlots, nn::Act::kLinear);
  Rng rng(derive_seed(seed, 1));
  stack_.init(rng);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w_att_(i, j) = g(rng) / 3.0;
}

Eigen::VectorXd QNetwork::attention(const SDContext& sd) const {
  return attention_weights(w_att_, sd);
}

void QNetwork::forward_batch(const std::vector<StateKey>& states,
                             const std::vector<SDContext>& sds, Forward* f) const {
  if (states.size() != sds.size()) throw DataError("state/context batch size mismatch");
  int n = static_cast<int>(states.size());
  f->emb = embed_.embed_batch(states);
  int dim = embed_.dim();
  f->x = Eigen::MatrixXd::Zero(n, dim + 3);
  f->alphas = Eigen::MatrixXd::Zero(n, 6);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd a = attention_weights(w_att_, sds[i]);
    f->alphas.row(i) = a.transpose();
    Eigen::Vector3d ctx = Eigen::Vector3d::Zero();
    for (int dir = 1; dir <= 6; ++dir) ctx += a[dir - 1] * sds[i].f.col(dir);
    f->x.row(i).head(dim) = f->emb.row(i);
    f->x.row(i).tail(3) = ctx.transpose();
  }
  f->q = stack_.forward(f->x, &f->stack);
}

Eigen::VectorXd QNetwork::q_values(const StateKey& s, const SDContext& sd) const {
  Forward f;
  forward_batch({s}, {sd}, &f);
  return f.q.row(0).transpose();
}

Eigen::MatrixXd QNetwork::q_values_batch(const std::vector<StateKey>& states,
                                         const std::vector<SDContext>& sds) const {
  Forward f;
  forward_batch(states, sds, &f);
  return f.q;
}

int QNetwork::dense_param_count() const {
  return stack_.param_count() + static_cast<int>(w_att_.size());
}

Eigen::VectorXd QNetwork::dense_params() const {
  Eigen::VectorXd p(dense_param_count());
  p.head(stack_.param_count()) = stack_.flat_params();
  p.tail(w_att_.size()) = Eigen::Map<const Eigen::VectorXd>(w_att_.data(), w_att_.size());
  return p;
}

void QNetwork::set_dense_params(const Eigen::VectorXd& p) {
  if (p.size() != dense_param_count()) throw DataError("dense parameter size mismatch");
  stack_.set_flat_params(p.head(stack_.param_count()));
  Eigen::Map<Eigen::VectorXd>(w_att_.data(), w_att_.size()) = p.tail(w_att_.size());
}

void QNetwork::save(const std::string& path) const {
  nlohmann::json j;
  j["version"] = 1;
  j["type"] = "q_network";
  j["gamma"] = gamma_;
  const EmbeddingConfig& e = embed_.config();
  j["embedding"] = {{"n", e.n},
                    {"memory", e.memory},
                    {"dim", e.dim},
                    {"cell_coarsen", e.cell_coarsen},
                    {"time_bin_min", e.time_bin_min},
                    {"hash_seed", e.hash_seed}};
  j["memory_matrix"] = detail::mat_to_json(embed_.memory());
  j["stack"] = detail::stack_to_json(stack_);
  j["w_att"] = detail::mat_to_json(w_att_);
  std::ofstream f(path);
  if (!f) throw DataError("cannot write checkpoint " + path);
  f << j.dump() << "\n";
}

QNetwork QNetwork::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("type").get<std::string>() != "q_network")
      throw DataError("checkpoint " + path + " is not a q network");
    EmbeddingConfig e;
    e.n = j.at("embedding").at("n").get<int>();
    e.memory = j.at("embedding").at("memory").get<int>();
    e.dim = j.at("embedding").at("dim").get<int>();
    e.cell_coarsen = j.at("embedding").at("cell_coarsen").get<int>();
    e.time_bin_min = j.at("embedding").at("time_bin_min").get<double>();
    e.hash_seed = j.at("embedding").at("hash_seed").get<uint64_t>();
    QNetwork net(e, 1);
    net.gamma_ = j.at("gamma").get<double>();
    net.embed_.memory() = detail::mat_from_json(j.at("memory_matrix"));
    net.stack_ = detail::stack_from_json(j.at("stack"));
    Eigen::MatrixXd w = detail::mat_from_json(j.at("w_att"));
    if (w.rows() != 3 || w.cols() != 3) throw DataError("attention matrix must be 3x3");
    net.w_att_ = w;
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " missing fields: " + e.what());
  }
}

Eigen::VectorXd act_distribution(const QNetwork& net, const StateKey& s, const SDContext& sd,
                                 const DestMask& valid, const SdRegConfig& reg) {
  Eigen::VectorXd q = net.q_values(s, sd);
  return boltzmann_distribution(sd_regularize(q, sd_gaps(sd), reg), valid);
}

int act(const QNetwork& net, const StateKey& s, const SDContext& sd, const DestMask& valid,
        const SdRegConfig& reg, Rng& rng) {
  Eigen::VectorXd q = net.q_values(s, sd);
  return boltzmann_sample(sd_regularize(q, sd_gaps(sd), reg), valid, rng);
}

SarsaTrainer::SarsaTrainer(QNetwork* net, SarsaConfig cfg) : net_(net), cfg_(cfg) {
  if (cfg_.gamma <= 0 || cfg_.gamma >= 1) throw DataError("gamma must be in (0, 1)");
  net_->set_gamma(cfg_.gamma);
  adam_dense_.lr = cfg_.step_size;
  const Eigen::MatrixXd& mem = net_->embedding().memory();
  mem_m_ = Eigen::MatrixXd::Zero(mem.rows(), mem.cols());
  mem_v_ = Eigen::MatrixXd::Zero(mem.rows(), mem.cols());
}

std::vector<SarsaSample> SarsaTrainer::sanitize(const std::vector<SarsaSample>& batch) {
  std::vector<SarsaSample> ok;
  ok.reserve(batch.size());
  for (const SarsaSample& s : batch) {
    bool finite = std::isfinite(s.reward) && std::isfinite(s.s.minute) &&
                  std::isfinite(s.s_next.minute);
    bool option_ok = s.option >= 0 && s.option < kNumDestSlots;
    bool next_ok = s.terminal || (s.option_next >= 0 && s.option_next < kNumDestSlots);
    if (!finite || s.k < 1 || !option_ok || !next_ok) {
      ++rejected_;
      if (diagnostics_.size() < 100)
        diagnostics_.push_back("rejected record: reward=" + std::to_string(s.reward) +
                               " k=" + std::to_string(s.k) + " option=" +
                               std::to_string(s.option) + " next=" +
                               std::to_string(s.option_next));
      continue;
    }
    ok.push_back(s);
  }
  return ok;
}

Eigen::VectorXd SarsaTrainer::make_targets(const std::vector<SarsaSample>& batch) const {
  size_t n = batch.size();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  std::vector<StateKey> next;
  std::vector<SDContext> next_sd;
  std::vector<size_t> where;
  for (size_t i = 0; i < n; ++i) {
    if (!batch[i].terminal) {
      next.push_back(batch[i].s_next);
      next_sd.push_back(batch[i].sd_next);
      where.push_back(i);
    }
  }
  Eigen::MatrixXd q_next;
  if (!next.empty()) q_next = net_->q_values_batch(next, next_sd);
  size_t j = 0;
  for (size_t i = 0; i < n; ++i) {
    const SarsaSample& s = batch[i];
    y[i] = discounted_reward(s.reward, s.k, cfg_.gamma);
    if (!s.terminal) {
      y[i] += std::pow(cfg_.gamma, s.k) * q_next(static_cast<int>(j), s.option_next);
      ++j;
    }
  }
  return y;
}

QnGrad SarsaTrainer::loss_and_grad(const std::vector<SarsaSample>& batch,
                                   const Eigen::VectorXd& targets) const {
  QnGrad g;
  size_t n = batch.size();
  std::vector<StateKey> states(n);
  std::vector<SDContext> sds(n);
  for (size_t i = 0; i < n; ++i) {
    states[i] = batch[i].s;
    sds[i] = batch[i].sd;
  }

  QNetwork::Forward f;
  net_->forward_batch(states, sds, &f);

  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, kNumDestSlots);
  for (size_t i = 0; i < n; ++i) {
    int a = batch[i].option;
    double err = f.q(static_cast<int>(i), a) - targets[static_cast<int>(i)];
    g.loss += 0.5 * err * err / n;
    dq(static_cast<int>(i), a) = err / static_cast<double>(n);
  }

  g.dense = Eigen::VectorXd::Zero(net_->dense_param_count());
  int stack_n = net_->stack_.param_count();
  Eigen::MatrixXd dx = net_->stack_.backward(f.stack, dq, g.dense.head(stack_n));

  int dim = net_->embedding().dim();
  double inv_n_quant = 1.0 / net_->embedding().config().n;
  for (size_t i = 0; i < n; ++i) {
    for (int row : net_->embedding().active_rows(states[i])) {
      auto it = g.memory_rows.try_emplace(row, Eigen::VectorXd::Zero(dim)).first;
      it->second += dx.row(i).head(dim).transpose() * inv_n_quant;
    }
  }

  // context -> attention backward: ctx = sum_i alpha_i sd_i over present slots
  Eigen::Map<Eigen::MatrixXd> dw(g.dense.data() + stack_n, 3, 3);
  for (size_t i = 0; i < n; ++i) {
    Eigen::Vector3d dctx = dx.row(i).tail(3).transpose();
    const SDContext& sd = sds[i];
    std::vector<int> live;
    for (int dir = 1; dir <= 6; ++dir)
      if (sd.present[dir]) live.push_back(dir);
    if (live.empty()) continue;
    Eigen::VectorXd alpha(live.size()), dalpha(live.size());
    for (size_t j = 0; j < live.size(); ++j) {
      alpha[static_cast<int>(j)] = f.alphas(static_cast<int>(i), live[j] - 1);
      dalpha[static_cast<int>(j)] = sd.f.col(live[j]).dot(dctx);
    }
    double mix = alpha.dot(dalpha);
    Eigen::VectorXd dlogit = alpha.array() * (dalpha.array() - mix);
    for (size_t j = 0; j < live.size(); ++j)
      dw += dlogit[static_cast<int>(j)] * sd.f.col(0) * sd.f.col(live[j]).transpose();
  }

  double penalty = net_->stack_.add_l2(cfg_.lambda_reg, g.dense.head(stack_n));
  penalty += 0.5 * cfg_.lambda_reg * net_->w_att_.squaredNorm();
  dw += cfg_.lambda_reg * net_->w_att_;
  g.loss += penalty;
  return g;
}

double SarsaTrainer::update_batch(const std::vector<SarsaSample>& raw) {
  std::vector<SarsaSample> batch = sanitize(raw);
  if (batch.empty()) return 0.0;

  Eigen::VectorXd targets = make_targets(batch);
  QnGrad g = loss_and_grad(batch, targets);

  Eigen::VectorXd p = net_->dense_params();
  adam_dense_.step(p, g.dense);
  net_->set_dense_params(p);

  ++mem_t_;
  double bc1 = 1 - std::pow(adam_dense_.beta1, static_cast<double>(mem_t_));
  double bc2 = 1 - std::pow(adam_dense_.beta2, static_cast<double>(mem_t_));
  Eigen::MatrixXd& mem = net_->embedding().memory();
  for (const auto& [row, grad] : g.memory_rows) {
    mem_m_.row(row) = adam_dense_.beta1 * mem_m_.row(row) +
                      (1 - adam_dense_.beta1) * grad.transpose();
    mem_v_.row(row) = adam_dense_.beta2 * mem_v_.row(row) +
                      (1 - adam_dense_.beta2) * grad.cwiseProduct(grad).transpose();
    Eigen::ArrayXd denom = (mem_v_.row(row).transpose().array() / bc2).sqrt() + adam_dense_.eps;
    mem.row(row) -=
        (cfg_.step_size / bc1) * (mem_m_.row(row).transpose().array() / denom).matrix().transpose();
  }

  ++updates_;
  log_.push_back({updates_, g.loss});
  return g.loss;
}

void SarsaTrainer::write_log_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write training log " + path);
  f << "iteration,loss\n";
  for (const auto& [it, loss] : log_) f << it << "," << loss << "\n";
}

}  // namespace reposim
