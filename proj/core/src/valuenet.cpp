#include "reposim/valuenet.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "reposim/errors.hpp"
#include "serialize_nn.hpp"

namespace reposim {

double discounted_reward(double R, int k, double gamma) {
  if (k < 1) throw DataError("discounted_reward needs k >= 1");
  if (gamma <= 0 || gamma >= 1) throw DataError("gamma must be in (0, 1)");
  if (k == 1) return R;
  return R * (std::pow(gamma, k) - 1.0) / (k * (gamma - 1.0));
}

double discounted_reward_cont(double R, double dt, double gamma) {
  if (dt < 0) throw DataError("negative duration");
  if (gamma <= 0 || gamma >= 1) throw DataError("gamma must be in (0, 1)");
  if (dt < 1e-12) return R;
  return R * (std::pow(gamma, dt) - 1.0) / (dt * (gamma - 1.0));
}

DualValueNet::DualValueNet(EmbeddingConfig ecfg, uint64_t seed)
    : embed_(ecfg, derive_seed(seed, 0)) {
  trunk_.add_layer(ecfg.dim, 32, nn::Act::kRelu);
  trunk_.add_layer(32, 128, nn::Act::kRelu);
  trunk_.add_layer(128, 32, nn::Act::kRelu);
  head_v_.add_layer(32, 1, nn::Act::kLinear);
  proj_.add_layer(32, 8, nn::Act::kLinear);
  head_b_.add_layer(8, 1, nn::Act::kLinear);
  Rng rng(derive_seed(seed, 1));
  trunk_.init(rng);
  head_v_.init(rng);
  proj_.init(rng);
  head_b_.init(rng);
  std::normal_distribution<double> g(0.0, 1.0);
  u_ = Eigen::MatrixXd(2, 8);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 8; ++j) u_(i, j) = g(rng) / std::sqrt(8.0);
}

void DualValueNet::forward_batch(const std::vector<StateKey>& states, Forward* f) const {
  f->emb = embed_.embed_batch(states);
  f->z = trunk_.forward(f->emb, &f->trunk);
  f->v = head_v_.forward(f->z, &f->head_v);
  f->p = proj_.forward(f->z, &f->proj);
  Eigen::MatrixXd h = f->p.array().rowwise() * u_.row(1).array();
  f->vb = head_b_.forward(h, &f->head_b);
}

double DualValueNet::value_raw(const StateKey& s) const {
  return value_raw_batch({s})[0];
}

double DualValueNet::conditional_raw(const StateKey& s) const {
  return conditional_raw_batch({s})[0];
}

Eigen::VectorXd DualValueNet::value_raw_batch(const std::vector<StateKey>& states) const {
  Eigen::MatrixXd z = trunk_.forward(embed_.embed_batch(states));
  return head_v_.forward(z).col(0);
}

Eigen::VectorXd DualValueNet::conditional_raw_batch(const std::vector<StateKey>& states) const {
  Eigen::MatrixXd z = trunk_.forward(embed_.embed_batch(states));
  Eigen::MatrixXd h = proj_.forward(z).array().rowwise() * u_.row(1).array();
  return head_b_.forward(h).col(0);
}

double DualValueNet::value(const StateKey& s, double dt_min) const {
  double t = s.minute + dt_min;
  if (t >= horizon_min_) return 0.0;
  return std::pow(gamma_, dt_min) * value_raw({s.q, s.r, t});
}

double DualValueNet::conditional_value(const StateKey& s, double dt_min) const {
  double t = s.minute + dt_min;
  if (t >= horizon_min_) return 0.0;
  return std::pow(gamma_, dt_min) * conditional_raw({s.q, s.r, t});
}

namespace {

// shared shape of the two batched query paths: zero past the horizon,
// otherwise one network forward over the surviving time-advanced states
template <typename RawBatchFn>
void many_impl(const std::vector<std::pair<StateKey, double>>& queries,
               double horizon, double gamma, RawBatchFn raw_batch, double* out) {
  std::vector<StateKey> live;
  std::vector<size_t> where;
  live.reserve(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) {
    const auto& [s, dt] = queries[i];
    double t = s.minute + dt;
    if (t >= horizon) {
      out[i] = 0.0;
    } else {
      live.push_back({s.q, s.r, t});
      where.push_back(i);
    }
  }
  if (live.empty()) return;
  Eigen::VectorXd raw = raw_batch(live);
  for (size_t j = 0; j < where.size(); ++j)
    out[where[j]] = std::pow(gamma, queries[where[j]].second) * raw[static_cast<int>(j)];
}

}  // namespace

void DualValueNet::value_many(const std::vector<std::pair<StateKey, double>>& queries,
                              double* out) const {
  many_impl(queries, horizon_min_, gamma_,
            [this](const std::vector<StateKey>& s) { return value_raw_batch(s); }, out);
}

void DualValueNet::conditional_many(const std::vector<std::pair<StateKey, double>>& queries,
                                    double* out) const {
  many_impl(queries, horizon_min_, gamma_,
            [this](const std::vector<StateKey>& s) { return conditional_raw_batch(s); }, out);
}

int DualValueNet::dense_param_count() const {
  return trunk_.param_count() + head_v_.param_count() + proj_.param_count() +
         head_b_.param_count() + static_cast<int>(u_.size());
}

Eigen::VectorXd DualValueNet::dense_params() const {
  Eigen::VectorXd p(dense_param_count());
  int pos = 0;
  for (const nn::Stack* s : {&trunk_, &head_v_, &proj_, &head_b_}) {
    p.segment(pos, s->param_count()) = s->flat_params();
    pos += s->param_count();
  }
  p.segment(pos, u_.size()) = Eigen::Map<const Eigen::VectorXd>(u_.data(), u_.size());
  return p;
}

void DualValueNet::set_dense_params(const Eigen::VectorXd& p) {
  if (p.size() != dense_param_count()) throw DataError("dense parameter size mismatch");
  int pos = 0;
  for (nn::Stack* s : {&trunk_, &head_v_, &proj_, &head_b_}) {
    s->set_flat_params(p.segment(pos, s->param_count()));
    pos += s->param_count();
  }
  Eigen::Map<Eigen::VectorXd>(u_.data(), u_.size()) = p.segment(pos, u_.size());
}

void DualValueNet::save(const std::string& path) const {
  nlohmann::json j;
  j["version"] = 1;
  j["type"] = "dual_value_net";
  j["gamma"] = gamma_;
  j["horizon_min"] = horizon_min_;
  const EmbeddingConfig& e = embed_.config();
  j["embedding"] = {{"n", e.n},
                    {"memory", e.memory},
                    {"dim", e.dim},
                    {"cell_coarsen", e.cell_coarsen},
                    {"time_bin_min", e.time_bin_min},
                    {"hash_seed", e.hash_seed}};
  j["memory_matrix"] = detail::mat_to_json(embed_.memory());
  j["trunk"] = detail::stack_to_json(trunk_);
  j["head_v"] = detail::stack_to_json(head_v_);
  j["proj"] = detail::stack_to_json(proj_);
  j["head_b"] = detail::stack_to_json(head_b_);
  j["option_embed"] = detail::mat_to_json(u_);
  std::ofstream f(path);
  if (!f) throw DataError("cannot write checkpoint " + path);
  f << j.dump() << "\n";
}

DualValueNet DualValueNet::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("type").get<std::string>() != "dual_value_net")
      throw DataError("checkpoint " + path + " is not a dual value net");
    EmbeddingConfig e;
    e.n = j.at("embedding").at("n").get<int>();
    e.memory = j.at("embedding").at("memory").get<int>();
    e.dim = j.at("embedding").at("dim").get<int>();
    e.cell_coarsen = j.at("embedding").at("cell_coarsen").get<int>();
    e.time_bin_min = j.at("embedding").at("time_bin_min").get<double>();
    e.hash_seed = j.at("embedding").at("hash_seed").get<uint64_t>();
    DualValueNet net(e, 1);
    net.gamma_ = j.at("gamma").get<double>();
    net.horizon_min_ = j.at("horizon_min").get<double>();
    net.embed_.memory() = detail::mat_from_json(j.at("memory_matrix"));
    net.trunk_ = detail::stack_from_json(j.at("trunk"));
    net.head_v_ = detail::stack_from_json(j.at("head_v"));
    net.proj_ = detail::stack_from_json(j.at("proj"));
    net.head_b_ = detail::stack_from_json(j.at("head_b"));
    net.u_ = detail::mat_from_json(j.at("option_embed"));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " missing fields: " + e.what());
  }
}

DpeTrainer::DpeTrainer(DualValueNet* net, TrainConfig cfg)
    : net_(net), cfg_(cfg), target_(*net) {
  if (cfg_.gamma <= 0 || cfg_.gamma >= 1) throw DataError("gamma must be in (0, 1)");
  net_->set_gamma(cfg_.gamma);
  target_.set_gamma(cfg_.gamma);
  adam_dense_.lr = cfg_.step_size;
  const Eigen::MatrixXd& mem = net_->embedding().memory();
  mem_m_ = Eigen::MatrixXd::Zero(mem.rows(), mem.cols());
  mem_v_ = Eigen::MatrixXd::Zero(mem.rows(), mem.cols());
}

std::vector<VnSample> DpeTrainer::sanitize(const std::vector<VnSample>& batch) {
  std::vector<VnSample> ok;
  ok.reserve(batch.size());
  for (const VnSample& s : batch) {
    bool finite = std::isfinite(s.reward) && std::isfinite(s.s.minute) &&
                  std::isfinite(s.s_next.minute);
    if (!finite || s.k < 1) {
      ++rejected_;
      if (diagnostics_.size() < 100)
        diagnostics_.push_back("rejected record: reward=" + std::to_string(s.reward) +
                               " k=" + std::to_string(s.k));
      continue;
    }
    ok.push_back(s);
  }
  return ok;
}

VnTargets DpeTrainer::make_targets(const std::vector<VnSample>& batch) const {
  VnTargets t;
  size_t n = batch.size();
  t.y_v = Eigen::VectorXd::Zero(n);
  t.y_vb = Eigen::VectorXd::Zero(n);
  t.dispatch.assign(n, 0);

  std::vector<StateKey> next(n);
  for (size_t i = 0; i < n; ++i) next[i] = batch[i].s_next;
  Eigen::VectorXd v_prev = target_.value_raw_batch(next);   // frozen copy
  Eigen::VectorXd v_online = net_->value_raw_batch(next);   // marginal online

  for (size_t i = 0; i < n; ++i) {
    const VnSample& s = batch[i];
    double disc = discounted_reward(s.reward, s.k, cfg_.gamma);
    double gk = std::pow(cfg_.gamma, s.k);
    t.y_v[i] = disc + (s.terminal ? 0.0 : gk * v_prev[i]);
    if (s.dispatch) {
      t.dispatch[i] = 1;
      t.y_vb[i] = disc + (s.terminal ? 0.0 : gk * v_online[i]);
    }
  }
  return t;
}

VnGrad DpeTrainer::loss_and_grad(const std::vector<VnSample>& batch,
                                 const VnTargets& targets) const {
  VnGrad g;
  size_t n = batch.size();
  std::vector<StateKey> states(n);
  for (size_t i = 0; i < n; ++i) states[i] = batch[i].s;

  DualValueNet::Forward f;
  net_->forward_batch(states, &f);

  int n_dispatch = 0;
  for (char c : targets.dispatch) n_dispatch += c;

  Eigen::MatrixXd dv(n, 1), dvb(n, 1);
  for (size_t i = 0; i < n; ++i) {
    double err_v = f.v(i, 0) - targets.y_v[i];
    g.loss_v += 0.5 * err_v * err_v / n;
    dv(i, 0) = err_v / static_cast<double>(n);
    if (targets.dispatch[i]) {
      double err_b = f.vb(i, 0) - targets.y_vb[i];
      g.loss_vb += 0.5 * err_b * err_b / n_dispatch;
      dvb(i, 0) = err_b / static_cast<double>(n_dispatch);
    } else {
      dvb(i, 0) = 0.0;
    }
  }

  g.dense = Eigen::VectorXd::Zero(net_->dense_param_count());
  int off_trunk = 0;
  int off_headv = off_trunk + net_->trunk_.param_count();
  int off_proj = off_headv + net_->head_v_.param_count();
  int off_headb = off_proj + net_->proj_.param_count();
  int off_u = off_headb + net_->head_b_.param_count();

  Eigen::MatrixXd dz1 = net_->head_v_.backward(
      f.head_v, dv, g.dense.segment(off_headv, net_->head_v_.param_count()));

  Eigen::MatrixXd dh = net_->head_b_.backward(
      f.head_b, dvb, g.dense.segment(off_headb, net_->head_b_.param_count()));
  // h = p .* u1: split the gradient between the projection and the embedding
  Eigen::MatrixXd dp = dh.array().rowwise() * net_->u_.row(1).array();
  Eigen::RowVectorXd du1 = (dh.array() * f.p.array()).colwise().sum();
  for (int j = 0; j < 8; ++j) g.dense[off_u + 2 * j + 1] += du1[j];  // u_ is 2x8 col-major

  Eigen::MatrixXd dz2 = net_->proj_.backward(
      f.proj, dp, g.dense.segment(off_proj, net_->proj_.param_count()));

  Eigen::MatrixXd de = net_->trunk_.backward(
      f.trunk, dz1 + dz2, g.dense.segment(off_trunk, net_->trunk_.param_count()));

  double inv_n_quant = 1.0 / net_->embedding().config().n;
  for (size_t i = 0; i < n; ++i) {
    for (int row : net_->embedding().active_rows(states[i])) {
      auto it = g.memory_rows
                    .try_emplace(row, Eigen::VectorXd::Zero(net_->embedding().dim()))
                    .first;
      it->second += de.row(i).transpose() * inv_n_quant;
    }
  }

  // L2 on dense layer weights; the conditional branch only regularizes when
  // it actually trains, so reposition-only batches leave it untouched
  double penalty = 0;
  penalty += net_->trunk_.add_l2(cfg_.lambda_reg,
                                 g.dense.segment(off_trunk, net_->trunk_.param_count()));
  penalty += net_->head_v_.add_l2(cfg_.lambda_reg,
                                  g.dense.segment(off_headv, net_->head_v_.param_count()));
  if (n_dispatch > 0) {
    penalty += net_->proj_.add_l2(cfg_.lambda_reg,
                                  g.dense.segment(off_proj, net_->proj_.param_count()));
    penalty += net_->head_b_.add_l2(cfg_.lambda_reg,
                                    g.dense.segment(off_headb, net_->head_b_.param_count()));
  }
  g.loss_v += penalty;
  return g;
}

std::pair<double, double> DpeTrainer::update_batch(const std::vector<VnSample>& raw) {
  std::vector<VnSample> batch = sanitize(raw);
  if (batch.empty()) return {0.0, 0.0};

  VnTargets targets = make_targets(batch);
  VnGrad g = loss_and_grad(batch, targets);

  Eigen::VectorXd p = net_->dense_params();
  adam_dense_.step(p, g.dense);
  net_->set_dense_params(p);

  // lazy adam on the touched memory rows only
  ++mem_t_;
  double bc1 = 1 - std::pow(adam_dense_.beta1, static_cast<double>(mem_t_));
  double bc2 = 1 - std::pow(adam_dense_.beta2, static_cast<double>(mem_t_));
  Eigen::MatrixXd& mem = net_->embedding().memory();
  for (const auto& [row, grad] : g.memory_rows) {
    mem_m_.row(row) = adam_dense_.beta1 * mem_m_.row(row) +
                      (1 - adam_dense_.beta1) * grad.transpose();
    mem_v_.row(row) =
        adam_dense_.beta2 * mem_v_.row(row) +
        (1 - adam_dense_.beta2) * grad.cwiseProduct(grad).transpose();
    Eigen::ArrayXd denom = (mem_v_.row(row).transpose().array() / bc2).sqrt() + adam_dense_.eps;
    mem.row(row) -=
        (cfg_.step_size / bc1) * (mem_m_.row(row).transpose().array() / denom).matrix().transpose();
  }

  ++updates_;
  log_.push_back({updates_, g.loss_v, g.loss_vb});
  if (cfg_.target_sync > 0 && updates_ % cfg_.target_sync == 0) sync_target();
  return {g.loss_v, g.loss_vb};
}

void DpeTrainer::sync_target() { target_ = *net_; }

void DpeTrainer::write_log_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write training log " + path);
  f << "iteration,loss_v,loss_vb\n";
  for (const LogRow& r : log_)
    f << r.iteration << "," << r.loss_v << "," << r.loss_vb << "\n";
}

void DpeTrainer::save_state(const std::string& path) const {
  nlohmann::json j;
  j["version"] = 1;
  j["type"] = "dpe_trainer_state";
  j["updates"] = updates_;
  j["mem_t"] = mem_t_;
  j["adam"] = {{"m", detail::vec_to_json(adam_dense_.m)},
               {"v", detail::vec_to_json(adam_dense_.v)},
               {"t", adam_dense_.t}};
  j["mem_m"] = detail::mat_to_json(mem_m_);
  j["mem_v"] = detail::mat_to_json(mem_v_);
  j["target_dense"] = detail::vec_to_json(target_.dense_params());
  j["target_memory"] = detail::mat_to_json(target_.embedding().memory());
  std::ofstream f(path);
  if (!f) throw DataError("cannot write trainer state " + path);
  f << j.dump() << "\n";
}

void DpeTrainer::load_state(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read trainer state " + path);
  nlohmann::json j;
  try {
    f >> j;
    if (j.at("type").get<std::string>() != "dpe_trainer_state")
      throw DataError(path + " is not a trainer state file");
    updates_ = j.at("updates").get<int64_t>();
    mem_t_ = j.at("mem_t").get<int64_t>();
    adam_dense_.m = detail::vec_from_json(j.at("adam").at("m"));
    adam_dense_.v = detail::vec_from_json(j.at("adam").at("v"));
    adam_dense_.t = j.at("adam").at("t").get<int64_t>();
    mem_m_ = detail::mat_from_json(j.at("mem_m"));
    mem_v_ = detail::mat_from_json(j.at("mem_v"));
    target_.set_dense_params(detail::vec_from_json(j.at("target_dense")));
    target_.embedding().memory() = detail::mat_from_json(j.at("target_memory"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("trainer state " + path + " malformed: " + e.what());
  }
}

}  // namespace reposim
