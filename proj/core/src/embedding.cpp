#include "reposim/embedding.hpp"

#include <cmath>

#include "reposim/errors.hpp"

namespace reposim {

namespace {

int floor_div(int a, int b) {
  int d = a / b, r = a % b;
  return (r != 0 && (r < 0) != (b < 0)) ? d - 1 : d;
}

}  // namespace

CerebellarEmbedding::CerebellarEmbedding(EmbeddingConfig cfg, uint64_t init_seed)
    : cfg_(cfg) {
  if (cfg_.n < 1 || cfg_.memory < cfg_.n || cfg_.dim < 1)
    throw DataError("bad embedding config");
  theta_ = Eigen::MatrixXd::Zero(cfg_.memory, cfg_.dim);
  Rng rng(init_seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double scale = std::sqrt(1.0 / cfg_.dim);
  for (Eigen::Index i = 0; i < theta_.rows(); ++i)
    for (Eigen::Index j = 0; j < theta_.cols(); ++j) theta_(i, j) = scale * g(rng);
}

std::vector<int> CerebellarEmbedding::active_rows(const StateKey& s) const {
  std::vector<int> rows(cfg_.n);
  int64_t mem = cfg_.memory;
  for (int i = 0; i < cfg_.n; ++i) {
    // per-quantizer lattice displacement; any fixed scheme works as long as
    // the tilings differ
    int oq = i % cfg_.cell_coarsen;
    int orr = (i / 2 + i) % cfg_.cell_coarsen;
    double ot = static_cast<double>(i) * cfg_.time_bin_min / cfg_.n;
    int qq = floor_div(s.q + oq, cfg_.cell_coarsen);
    int rr = floor_div(s.r + orr, cfg_.cell_coarsen);
    int tt = static_cast<int>(std::floor((s.minute + ot) / cfg_.time_bin_min));
    uint64_t h = cfg_.hash_seed;
    h = hash_combine(h, static_cast<uint64_t>(i) + 1);
    h = hash_combine(h, static_cast<uint64_t>(static_cast<int64_t>(qq)));
    h = hash_combine(h, static_cast<uint64_t>(static_cast<int64_t>(rr)));
    h = hash_combine(h, static_cast<uint64_t>(static_cast<int64_t>(tt)));
    // private bank per quantizer keeps the n active rows distinct
    int64_t bank_lo = mem * i / cfg_.n;
    int64_t bank_hi = mem * (i + 1) / cfg_.n;
    rows[i] = static_cast<int>(bank_lo + static_cast<int64_t>(h % static_cast<uint64_t>(bank_hi - bank_lo)));
  }
  return rows;
}

Eigen::VectorXd CerebellarEmbedding::embed(const StateKey& s) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cfg_.dim);
  for (int row : active_rows(s)) out += theta_.row(row);
  return out / static_cast<double>(cfg_.n);
}

Eigen::MatrixXd CerebellarEmbedding::embed_batch(const std::vector<StateKey>& states) const {
  Eigen::MatrixXd out(states.size(), cfg_.dim);
  for (size_t i = 0; i < states.size(); ++i) out.row(i) = embed(states[i]);
  return out;
}

}  // namespace reposim
