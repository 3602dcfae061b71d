#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "reposim/rng.hpp"

namespace reposim {

struct EmbeddingConfig {
  int n = 3;                 // quantization functions
  int memory = 20000;        // rows of the shared memory (A)
  int dim = 50;              // embedding width (m)
  int cell_coarsen = 2;      // axial coordinates divided by this per tile
  double time_bin_min = 10;  // width of a time tile
  uint64_t hash_seed = 0x5eed;
};

// Spatiotemporal input to the value and Q networks: the axial coordinates of
// the driver's cell plus the minute of day.
struct StateKey {
  int q = 0;
  int r = 0;
  double minute = 0;
};

// Tile-coding memory: each of the n quantization functions coarsens the
// (q, r, minute) lattice with its own offset and hashes the tile into a
// private bank of the memory, so exactly n distinct rows activate per state.
// Collisions within a bank across states are allowed and deterministic.
class CerebellarEmbedding {
 public:
  explicit CerebellarEmbedding(EmbeddingConfig cfg = {}, uint64_t init_seed = 1);

  const EmbeddingConfig& config() const { return cfg_; }
  int dim() const { return cfg_.dim; }

  // the n active memory rows for a state, one per quantizer
  std::vector<int> active_rows(const StateKey& s) const;

  // embed(s) = mean of the active rows
  Eigen::VectorXd embed(const StateKey& s) const;

  // batch version: one embedded row per state
  Eigen::MatrixXd embed_batch(const std::vector<StateKey>& states) const;

  Eigen::MatrixXd& memory() { return theta_; }
  const Eigen::MatrixXd& memory() const { return theta_; }

 private:
  EmbeddingConfig cfg_;
  Eigen::MatrixXd theta_;  // memory x dim
};

}  // namespace reposim
