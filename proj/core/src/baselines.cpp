#include "reposim/baselines.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "reposim/errors.hpp"

namespace reposim {

CellId random_policy(const GridIndex& grid, CellId cell, Rng& rng) {
  std::vector<CellId> options;
  if (grid.is_valid(cell)) options.push_back(cell);
  for (CellId nb : grid.neighbors(cell)) options.push_back(nb);
  if (options.empty())
    throw LookupError("no valid destination from cell " + std::to_string(cell));
  std::uniform_int_distribution<size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

CellId greedy_policy(const GridIndex& grid, const TravelTimeModel& tt,
                     const ValueSource& values, CellId cell, double minute,
                     const PlannerConfig& cfg) {
  PlannerConfig one_step = cfg;
  one_step.depth = 1;
  // With a single leg there is no intermediate node, so the dispatch split
  // never enters the backup and any probability source gives the same answer.
  ConstDispatchProb pd(0.0);
  VpsPlanner planner(&grid, &tt, &values, &pd, one_step);
  return planner.select_action(cell, minute);
}

int ucb1_select(const MabState& s, const DestMask& valid) {
  for (int k = 0; k < kNumDestSlots; ++k)
    if (valid[k] && s.pulls[k] == 0) return k;
  int best = -1;
  double best_index = 0;
  for (int k = 0; k < kNumDestSlots; ++k) {
    if (!valid[k]) continue;
    double index = s.mean[k] +
                   std::sqrt(2.0 * std::log(static_cast<double>(s.total)) /
                             static_cast<double>(s.pulls[k]));
    if (best < 0 || index > best_index) {
      best = k;
      best_index = index;
    }
  }
  if (best < 0) throw DataError("ucb1_select: every arm is masked");
  return best;
}

int ucb1_select(const MabState& s) {
  DestMask all{};
  all.fill(true);
  return ucb1_select(s, all);
}

void record_return(MabState& s, int arm, double value) {
  if (arm < 0 || arm >= kNumDestSlots)
    throw DataError("record_return: arm " + std::to_string(arm) + " out of range");
  s.pulls[arm] += 1;
  s.total += 1;
  s.mean[arm] += (value - s.mean[arm]) / static_cast<double>(s.pulls[arm]);
}

int MabPolicy::select(const GridIndex& grid, CellId cell) {
  return ucb1_select(by_cell_[cell], dest_mask(grid, cell));
}

void MabPolicy::record(CellId cell, int arm, double value) {
  record_return(by_cell_[cell], arm, value);
}

const MabState& MabPolicy::state(CellId cell) const {
  auto it = by_cell_.find(cell);
  if (it == by_cell_.end())
    throw LookupError("no bandit state for cell " + std::to_string(cell));
  return it->second;
}

}  // namespace reposim
