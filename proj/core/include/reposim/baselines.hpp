#pragma once

#include <array>
#include <map>

#include "reposim/hexgrid.hpp"
#include "reposim/planner.hpp"
#include "reposim/rng.hpp"
#include "reposim/valuenet.hpp"

namespace reposim {

// Uniform draw over the valid destinations (stay + valid neighbors).
CellId random_policy(const GridIndex& grid, CellId cell, Rng& rng);

// One-step expansion: argmax over the 7 options of immediate reward plus the
// discounted bootstrap. By construction this is depth-1 planning.
CellId greedy_policy(const GridIndex& grid, const TravelTimeModel& tt,
                     const ValueSource& values, CellId cell, double minute,
                     const PlannerConfig& cfg);

// Seven-armed bandit state for one location: pull counts, running mean
// returns, and the total pull count.
struct MabState {
  std::array<int64_t, kNumDestSlots> pulls{};
  std::array<double, kNumDestSlots> mean{};
  int64_t total = 0;
};

// UCB1: untried arms first in slot order, then argmax of
// mean + sqrt(2 ln N / n). Ties resolve to the lower slot.
int ucb1_select(const MabState& s, const DestMask& valid);
int ucb1_select(const MabState& s);

// Running-mean update for one observed return.
void record_return(MabState& s, int arm, double value);

// Location-conditioned bandit repositioner: one MabState per cell.
class MabPolicy {
 public:
  int select(const GridIndex& grid, CellId cell);
  void record(CellId cell, int arm, double value);

  const MabState& state(CellId cell) const;
  bool has_state(CellId cell) const { return by_cell_.count(cell) > 0; }

 private:
  std::map<CellId, MabState> by_cell_;
};

}  // namespace reposim
