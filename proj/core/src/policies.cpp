#include "reposim/policies.hpp"

#include <limits>
#include <random>

#include "reposim/errors.hpp"

namespace reposim {

namespace {

RepositionTarget target_for(const DecisionContext& ctx, CellId dest) {
  if (dest == ctx.cell) return {ctx.cell, ctx.location, false};
  return {dest, ctx.grid->representative_point(dest), false};
}

}  // namespace

RepositionTarget StayPolicy::decide(const DecisionContext& ctx) {
  return {ctx.cell, ctx.location, false};
}

RepositionTarget RandomRepositionPolicy::decide(const DecisionContext& ctx) {
  return target_for(ctx, random_policy(*ctx.grid, ctx.cell, *ctx.rng));
}

RepositionTarget GreedyRepositionPolicy::decide(const DecisionContext& ctx) {
  CellId dest = greedy_policy(*ctx.grid, *tt_, *values_, ctx.cell, ctx.minute, cfg_);
  return target_for(ctx, dest);
}

RepositionTarget MabRepositionPolicy::decide(const DecisionContext& ctx) {
  DestMask valid = dest_mask(*ctx.grid, ctx.cell);
  int arm;
  if (explore_) {
    std::vector<int> open;
    for (int k = 0; k < kNumDestSlots; ++k)
      if (valid[k]) open.push_back(k);
    if (open.empty()) throw DataError("no valid destination to explore");
    std::uniform_int_distribution<size_t> pick(0, open.size() - 1);
    arm = open[pick(*ctx.rng)];
  } else {
    arm = mab_.select(*ctx.grid, ctx.cell);
  }
  if (arm == 0) return {ctx.cell, ctx.location, false};
  CellId dest = ctx.grid->neighbor_in_dir(ctx.cell, arm);
  return target_for(ctx, dest);
}

void MabRepositionPolicy::feedback(CellId cell, int slot, double value) {
  if (slot < 0) return;  // long-range moves carry no arm
  mab_.record(cell, slot, value);
}

RepositionTarget VpsRepositionPolicy::decide(const DecisionContext& ctx) {
  const PlannerConfig& cfg = planner_.config();
  if (ctx.since_dispatch_min >= cfg.long_trigger_min) {
    RepositionTarget t = planner_.long_search(ctx.cell, ctx.location, ctx.minute);
    if (t.long_range) return t;
    // fell back to the regular expansion; treat as an ordinary step below
  }
  CellId dest = stochastic_
                    ? planner_.select_action_stochastic(ctx.cell, ctx.minute, *ctx.rng)
                    : planner_.select_action(ctx.cell, ctx.minute);
  return target_for(ctx, dest);
}

RepositionTarget QnetRepositionPolicy::decide(const DecisionContext& ctx) {
  DestMask valid = dest_mask(*ctx.grid, ctx.cell);
  const AxialCoord& ax = ctx.grid->cell(ctx.cell).axial;
  StateKey s{ax.q, ax.r, ctx.minute};
  SDContext sd = ctx.sd ? *ctx.sd : SDContext{};
  SdRegConfig reg = sd_reg_ ? reg_ : SdRegConfig{0.0, std::numeric_limits<double>::infinity()};
  int slot = act(*net_, s, sd, valid, reg, *ctx.rng);
  if (slot == 0) return {ctx.cell, ctx.location, false};
  return target_for(ctx, ctx.grid->neighbor_in_dir(ctx.cell, slot));
}

}  // namespace reposim
