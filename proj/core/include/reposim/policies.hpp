#pragma once

#include <string>

#include "reposim/baselines.hpp"
#include "reposim/planner.hpp"
#include "reposim/qnet.hpp"
#include "reposim/simulator.hpp"

namespace reposim {

// Never moves; useful as a do-nothing reference and in tests.
class StayPolicy : public RepositionPolicy {
 public:
  RepositionTarget decide(const DecisionContext& ctx) override;
  std::string name() const override { return "stay"; }
};

class RandomRepositionPolicy : public RepositionPolicy {
 public:
  RepositionTarget decide(const DecisionContext& ctx) override;
  std::string name() const override { return "random"; }
};

class GreedyRepositionPolicy : public RepositionPolicy {
 public:
  GreedyRepositionPolicy(const TravelTimeModel* tt, const ValueSource* values,
                         PlannerConfig cfg)
      : tt_(tt), values_(values), cfg_(cfg) {}
  RepositionTarget decide(const DecisionContext& ctx) override;
  std::string name() const override { return "greedy"; }

 private:
  const TravelTimeModel* tt_;
  const ValueSource* values_;
  PlannerConfig cfg_;
};

// UCB1 per-cell bandit. With `explore` set, decisions are uniform over the
// valid arms instead of the UCB index (pretraining mode); returns are
// recorded either way, so a pretrained instance carries its counts into the
// evaluation episode.
class MabRepositionPolicy : public RepositionPolicy {
 public:
  RepositionTarget decide(const DecisionContext& ctx) override;
  void feedback(CellId cell, int slot, double value) override;
  std::string name() const override { return explore_ ? "mab-explore" : "mab"; }

  void set_explore(bool on) { explore_ = on; }
  const MabPolicy& bandit() const { return mab_; }

 private:
  MabPolicy mab_;
  bool explore_ = false;
};

// Decision-time planner, deterministic or Boltzmann-sampled, switching to
// the long-search table once the driver has gone without a dispatch past the
// configured trigger.
class VpsRepositionPolicy : public RepositionPolicy {
 public:
  VpsRepositionPolicy(const GridIndex* grid, const TravelTimeModel* tt,
                      const ValueSource* values, const DispatchProbSource* pd,
                      PlannerConfig cfg, bool stochastic = false)
      : planner_(grid, tt, values, pd, cfg), stochastic_(stochastic) {}

  void set_long_search_table(const LongSearchTable* table) {
    planner_.set_long_search_table(table);
  }

  RepositionTarget decide(const DecisionContext& ctx) override;
  std::string name() const override { return stochastic_ ? "vps-stochastic" : "vps"; }

  const VpsPlanner& planner() const { return planner_; }

 private:
  VpsPlanner planner_;
  bool stochastic_;
};

// Boltzmann policy over action values, optionally SD-regularized at decision
// time.
class QnetRepositionPolicy : public RepositionPolicy {
 public:
  QnetRepositionPolicy(const QNetwork* net, bool sd_reg, SdRegConfig reg = {})
      : net_(net), sd_reg_(sd_reg), reg_(reg) {}

  RepositionTarget decide(const DecisionContext& ctx) override;
  std::string name() const override { return sd_reg_ ? "sarsa-sdreg" : "sarsa"; }

 private:
  const QNetwork* net_;
  bool sd_reg_;
  SdRegConfig reg_;
};

}  // namespace reposim
