#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reposim/demand.hpp"
#include "reposim/dispatch_model.hpp"
#include "reposim/hexgrid.hpp"
#include "reposim/planner.hpp"
#include "reposim/policies.hpp"
#include "reposim/qnet.hpp"
#include "reposim/simulator.hpp"
#include "reposim/valuenet.hpp"

namespace reposim::cli {

// REPOSIM_LOG=quiet|warn|info|debug; default info. Messages go to stderr so
// report payloads on stdout stay clean.
enum class LogLevel { kQuiet = 0, kWarn, kInfo, kDebug };
LogLevel log_level();
void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// Bad command-line usage (unknown policy string and the like); exits 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path);
void write_text(const std::string& path, const std::string& body);
void ensure_dir(const std::string& path);

// Loaded-once immutable inputs shared by every episode of a command. Held
// behind unique_ptrs so the struct can move without invalidating the travel
// time model's grid pointer.
struct Scenario {
  std::unique_ptr<GridIndex> grid;
  std::unique_ptr<TravelTimeModel> tt;
  std::vector<TripOrder> orders;
  std::unique_ptr<CruisingModel> cruising;  // may be null
};

Scenario load_scenario(const std::string& grid_path, const std::string& demand_path,
                       const std::string& cruising_path, double speed_m_per_min);

// Frozen trained artifacts referenced by policy specs; any slot may be null
// when no policy in the roster needs it.
struct Artifacts {
  std::unique_ptr<DualValueNet> value_net;
  std::unique_ptr<DispatchClassifier> dispatch;
  std::unique_ptr<LongSearchTable> ls_table;
  std::unique_ptr<QNetwork> qnet;
  double const_pd = 0.5;  // dispatch probability when no classifier is given
};

// roster string: random | greedy | mab | stay | vps[:depth][:stochastic] |
// sarsa[:sdreg]
struct PolicySpec {
  std::string kind;       // random, greedy, mab, stay, vps, sarsa
  int depth = 2;          // vps
  bool stochastic = false;
  bool sd_reg = false;    // sarsa
  std::string label;      // the original roster token
};

PolicySpec parse_policy_spec(const std::string& token);

// A policy plus the per-instance helpers it points into.
struct PolicyBundle {
  std::unique_ptr<DispatchProbSource> pd;
  std::unique_ptr<RepositionPolicy> policy;
};

PolicyBundle make_policy(const PolicySpec& spec, const Scenario& sc, const Artifacts& art,
                         const SimConfig& cfg, const PlannerConfig& pcfg);

// Planner knobs derived from the sim config; depth comes from the spec.
PlannerConfig planner_config_for(const SimConfig& cfg, int depth);

}  // namespace reposim::cli
