#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reposim/hexgrid.hpp"
#include "reposim/rng.hpp"
#include "reposim/valuenet.hpp"

namespace reposim {

class DispatchClassifier;

// Dispatch probability as the planner consumes it: chance that an idle driver
// in `cell` around absolute minute-of-day `minute` gets occupied by a
// dispatch instead of completing the next reposition leg.
class DispatchProbSource {
 public:
  virtual ~DispatchProbSource() = default;
  virtual double at(CellId cell, double minute) const = 0;
};

// Binds the trained classifier to a fixed day-of-week / driver so the planner
// can query it by (cell, minute) alone.
class ClassifierDispatchProb : public DispatchProbSource {
 public:
  ClassifierDispatchProb(const DispatchClassifier* clf, int day_of_week, int64_t driver_id)
      : clf_(clf), dow_(day_of_week), driver_(driver_id) {}
  double at(CellId cell, double minute) const override;

 private:
  const DispatchClassifier* clf_;
  int dow_;
  int64_t driver_;
};

struct ConstDispatchProb : DispatchProbSource {
  explicit ConstDispatchProb(double v) : p(v) {}
  double at(CellId, double) const override { return p; }
  double p;
};

// One lookahead path c0 -> c1 -> ... -> cm. A step may repeat the previous
// cell (stay). Costs are per-leg and undiscounted; etas are cumulative
// minutes from the decision instant.
struct PathCandidate {
  std::vector<CellId> cells;     // size m+1, cells[0] = origin
  std::vector<double> leg_cost;  // size m, <= 0, 0 for stay legs
  std::vector<double> eta_min;   // size m, cumulative; stay adds the review period L
  double value = std::numeric_limits<double>::quiet_NaN();

  int steps() const { return static_cast<int>(leg_cost.size()); }
  CellId first_step() const { return cells.at(1); }
};

struct PlannerConfig {
  int depth = 2;                   // expansion depth n >= 1
  double gamma = 0.92;             // shared with the value nets
  double stay_min = 5.0;           // L: reposition review period, also stay-leg duration
  double cost_per_min = 0.0;       // reposition cost rate; leg cost = -rate * eta
  double long_trigger_min = 100.0; // idle time that switches to long search
  int table_size = 200;            // kept per interval in the long-search table
  double table_bin_min = 20.0;     // long-search interval width
  double lambda = 0.92;            // long-search discount base, lambda^(tau/10)
};

struct LongSearchEntry {
  CellId cell = kNoCell;
  LatLon point{};
  double value = 0;
};

// Per-interval shortlist of the globally best states, queried when a driver
// has idled past the long-search trigger. Immutable between rebuilds.
class LongSearchTable {
 public:
  LongSearchTable() = default;
  LongSearchTable(double bin_min, std::vector<std::vector<LongSearchEntry>> intervals)
      : bin_min_(bin_min), intervals_(std::move(intervals)) {}

  double bin_min() const { return bin_min_; }
  int num_intervals() const { return static_cast<int>(intervals_.size()); }
  int interval_of(double minute) const;
  const std::vector<LongSearchEntry>& interval(int idx) const;

  // Entry maximizing lambda^(tau/10) * V with tau = eta(from, entry.point);
  // nullopt when the interval holds nothing.
  std::optional<LongSearchEntry> query(LatLon from, double minute,
                                       const TravelTimeModel& tt, double lambda) const;

  void save(const std::string& path) const;
  static LongSearchTable load(const std::string& path);

  friend LongSearchTable build_long_search_table(const ValueSource&, const GridIndex&,
                                                 const PlannerConfig&);

 private:
  double bin_min_ = 20.0;
  std::vector<std::vector<LongSearchEntry>> intervals_;  // sorted desc by value
};

// For each interval of the day, V evaluated at every valid cell's
// representative pick-up point (averaged across the interval), top
// `table_size` kept, ties on equal value to the lower cell id.
LongSearchTable build_long_search_table(const ValueSource& values, const GridIndex& grid,
                                        const PlannerConfig& cfg);

// Where a reposition decision sends the driver.
struct RepositionTarget {
  CellId cell = kNoCell;
  LatLon point{};
  bool long_range = false;  // chosen from the long-search table
};

// Decision-time planner: enumerates lookahead paths on the hex grid, backs up
// their expected values through the dispatch-probability split, and reposition
// to the first step of the best path. Stateless over frozen nets; queries for
// many drivers may run concurrently.
class VpsPlanner {
 public:
  VpsPlanner(const GridIndex* grid, const TravelTimeModel* tt, const ValueSource* values,
             const DispatchProbSource* dispatch_prob, PlannerConfig cfg);

  const PlannerConfig& config() const { return cfg_; }
  void set_long_search_table(const LongSearchTable* table) { table_ = table; }

  // All stay-or-valid-neighbor sequences of exactly `depth` steps from
  // `origin` (values unset). When no valid cell other than the origin itself
  // is reachable within `depth`, falls back to a city-wide search and returns
  // the closest valid cells as unit paths. Throws LookupError when the grid
  // holds no valid cell at all.
  std::vector<PathCandidate> generate_paths(CellId origin, int depth) const;

  // Expected value of one path for a decision taken at `minute`. Intermediate
  // nodes split on the dispatch probability; the final node bootstraps the
  // marginal value. Every term is discounted by its cumulative eta.
  double path_value(const PathCandidate& path, double minute) const;

  // Fills `value` for every candidate, submitting all net evaluations as one
  // deduplicated batch per head.
  void value_paths(std::vector<PathCandidate>& paths, double minute) const;

  // Best Q* per first-step destination, ascending cell id.
  std::vector<std::pair<CellId, double>> first_step_values(CellId origin, double minute) const;

  // First step of the max-value path; ties resolve to the lowest cell id.
  CellId select_action(CellId origin, double minute) const;

  // Samples the first step from a Boltzmann distribution over the first-step
  // Q* values; destinations not present get probability exactly 0.
  CellId select_action_stochastic(CellId origin, double minute, Rng& rng) const;

  // Long-search escape: best table entry for the current interval, discounted
  // by lambda^(tau/10) for the travel time tau from `pos`. Falls back to
  // select_action when the interval is empty or no table is attached.
  RepositionTarget long_search(CellId cell, LatLon pos, double minute) const;

 private:
  double leg_eta(CellId from, CellId to) const;

  const GridIndex* grid_;
  const TravelTimeModel* tt_;
  const ValueSource* values_;
  const DispatchProbSource* pd_;
  PlannerConfig cfg_;
  const LongSearchTable* table_ = nullptr;
};

}  // namespace reposim
