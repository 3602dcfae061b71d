#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reposim/demand.hpp"
#include "reposim/dispatch_model.hpp"
#include "reposim/hexgrid.hpp"
#include "reposim/metrics.hpp"
#include "reposim/planner.hpp"
#include "reposim/qnet.hpp"
#include "reposim/rng.hpp"

namespace reposim {

// Passenger cancellation once an order is matched: probability rises with
// pick-up distance along a sigmoid in log distance (log-logistic), which
// pins p(0) = floor, p(midpoint) = halfway, p(inf) = ceiling exactly. The
// scale matches a plain logistic's slope at the midpoint.
struct CancellationConfig {
  double midpoint_m = 2000.0;
  double scale_m = 500.0;
  double floor = 0.0;
  double ceiling = 1.0;
};

double cancel_probability(const CancellationConfig& cfg, double pickup_m);
bool maybe_cancel(const CancellationConfig& cfg, double pickup_m, Rng& rng);

// Online/offline behavior of the unmanaged fleet. Arrivals are Poisson over
// the whole city; departures are a per-driver exponential hazard applied
// while idle. Managed drivers never churn.
struct ChurnConfig {
  double arrival_rate_per_hour = 0.0;
  double offline_hazard_per_hour = 0.0;
};

int poisson_arrivals(double rate_per_hour, double dt_s, Rng& rng);
bool offline_draw(double hazard_per_hour, double dt_s, Rng& rng);

enum class DriverStatus { kIdle, kRepositioning, kServing, kOffline };

struct DriverState {
  LatLon location{};
  CellId cell = kNoCell;
  double time_s = 0;  // seconds since episode start
};

struct DriverAgent {
  int64_t id = 0;
  DriverState state;
  DriverStatus status = DriverStatus::kIdle;
  bool managed = false;
  double idle_since_s = 0;
  double income = 0;
  double online_s = 0;
  double in_service_s = 0;
};

enum class OptionKind { kReposition, kDispatch };

struct OptionRecord {
  OptionKind kind = OptionKind::kReposition;
  CellId destination = kNoCell;  // reposition target cell
  int64_t trip_id = -1;          // dispatch order id
  double duration_min = 0;
  double price = 0;  // > 0 for dispatch
  double cost = 0;   // >= 0 for reposition
  double reward() const { return kind == OptionKind::kDispatch ? price : -cost; }
};

// One option execution of one driver, the training-data atom. k counts whole
// one-minute steps (at least 1). A record is terminal when the option runs
// into the episode end.
struct TransitionRecord {
  int64_t driver_id = 0;
  bool managed = false;
  DriverState s;
  OptionRecord option;
  double reward = 0;
  int k = 1;
  DriverState s_next;
  bool terminal = false;
};

struct SimConfig {
  double match_window_s = 2.0;
  double reposition_review_s = 100.0;
  double idle_threshold_min = 5.0;  // L
  double horizon_s = 8 * 3600.0;
  double start_minute_of_day = 660;  // episode clock offset, 660 = 11:00
  int day_of_week = 2;
  uint64_t seed = 1;

  int num_drivers = 50;
  int num_managed = 10;

  double speed_m_per_min = 400.0;  // pick-up and reposition cruising speed
  double reposition_cost_per_min = 0.0;
  double order_patience_s = 300.0;
  double sd_window_s = 600.0;  // request-count lookback for SD contexts
  double gamma = 0.92;         // discounts accrued decision-to-decision returns

  CancellationConfig cancellation;
  ChurnConfig churn;
  bool record_sd_snapshots = true;

  void validate() const;  // throws DataError
};

// Everything a reposition policy may look at when deciding for one driver.
struct DecisionContext {
  const GridIndex* grid = nullptr;
  CellId cell = kNoCell;
  LatLon location{};
  double time_s = 0;
  double minute_of_day = 0;  // absolute, wraps at 1440
  double minute = 0;         // start minute + elapsed, not wrapped; the clock
                             // logged state keys and value-net queries use
  double idle_min = 0;            // since the idle clock last reset
  double since_dispatch_min = 0;  // since the last trip ended (long-search clock)
  int64_t driver_id = 0;
  const SDContext* sd = nullptr;
  Rng* rng = nullptr;
};

// Pluggable repositioning policy pi_r. decide() is called once per managed
// driver per review that finds the driver idle past L; feedback() delivers
// the realized discounted return of the previous decision just before the
// next one, for bandit-style learners.
class RepositionPolicy {
 public:
  virtual ~RepositionPolicy() = default;
  virtual RepositionTarget decide(const DecisionContext& ctx) = 0;
  virtual void feedback(CellId cell, int slot, double value) {
    (void)cell, (void)slot, (void)value;
  }
  virtual std::string name() const = 0;
};

// Minimum total pick-up distance matching between driver and order
// positions; the smaller side is matched completely. Returns (driver index,
// order index) pairs.
std::vector<std::pair<int, int>> match_batch(const std::vector<LatLon>& drivers,
                                             const std::vector<LatLon>& orders,
                                             const Projection& proj);

struct OrderOutcomeCounts {
  int64_t created = 0;
  int64_t completed = 0;
  int64_t cancelled = 0;
  int64_t expired = 0;
};

struct RepositionCounts {
  int64_t issued = 0;       // policy decisions, managed drivers
  int64_t stays = 0;
  int64_t completed = 0;    // reached the destination (or dispatched there)
  int64_t interrupted = 0;  // dispatched in a third cell
  int64_t voided = 0;       // dispatched in the origin cell: never took place
  int64_t cruises = 0;      // unmanaged idle-cruising legs
};

struct SdSnapshot {
  double time_s = 0;
  CellId cell = kNoCell;
  double idle = 0;
  double requests = 0;
  double unassigned = 0;
};

struct EpisodeResult {
  std::vector<DriverAgent> drivers;  // final agent states
  std::vector<DriverLog> logs;
  EpisodeMetrics metrics;
  std::vector<TransitionRecord> transitions;
  std::vector<SarsaSample> decisions;      // managed decision-to-decision hops
  std::vector<DriverEvent> driver_events;  // dispatch-classifier training feed
  std::vector<SdSnapshot> sd_snapshots;
  OrderOutcomeCounts orders;
  RepositionCounts repositions;
  double policy_cpu_s = 0;  // wall time inside decide(); not part of the log
};

// Single-threaded deterministic event loop over one episode: dispatch
// matching every window, reposition reviews on the coarser cadence, orders
// expiring after the patience window, churn of the unmanaged fleet.
// `cruising` may be null (unmanaged drivers then hold position when idle).
EpisodeResult run_episode(const GridIndex& grid, const TravelTimeModel& tt,
                          const std::vector<TripOrder>& demand, RepositionPolicy& policy,
                          const SimConfig& cfg, const CruisingModel* cruising = nullptr);

}  // namespace reposim
