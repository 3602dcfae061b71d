#include "reposim/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "reposim/errors.hpp"
#include "reposim/matching.hpp"

namespace reposim {

double cancel_probability(const CancellationConfig& cfg, double pickup_m) {
  if (pickup_m < 0) throw DataError("pick-up distance must be nonnegative");
  if (pickup_m == 0) return cfg.floor;
  double shape = cfg.midpoint_m / cfg.scale_m;
  double z = std::pow(pickup_m / cfg.midpoint_m, shape);
  return cfg.floor + (cfg.ceiling - cfg.floor) * (z / (1.0 + z));
}

bool maybe_cancel(const CancellationConfig& cfg, double pickup_m, Rng& rng) {
  double p = cancel_probability(cfg, pickup_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p;
}

int poisson_arrivals(double rate_per_hour, double dt_s, Rng& rng) {
  double lambda = rate_per_hour * dt_s / 3600.0;
  if (lambda <= 0) return 0;
  std::poisson_distribution<int> dist(lambda);
  return dist(rng);
}

bool offline_draw(double hazard_per_hour, double dt_s, Rng& rng) {
  if (hazard_per_hour <= 0) return false;
  double p = 1.0 - std::exp(-hazard_per_hour * dt_s / 3600.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p;
}

void SimConfig::validate() const {
  if (match_window_s <= 0 || reposition_review_s <= 0 || horizon_s <= 0)
    throw DataError("sim intervals must be positive");
  if (idle_threshold_min * 60.0 < reposition_review_s)
    throw DataError("idle threshold L must be at least the reposition review interval");
  double ratio = reposition_review_s / match_window_s;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9)
    throw DataError("reposition review interval must be a multiple of the match window");
  if (num_drivers < 0 || num_managed < 0 || num_managed > num_drivers)
    throw DataError("managed fleet size must fit within the fleet");
  if (gamma <= 0 || gamma >= 1) throw DataError("gamma must be in (0, 1)");
  if (speed_m_per_min <= 0) throw DataError("driver speed must be positive");
  if (order_patience_s <= 0) throw DataError("order patience must be positive");
  if (sd_window_s <= 0) throw DataError("SD window must be positive");
  if (reposition_cost_per_min < 0) throw DataError("reposition cost must be nonnegative");
  if (start_minute_of_day < 0 || start_minute_of_day >= 1440)
    throw DataError("start minute of day must be in [0, 1440)");
  if (cancellation.floor < 0 || cancellation.ceiling > 1 ||
      cancellation.floor > cancellation.ceiling)
    throw DataError("cancellation floor/ceiling must satisfy 0 <= floor <= ceiling <= 1");
  if (cancellation.midpoint_m <= 0 || cancellation.scale_m <= 0)
    throw DataError("cancellation midpoint and scale must be positive");
  if (churn.arrival_rate_per_hour < 0 || churn.offline_hazard_per_hour < 0)
    throw DataError("churn rates must be nonnegative");
}

std::vector<std::pair<int, int>> match_batch(const std::vector<LatLon>& drivers,
                                             const std::vector<LatLon>& orders,
                                             const Projection& proj) {
  std::vector<std::pair<int, int>> out;
  if (drivers.empty() || orders.empty()) return out;
  Eigen::MatrixXd cost(drivers.size(), orders.size());
  for (size_t i = 0; i < drivers.size(); ++i)
    for (size_t j = 0; j < orders.size(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          proj.distance_m(drivers[i], orders[j]);
  Assignment a = min_cost_assignment(cost);
  for (size_t i = 0; i < drivers.size(); ++i)
    if (a.row_to_col[i] >= 0) out.push_back({static_cast<int>(i), a.row_to_col[i]});
  return out;
}

namespace {

LatLon lerp(LatLon a, LatLon b, double u) {
  return {a.lat + (b.lat - a.lat) * u, a.lon + (b.lon - a.lon) * u};
}

struct RepoLeg {
  CellId origin_cell = kNoCell;
  CellId dest_cell = kNoCell;
  LatLon from{}, to{};
  double start_s = 0, arrive_s = 0;
  double cost_per_min = 0;
  bool is_stay = false;
  bool cruise = false;  // unmanaged idle cruising
  DriverState s0;
};

struct ServingLeg {
  int64_t order_id = -1;
  DriverState s0;
  double match_s = 0, complete_s = 0;
  double price = 0;
  LatLon dest{};
};

struct Epoch {
  bool open = false;
  DriverState s;
  SDContext sd;
  int slot = -1;
  CellId cell = kNoCell;
  double start_s = 0;
  double accrued = 0;  // discounted to start_s
};

struct SimDriver {
  DriverAgent a;
  double online_start_s = 0;
  double last_activity_end_s = 0;
  double last_trip_end_s = 0;
  std::optional<RepoLeg> repo;
  std::optional<ServingLeg> serving;
  Epoch epoch;
  DriverLog log;
};

struct PendingOrder {
  TripOrder o;
  CellId origin_cell = kNoCell;
};

class Sim {
 public:
  Sim(const GridIndex& grid, const TravelTimeModel& tt, const std::vector<TripOrder>& demand,
      RepositionPolicy& policy, const SimConfig& cfg, const CruisingModel* cruising)
      : grid_(grid), tt_(tt), demand_(demand), policy_(policy), cfg_(cfg),
        cruising_(cruising), rng_(cfg.seed) {
    cfg_.validate();
    for (const HexCell& c : grid_.cells())
      if (c.valid) valid_cells_.push_back(c.id);
    if (valid_cells_.empty()) throw DataError("grid has no valid cells");
    for (size_t i = 0; i < demand_.size(); ++i) {
      if (i > 0 && demand_[i].request_s < demand_[i - 1].request_s)
        throw DataError("demand must be sorted by request time");
      try {
        grid_.locate(demand_[i].origin);
        grid_.locate(demand_[i].destination);
      } catch (const OutOfRegionError&) {
        throw DataError("order " + std::to_string(demand_[i].id) +
                        " lies outside the tessellated region");
      }
    }
  }

  EpisodeResult run() {
    spawn_initial();
    int64_t ticks = static_cast<int64_t>(std::ceil(cfg_.horizon_s / cfg_.match_window_s - 1e-9));
    int64_t review_every =
        std::max<int64_t>(1, std::llround(cfg_.reposition_review_s / cfg_.match_window_s));
    for (int64_t n = 1; n <= ticks; ++n) {
      double t = std::min(n * cfg_.match_window_s, cfg_.horizon_s);
      process_completions(t);
      ingest_orders(t);
      expire_orders(t);
      churn(t);
      match(t);
      if (n % review_every == 0 && t < cfg_.horizon_s) review_repositions(t);
    }
    finalize();
    return std::move(result_);
  }

 private:
  double minute_of_day(double t_s) const {
    return std::fmod(cfg_.start_minute_of_day + t_s / 60.0, 1440.0);
  }
  // uncapped minute-of-day, so value-net horizons can see past-midnight times
  double state_minute(double t_s) const { return cfg_.start_minute_of_day + t_s / 60.0; }
  int hour_of_day(double t_s) const {
    return static_cast<int>(minute_of_day(t_s) / 60.0) % 24;
  }

  DriverState make_state(const SimDriver& d, double t) const {
    return {d.a.state.location, d.a.state.cell, t};
  }

  StateKey state_key(const DriverState& s) const {
    const AxialCoord& ax = grid_.cell(s.cell).axial;
    return {ax.q, ax.r, state_minute(s.time_s)};
  }

  DispatchContext dispatch_ctx(const SimDriver& d, double t) const {
    return {d.a.state.cell, minute_of_day(t), cfg_.day_of_week, d.a.id};
  }

  LatLon position_at(const SimDriver& d, double t) const {
    if (d.repo) {
      const RepoLeg& leg = *d.repo;
      if (leg.arrive_s <= leg.start_s) return leg.to;
      double u = std::clamp((t - leg.start_s) / (leg.arrive_s - leg.start_s), 0.0, 1.0);
      return lerp(leg.from, leg.to, u);
    }
    return d.a.state.location;
  }

  void set_position(SimDriver& d, LatLon p, double t) {
    d.a.state.location = p;
    d.a.state.cell = grid_.locate(p);
    d.a.state.time_s = t;
  }

  void spawn_initial() {
    std::uniform_int_distribution<size_t> pick(0, valid_cells_.size() - 1);
    for (int i = 0; i < cfg_.num_drivers; ++i) {
      SimDriver d;
      d.a.id = next_driver_id_++;
      d.a.managed = i < cfg_.num_managed;
      CellId cell = valid_cells_[pick(rng_)];
      d.a.state = {grid_.representative_point(cell), cell, 0.0};
      d.a.status = DriverStatus::kIdle;
      d.a.idle_since_s = 0;
      d.online_start_s = 0;
      d.log.driver_id = static_cast<int>(d.a.id);
      d.log.managed = d.a.managed;
      result_.driver_events.push_back({DriverEventKind::kOnline, dispatch_ctx(d, 0.0)});
      drivers_.push_back(std::move(d));
    }
  }

  void spawn_arrival(double t) {
    std::uniform_int_distribution<size_t> pick(0, valid_cells_.size() - 1);
    SimDriver d;
    d.a.id = next_driver_id_++;
    d.a.managed = false;
    CellId cell = valid_cells_[pick(rng_)];
    d.a.state = {grid_.representative_point(cell), cell, t};
    d.a.status = DriverStatus::kIdle;
    d.a.idle_since_s = t;
    d.online_start_s = t;
    d.last_trip_end_s = t;
    d.log.driver_id = static_cast<int>(d.a.id);
    d.log.managed = false;
    result_.driver_events.push_back({DriverEventKind::kOnline, dispatch_ctx(d, t)});
    drivers_.push_back(std::move(d));
  }

  void accrue(SimDriver& d, double t, double reward) {
    if (!d.epoch.open) return;
    d.epoch.accrued += std::pow(cfg_.gamma, (t - d.epoch.start_s) / 60.0) * reward;
  }

  void log_reposition(SimDriver& d, const RepoLeg& leg, double end_s, double cost) {
    TransitionRecord rec;
    rec.driver_id = d.a.id;
    rec.managed = d.a.managed;
    rec.s = leg.s0;
    double dur_min = (end_s - leg.start_s) / 60.0;
    rec.option = {OptionKind::kReposition, leg.dest_cell, -1, dur_min, 0.0, cost};
    rec.reward = -cost;
    rec.k = std::max(1, static_cast<int>(std::llround(dur_min)));
    rec.s_next = make_state(d, end_s);
    rec.terminal = end_s >= cfg_.horizon_s;
    result_.transitions.push_back(std::move(rec));
  }

  void complete_reposition(SimDriver& d, double) {
    RepoLeg leg = *d.repo;
    d.repo.reset();
    set_position(d, leg.to, leg.arrive_s);
    double dur_min = (leg.arrive_s - leg.start_s) / 60.0;
    double cost = leg.is_stay ? 0.0 : leg.cost_per_min * dur_min;
    log_reposition(d, leg, leg.arrive_s, cost);
    accrue(d, leg.arrive_s, -cost);
    d.a.status = DriverStatus::kIdle;
    // repositioning legs chain: the driver is immediately reviewable again
    d.a.idle_since_s = leg.arrive_s - cfg_.idle_threshold_min * 60.0;
    // a stay is not an activity; it must not stretch the online span
    if (!leg.is_stay) d.last_activity_end_s = leg.arrive_s;
    result_.repositions.completed += (leg.cruise || leg.is_stay) ? 0 : 1;
    result_.driver_events.push_back(
        {DriverEventKind::kIdleStart, dispatch_ctx(d, leg.arrive_s)});
  }

  void complete_trip(SimDriver& d, double) {
    ServingLeg leg = *d.serving;
    d.serving.reset();
    set_position(d, leg.dest, leg.complete_s);
    d.a.income += leg.price;
    d.a.in_service_s += leg.complete_s - leg.match_s;
    d.log.trips.push_back({leg.complete_s / 60.0, leg.price});
    d.log.serving_spans.push_back({leg.match_s / 60.0, leg.complete_s / 60.0});
    accrue(d, leg.complete_s, leg.price);

    TransitionRecord rec;
    rec.driver_id = d.a.id;
    rec.managed = d.a.managed;
    rec.s = leg.s0;
    double dur_min = (leg.complete_s - leg.match_s) / 60.0;
    rec.option = {OptionKind::kDispatch, kNoCell, leg.order_id, dur_min, leg.price, 0.0};
    rec.reward = leg.price;
    rec.k = std::max(1, static_cast<int>(std::llround(dur_min)));
    rec.s_next = make_state(d, leg.complete_s);
    rec.terminal = leg.complete_s >= cfg_.horizon_s;
    result_.transitions.push_back(std::move(rec));

    d.a.status = DriverStatus::kIdle;
    d.a.idle_since_s = leg.complete_s;
    d.last_activity_end_s = leg.complete_s;
    d.last_trip_end_s = leg.complete_s;
    result_.orders.completed += 1;
    result_.driver_events.push_back(
        {DriverEventKind::kIdleStart, dispatch_ctx(d, leg.complete_s)});
  }

  void process_completions(double t) {
    // chronological across drivers so the event log reads in time order
    std::vector<std::pair<double, size_t>> due;
    for (size_t i = 0; i < drivers_.size(); ++i) {
      SimDriver& d = drivers_[i];
      if (d.repo && d.repo->arrive_s <= t) due.push_back({d.repo->arrive_s, i});
      if (d.serving && d.serving->complete_s <= t) due.push_back({d.serving->complete_s, i});
    }
    std::sort(due.begin(), due.end());
    for (auto [when, i] : due) {
      SimDriver& d = drivers_[i];
      if (d.repo && d.repo->arrive_s == when) complete_reposition(d, t);
      else if (d.serving && d.serving->complete_s == when) complete_trip(d, t);
    }
  }

  void ingest_orders(double t) {
    while (next_order_ < demand_.size() && demand_[next_order_].request_s <= t) {
      const TripOrder& o = demand_[next_order_++];
      PendingOrder p{o, grid_.locate(o.origin)};
      open_.push_back(std::move(p));
      requests_.push_back({o.request_s, open_.back().origin_cell});
      request_count_[open_.back().origin_cell] += 1;
      result_.orders.created += 1;
    }
  }

  void expire_orders(double t) {
    std::vector<PendingOrder> keep;
    keep.reserve(open_.size());
    for (PendingOrder& p : open_) {
      if (t - p.o.request_s > cfg_.order_patience_s) result_.orders.expired += 1;
      else keep.push_back(std::move(p));
    }
    open_ = std::move(keep);
  }

  void churn(double t) {
    int arrivals = poisson_arrivals(cfg_.churn.arrival_rate_per_hour, cfg_.match_window_s, rng_);
    for (int i = 0; i < arrivals; ++i) spawn_arrival(t);
    if (cfg_.churn.offline_hazard_per_hour <= 0) return;
    for (SimDriver& d : drivers_) {
      if (d.a.managed || d.a.status != DriverStatus::kIdle) continue;
      if (offline_draw(cfg_.churn.offline_hazard_per_hour, cfg_.match_window_s, rng_)) {
        d.a.status = DriverStatus::kOffline;
        d.a.state.time_s = t;
        d.log.online_spans.push_back({d.online_start_s / 60.0, t / 60.0});
        d.a.online_s += t - d.online_start_s;
        result_.driver_events.push_back({DriverEventKind::kOffline, dispatch_ctx(d, t)});
      }
    }
  }

  void dispatch(SimDriver& d, PendingOrder& p, double t, double pickup_m) {
    set_position(d, position_at(d, t), t);
    if (d.repo) {
      RepoLeg leg = *d.repo;
      d.repo.reset();
      if (d.a.state.cell == leg.origin_cell) {
        // still in the origin zone: the reposition never took place
        result_.repositions.voided += (leg.cruise || leg.is_stay) ? 0 : 1;
      } else {
        double elapsed_min = (t - leg.start_s) / 60.0;
        double cost = leg.cost_per_min * elapsed_min;
        log_reposition(d, leg, t, cost);
        accrue(d, t, -cost);
        if (d.a.state.cell == leg.dest_cell) result_.repositions.completed += leg.cruise ? 0 : 1;
        else result_.repositions.interrupted += leg.cruise ? 0 : 1;
      }
    }
    ServingLeg leg;
    leg.order_id = p.o.id;
    leg.s0 = make_state(d, t);
    leg.match_s = t;
    double pickup_min = pickup_m / cfg_.speed_m_per_min;
    leg.complete_s = t + (pickup_min + p.o.trip_duration_min) * 60.0;
    leg.price = p.o.price;
    leg.dest = p.o.destination;
    d.serving = leg;
    d.a.status = DriverStatus::kServing;
    result_.driver_events.push_back({DriverEventKind::kDispatchReceipt, dispatch_ctx(d, t)});
  }

  void match(double t) {
    if (open_.empty()) return;
    std::vector<size_t> pool;
    for (size_t i = 0; i < drivers_.size(); ++i) {
      DriverStatus st = drivers_[i].a.status;
      if (st == DriverStatus::kIdle || st == DriverStatus::kRepositioning) pool.push_back(i);
    }
    if (pool.empty()) return;
    std::vector<LatLon> dpos, opos;
    dpos.reserve(pool.size());
    for (size_t i : pool) dpos.push_back(position_at(drivers_[i], t));
    opos.reserve(open_.size());
    for (const PendingOrder& p : open_) opos.push_back(p.o.origin);

    std::vector<std::pair<int, int>> pairs = match_batch(dpos, opos, grid_.projection());
    std::vector<bool> taken(open_.size(), false);
    for (auto [di, oi] : pairs) {
      SimDriver& d = drivers_[pool[static_cast<size_t>(di)]];
      PendingOrder& p = open_[static_cast<size_t>(oi)];
      double pickup_m = grid_.projection().distance_m(dpos[static_cast<size_t>(di)], p.o.origin);
      taken[static_cast<size_t>(oi)] = true;
      if (maybe_cancel(cfg_.cancellation, pickup_m, rng_)) {
        result_.orders.cancelled += 1;
        continue;
      }
      dispatch(d, p, t, pickup_m);
    }
    std::vector<PendingOrder> keep;
    keep.reserve(open_.size());
    for (size_t i = 0; i < open_.size(); ++i)
      if (!taken[i]) keep.push_back(std::move(open_[i]));
    open_ = std::move(keep);
  }

  void refresh_sd(double t) {
    while (req_lo_ < requests_.size() && requests_[req_lo_].first <= t - cfg_.sd_window_s) {
      auto it = request_count_.find(requests_[req_lo_].second);
      if (it != request_count_.end() && --it->second <= 0) request_count_.erase(it);
      ++req_lo_;
    }
    idle_count_.clear();
    for (const SimDriver& d : drivers_)
      if (d.a.status == DriverStatus::kIdle) idle_count_[d.a.state.cell] += 1;
    unassigned_count_.clear();
    for (const PendingOrder& p : open_) unassigned_count_[p.origin_cell] += 1;

    if (!cfg_.record_sd_snapshots) return;
    std::map<CellId, bool> cells;
    for (const auto& [c, n] : idle_count_) cells[c] = true;
    for (const auto& [c, n] : request_count_) cells[c] = true;
    for (const auto& [c, n] : unassigned_count_) cells[c] = true;
    for (const auto& [c, used] : cells) {
      SdSnapshot snap;
      snap.time_s = t;
      snap.cell = c;
      snap.idle = count_of(idle_count_, c);
      snap.requests = count_of(request_count_, c);
      snap.unassigned = count_of(unassigned_count_, c);
      result_.sd_snapshots.push_back(snap);
    }
  }

  static double count_of(const std::map<CellId, int>& m, CellId c) {
    auto it = m.find(c);
    return it == m.end() ? 0.0 : static_cast<double>(it->second);
  }

  SDContext sd_context(CellId cell) const {
    return make_sd_context(grid_, cell, [this](CellId c) {
      Eigen::Vector3d v;
      v << count_of(idle_count_, c), count_of(request_count_, c), count_of(unassigned_count_, c);
      return v;
    });
  }

  // equivalent constant per-minute rate: discounted_reward(rate, k, gamma)
  // reproduces the accrued return exactly
  double compress_return(double accrued, int k) const {
    double factor = (std::pow(cfg_.gamma, k) - 1.0) / (k * (cfg_.gamma - 1.0));
    return accrued / factor;
  }

  void close_epoch(SimDriver& d, double t, const SDContext& sd_now, int option_next,
                   bool terminal) {
    Epoch& e = d.epoch;
    if (!e.open) return;
    int k = std::max(1, static_cast<int>(std::llround((t - e.start_s) / 60.0)));
    SarsaSample smp;
    smp.s = state_key(e.s);
    smp.sd = e.sd;
    smp.option = e.slot;
    smp.reward = compress_return(e.accrued, k);
    smp.k = k;
    smp.s_next = state_key(make_state(d, t));
    smp.sd_next = sd_now;
    smp.option_next = option_next;
    smp.terminal = terminal;
    result_.decisions.push_back(std::move(smp));
    policy_.feedback(e.cell, e.slot, e.accrued);
    e.open = false;
  }

  void start_leg(SimDriver& d, double t, const RepositionTarget& target, bool cruise) {
    RepoLeg leg;
    leg.origin_cell = d.a.state.cell;
    leg.dest_cell = target.cell;
    leg.from = d.a.state.location;
    leg.s0 = make_state(d, t);
    leg.start_s = t;
    leg.cruise = cruise;
    if (target.cell == d.a.state.cell) {
      leg.is_stay = true;
      leg.to = leg.from;
      leg.arrive_s = t + cfg_.idle_threshold_min * 60.0;
      leg.cost_per_min = 0;
    } else {
      LatLon to = target.point;
      if (!grid_.bbox().contains(to) || grid_.locate(to) != target.cell)
        to = grid_.representative_point(target.cell);
      leg.to = to;
      double eta_min = tt_.eta_min(leg.from, to);
      leg.arrive_s = t + eta_min * 60.0;
      leg.cost_per_min = cruise ? 0.0 : cfg_.reposition_cost_per_min;
    }
    d.repo = leg;
    d.a.status = DriverStatus::kRepositioning;
  }

  void review_repositions(double t) {
    refresh_sd(t);
    for (SimDriver& d : drivers_) {
      if (d.a.status != DriverStatus::kIdle) continue;
      double idle_min = (t - d.a.idle_since_s) / 60.0;
      if (idle_min < cfg_.idle_threshold_min) continue;
      d.a.state.time_s = t;
      if (d.a.managed) {
        SDContext sd = sd_context(d.a.state.cell);
        DecisionContext ctx;
        ctx.grid = &grid_;
        ctx.cell = d.a.state.cell;
        ctx.location = d.a.state.location;
        ctx.time_s = t;
        ctx.minute_of_day = minute_of_day(t);
        ctx.minute = state_minute(t);
        ctx.idle_min = idle_min;
        ctx.since_dispatch_min = (t - d.last_trip_end_s) / 60.0;
        ctx.driver_id = d.a.id;
        ctx.sd = &sd;
        ctx.rng = &rng_;
        RepositionTarget target;
        auto t0 = std::chrono::steady_clock::now();
        try {
          target = policy_.decide(ctx);
        } catch (const std::exception& e) {
          throw SimulationError("reposition policy '" + policy_.name() + "' failed at t=" +
                                std::to_string(t) + "s, driver " + std::to_string(d.a.id) +
                                ": " + e.what());
        }
        result_.policy_cpu_s +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        grid_.cell(target.cell);  // id check
        if (target.cell != d.a.state.cell && !grid_.is_valid(target.cell))
          throw SimulationError("policy '" + policy_.name() + "' chose invalid cell " +
                                std::to_string(target.cell));
        int slot = grid_.dest_slot(d.a.state.cell, target.cell);
        close_epoch(d, t, sd, slot, false);
        d.epoch = Epoch{true, make_state(d, t), sd, slot, d.a.state.cell, t, 0.0};
        result_.repositions.issued += 1;
        if (target.cell == d.a.state.cell) result_.repositions.stays += 1;
        start_leg(d, t, target, false);
      } else {
        CellId dest = d.a.state.cell;
        if (cruising_) dest = idle_cruise_step(*cruising_, d.a.state.cell, hour_of_day(t), rng_);
        if (dest == d.a.state.cell) continue;  // holds position, stays reviewable
        grid_.cell(dest);
        RepositionTarget target{dest, grid_.representative_point(dest), false};
        result_.repositions.cruises += 1;
        start_leg(d, t, target, true);
      }
    }
  }

  void finalize() {
    // activities in flight at the horizon run to completion; no new work
    process_completions(std::numeric_limits<double>::infinity());
    for (PendingOrder& p : open_) {
      (void)p;
      result_.orders.expired += 1;
    }
    open_.clear();

    bool any_open = false;
    for (const SimDriver& d : drivers_) any_open |= d.epoch.open;
    if (any_open) refresh_sd(cfg_.horizon_s);

    for (SimDriver& d : drivers_) {
      double end_s = std::max(cfg_.horizon_s, d.last_activity_end_s);
      if (d.a.status != DriverStatus::kOffline) {
        d.log.online_spans.push_back({d.online_start_s / 60.0, end_s / 60.0});
        d.a.online_s += end_s - d.online_start_s;
        d.a.state.time_s = std::max(d.a.state.time_s, cfg_.horizon_s);
      }
      if (d.a.managed && d.epoch.open)
        close_epoch_terminal(d, make_state(d, cfg_.horizon_s), sd_context(d.a.state.cell));
      result_.logs.push_back(d.log);
      result_.drivers.push_back(d.a);
    }
    result_.metrics = summarize_episode(result_.logs);
  }

  void close_epoch_terminal(SimDriver& d, const DriverState& s_end, const SDContext& sd) {
    Epoch& e = d.epoch;
    int k = std::max(
        1, static_cast<int>(std::llround((cfg_.horizon_s - e.start_s) / 60.0)));
    SarsaSample smp;
    smp.s = state_key(e.s);
    smp.sd = e.sd;
    smp.option = e.slot;
    smp.reward = compress_return(e.accrued, k);
    smp.k = k;
    smp.s_next = state_key(s_end);
    smp.sd_next = sd;
    smp.option_next = -1;
    smp.terminal = true;
    result_.decisions.push_back(std::move(smp));
    policy_.feedback(e.cell, e.slot, e.accrued);
    e.open = false;
  }

  const GridIndex& grid_;
  const TravelTimeModel& tt_;
  const std::vector<TripOrder>& demand_;
  RepositionPolicy& policy_;
  SimConfig cfg_;
  const CruisingModel* cruising_;
  Rng rng_;

  std::vector<CellId> valid_cells_;
  std::vector<SimDriver> drivers_;
  int64_t next_driver_id_ = 0;
  size_t next_order_ = 0;
  std::vector<PendingOrder> open_;

  std::vector<std::pair<double, CellId>> requests_;  // request-time window feed
  size_t req_lo_ = 0;
  std::map<CellId, int> request_count_;
  std::map<CellId, int> idle_count_;
  std::map<CellId, int> unassigned_count_;

  EpisodeResult result_;
};

}  // namespace

EpisodeResult run_episode(const GridIndex& grid, const TravelTimeModel& tt,
                          const std::vector<TripOrder>& demand, RepositionPolicy& policy,
                          const SimConfig& cfg, const CruisingModel* cruising) {
  Sim sim(grid, tt, demand, policy, cfg, cruising);
  return sim.run();
}

}  // namespace reposim
