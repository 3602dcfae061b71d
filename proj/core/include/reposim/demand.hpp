#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reposim/hexgrid.hpp"
#include "reposim/rng.hpp"

namespace reposim {

// One trip request. Times are seconds since episode start; trip_duration_min
// is the in-car time from pick-up to drop-off.
struct TripOrder {
  int64_t id = 0;
  double request_s = 0;
  LatLon origin{};
  LatLon destination{};
  double price = 0;
  double trip_duration_min = 0;
};

// CSV with header order_id,request_ts,origin_lat,origin_lon,dest_lat,
// dest_lon,price,duration_min; request_ts in seconds since episode start.
// Rows must be parseable and positive where required; errors carry the
// offending line number. Orders are returned sorted by request time.
std::vector<TripOrder> load_trip_log(const std::string& path);
void save_trip_log(const std::string& path, const std::vector<TripOrder>& orders);

// Synthetic demand: per-cell-hour Poisson counts with uniform request times
// within the hour, origins jittered around the cell's representative point,
// destinations drawn over valid cells by weight, duration from straight-line
// distance at trip speed, price proportional to duration with jitter.
struct DemandConfig {
  double horizon_s = 8 * 3600.0;
  double start_minute_of_day = 660;          // aligns the hour profile; 660 = 11:00
  double base_rate_per_cell_hour = 1.0;
  std::vector<double> hour_profile;          // 24 multipliers; empty = flat
  std::map<CellId, double> origin_weight;    // extra per-cell multiplier (hotspots)
  std::map<CellId, double> dest_weight;      // attraction weight, default 1
  double origin_jitter_m = 200.0;
  double trip_speed_m_per_min = 600.0;
  double min_trip_min = 4.0;
  double price_per_min = 1.0;
  double price_jitter = 0.25;                // uniform +-fraction
};

std::vector<TripOrder> generate_demand(const GridIndex& grid, const DemandConfig& cfg,
                                       uint64_t seed);

// Hourly cell-to-cell transition rows for unmanaged idle cruising. Rows are
// validated to sum to 1 within 1e-6.
class CruisingModel {
 public:
  void set_row(int hour, CellId origin, const std::vector<std::pair<CellId, double>>& row);
  bool has_row(int hour, CellId origin) const;

  // Draw from the (hour, origin) row; stays put when the row is missing.
  CellId sample(int hour, CellId origin, Rng& rng) const;

  // CSV with header hour,origin_cell,dest_cell,prob
  static CruisingModel load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  int num_rows() const { return static_cast<int>(rows_.size()); }

 private:
  std::map<std::pair<int, CellId>, std::vector<std::pair<CellId, double>>> rows_;
};

// Next cruising cell for an unmanaged driver idle past the threshold.
CellId idle_cruise_step(const CruisingModel& model, CellId cell, int hour, Rng& rng);

}  // namespace reposim
