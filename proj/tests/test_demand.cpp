#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "reposim/demand.hpp"
#include "reposim/errors.hpp"
#include "reposim/hexgrid.hpp"

using namespace reposim;

namespace {

constexpr double kMetersPerDeg = 6371000.0 * M_PI / 180.0;

// square box centered on (0, 0): meters per degree match in both axes
GridIndex make_grid(double half_km = 2.6, double edge_m = 500.0) {
  double d = half_km * 1000.0 / kMetersPerDeg;
  return GridIndex(BoundingBox{-d, d, -d, d}, edge_m);
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/reposim_demand_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("trip log survives a save/load round trip") {
  GridIndex grid = make_grid();
  std::vector<TripOrder> orders;
  for (int i = 0; i < 5; ++i) {
    TripOrder o;
    o.id = i;
    o.request_s = 13.75 * i + 0.125;
    o.origin = grid.representative_point(i);
    o.destination = grid.representative_point(i + 3);
    o.price = 4.0 + 0.3 * i;
    o.trip_duration_min = 5.5 + i;
    orders.push_back(o);
  }
  TempFile f("roundtrip.csv");
  save_trip_log(f.path, orders);
  std::vector<TripOrder> back = load_trip_log(f.path);
  REQUIRE(back.size() == orders.size());
  for (size_t i = 0; i < orders.size(); ++i) {
    CHECK(back[i].id == orders[i].id);
    CHECK(back[i].request_s == orders[i].request_s);
    CHECK(back[i].origin.lat == orders[i].origin.lat);
    CHECK(back[i].origin.lon == orders[i].origin.lon);
    CHECK(back[i].destination.lat == orders[i].destination.lat);
    CHECK(back[i].destination.lon == orders[i].destination.lon);
    CHECK(back[i].price == orders[i].price);
    CHECK(back[i].trip_duration_min == orders[i].trip_duration_min);
  }
}

TEST_CASE("trip log loads sorted by request time") {
  TempFile f("unsorted.csv");
  write_file(f.path,
             "order_id,request_ts,origin_lat,origin_lon,dest_lat,dest_lon,price,duration_min\n"
             "0,500,30,110,30,110,5,6\n"
             "1,100,30,110,30,110,5,6\n"
             "2,300,30,110,30,110,5,6\n");
  std::vector<TripOrder> back = load_trip_log(f.path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].id == 1);
  CHECK(back[1].id == 2);
  CHECK(back[2].id == 0);
}

TEST_CASE("trip log errors carry the offending line number") {
  const std::string header =
      "order_id,request_ts,origin_lat,origin_lon,dest_lat,dest_lon,price,duration_min\n";

  SUBCASE("nonpositive price") {
    TempFile f("badprice.csv");
    write_file(f.path, header + "0,10,30,110,30,110,5,6\n1,20,30,110,30,110,-1,6\n");
    CHECK_THROWS_WITH_AS(load_trip_log(f.path), doctest::Contains(":3"), DataError);
  }
  SUBCASE("unparsable number") {
    TempFile f("badnum.csv");
    write_file(f.path, header + "0,ten,30,110,30,110,5,6\n");
    CHECK_THROWS_WITH_AS(load_trip_log(f.path), doctest::Contains("bad number"), DataError);
  }
  SUBCASE("wrong field count") {
    TempFile f("badcols.csv");
    write_file(f.path, header + "0,10,30,110,30,110,5\n");
    CHECK_THROWS_WITH_AS(load_trip_log(f.path), doctest::Contains("expected 8 fields"), DataError);
  }
  SUBCASE("missing header") {
    TempFile f("badheader.csv");
    write_file(f.path, "0,10,30,110,30,110,5,6\n");
    CHECK_THROWS_AS(load_trip_log(f.path), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_trip_log("/tmp/reposim_demand_does_not_exist.csv"), DataError);
  }
}

TEST_CASE("generated demand matches the configured Poisson rate") {
  GridIndex grid = make_grid();
  int n_valid = 0;
  for (const HexCell& c : grid.cells()) n_valid += c.valid ? 1 : 0;
  REQUIRE(n_valid > 30);

  DemandConfig cfg;
  cfg.horizon_s = 2 * 3600.0;
  cfg.base_rate_per_cell_hour = 2.0;
  const double expected_per_seed = 2.0 * 2.0 * n_valid;

  double total = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) total += static_cast<double>(generate_demand(grid, cfg, 100 + s).size());
  double mean = total / seeds;
  // relative sd of the mean is about 0.4%; 2% leaves a wide margin
  CHECK(std::abs(mean - expected_per_seed) / expected_per_seed < 0.02);
}

TEST_CASE("generated orders are well formed") {
  GridIndex grid = make_grid();
  DemandConfig cfg;
  cfg.horizon_s = 3600.0;
  cfg.base_rate_per_cell_hour = 1.5;
  cfg.min_trip_min = 4.0;
  cfg.price_jitter = 0.25;
  std::vector<TripOrder> orders = generate_demand(grid, cfg, 7);
  REQUIRE(orders.size() > 50);
  for (size_t i = 0; i < orders.size(); ++i) {
    const TripOrder& o = orders[i];
    CHECK(o.id == static_cast<int64_t>(i));
    if (i > 0) CHECK(o.request_s >= orders[i - 1].request_s);
    CHECK(o.request_s >= 0);
    CHECK(o.request_s < cfg.horizon_s);
    CHECK(o.trip_duration_min >= cfg.min_trip_min);
    CHECK(o.price > 0);
    // price = rate * duration * (1 +- jitter)
    CHECK(o.price >= cfg.price_per_min * o.trip_duration_min * (1 - cfg.price_jitter) - 1e-12);
    CHECK(o.price <= cfg.price_per_min * o.trip_duration_min * (1 + cfg.price_jitter) + 1e-12);
    CHECK(grid.is_valid(grid.locate(o.origin)));
    CHECK(grid.is_valid(grid.locate(o.destination)));
  }
}

TEST_CASE("hour profile gates demand by wall-clock hour") {
  GridIndex grid = make_grid();
  DemandConfig cfg;
  cfg.horizon_s = 2 * 3600.0;
  cfg.start_minute_of_day = 660;  // 11:00
  cfg.base_rate_per_cell_hour = 1.0;
  cfg.hour_profile.assign(24, 0.0);
  cfg.hour_profile[12] = 1.0;  // only 12:00-13:00 produces orders
  std::vector<TripOrder> orders = generate_demand(grid, cfg, 11);
  REQUIRE(orders.size() > 20);
  for (const TripOrder& o : orders) CHECK(o.request_s >= 3600.0);
}

TEST_CASE("origin and destination weights steer the draw") {
  GridIndex grid = make_grid();
  CellId hot = grid.locate({0.0, 0.0});
  REQUIRE(grid.is_valid(hot));

  SUBCASE("origin hotspot") {
    DemandConfig cfg;
    cfg.horizon_s = 3600.0;
    cfg.base_rate_per_cell_hour = 0.5;
    cfg.origin_weight[hot] = 200.0;
    cfg.origin_jitter_m = 0.0;
    std::vector<TripOrder> orders = generate_demand(grid, cfg, 3);
    REQUIRE(orders.size() > 50);
    int in_hot = 0;
    for (const TripOrder& o : orders) in_hot += grid.locate(o.origin) == hot ? 1 : 0;
    CHECK(static_cast<double>(in_hot) / static_cast<double>(orders.size()) > 0.5);
  }

  SUBCASE("destination point mass") {
    DemandConfig cfg;
    cfg.horizon_s = 3600.0;
    cfg.base_rate_per_cell_hour = 2.0;
    cfg.origin_jitter_m = 0.0;
    for (const HexCell& c : grid.cells())
      if (c.valid) cfg.dest_weight[c.id] = c.id == hot ? 1.0 : 0.0;
    std::vector<TripOrder> orders = generate_demand(grid, cfg, 5);
    REQUIRE(orders.size() > 50);
    for (const TripOrder& o : orders) CHECK(grid.locate(o.destination) == hot);
  }
}

TEST_CASE("zero-weight origin cells produce nothing") {
  GridIndex grid = make_grid();
  DemandConfig cfg;
  cfg.horizon_s = 3600.0;
  cfg.base_rate_per_cell_hour = 1.0;
  cfg.origin_jitter_m = 0.0;
  CellId quiet = grid.locate({0.0, 0.0});
  cfg.origin_weight[quiet] = 0.0;
  std::vector<TripOrder> orders = generate_demand(grid, cfg, 9);
  for (const TripOrder& o : orders) CHECK(grid.locate(o.origin) != quiet);
}

TEST_CASE("demand config validation") {
  GridIndex grid = make_grid();
  DemandConfig cfg;
  SUBCASE("nonpositive horizon") {
    cfg.horizon_s = 0;
    CHECK_THROWS_AS(generate_demand(grid, cfg, 1), DataError);
  }
  SUBCASE("short hour profile") {
    cfg.hour_profile.assign(12, 1.0);
    CHECK_THROWS_AS(generate_demand(grid, cfg, 1), DataError);
  }
  SUBCASE("jitter out of range") {
    cfg.price_jitter = 1.0;
    CHECK_THROWS_AS(generate_demand(grid, cfg, 1), DataError);
  }
}

TEST_CASE("cruising model sampling") {
  Rng rng(42);

  SUBCASE("point mass always moves there") {
    CruisingModel m;
    m.set_row(14, 3, {{8, 1.0}});
    for (int i = 0; i < 100; ++i) CHECK(m.sample(14, 3, rng) == 8);
  }

  SUBCASE("uniform row is uniform") {
    CruisingModel m;
    std::vector<std::pair<CellId, double>> row;
    for (CellId c = 0; c < 7; ++c) row.push_back({c, 1.0 / 7.0});
    m.set_row(9, 0, row);
    std::map<CellId, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[m.sample(9, 0, rng)] += 1;
    for (CellId c = 0; c < 7; ++c)
      CHECK(std::abs(static_cast<double>(counts[c]) / n - 1.0 / 7.0) < 0.01);
  }

  SUBCASE("missing row holds position") {
    CruisingModel m;
    m.set_row(9, 0, {{5, 1.0}});
    CHECK(m.sample(10, 0, rng) == 0);
    CHECK(m.sample(9, 1, rng) == 1);
    CHECK_FALSE(m.has_row(10, 0));
    CHECK(m.has_row(9, 0));
  }

  SUBCASE("rows must sum to one") {
    CruisingModel m;
    CHECK_THROWS_AS(m.set_row(9, 0, {{5, 0.9}}), DataError);
    CHECK_THROWS_AS(m.set_row(9, 0, {{5, 0.7}, {6, 0.4}}), DataError);
    CHECK_THROWS_AS(m.set_row(9, 0, {{5, 1.5}, {6, -0.5}}), DataError);
    CHECK_THROWS_AS(m.set_row(24, 0, {{5, 1.0}}), DataError);
  }
}

TEST_CASE("cruising table survives a csv round trip") {
  CruisingModel m;
  m.set_row(9, 0, {{1, 0.25}, {2, 0.75}});
  m.set_row(17, 4, {{4, 1.0}});
  TempFile f("cruise.csv");
  m.save_csv(f.path);
  CruisingModel back = CruisingModel::load_csv(f.path);
  CHECK(back.num_rows() == 2);
  CHECK(back.has_row(9, 0));
  CHECK(back.has_row(17, 4));

  // distribution check on the reloaded rows
  Rng rng(5);
  int to2 = 0;
  for (int i = 0; i < 20000; ++i) to2 += back.sample(9, 0, rng) == 2 ? 1 : 0;
  CHECK(std::abs(to2 / 20000.0 - 0.75) < 0.01);
}

TEST_CASE("idle cruise step normalizes the hour") {
  CruisingModel m;
  m.set_row(3, 7, {{9, 1.0}});
  Rng rng(1);
  CHECK(idle_cruise_step(m, 7, 3, rng) == 9);
  CHECK(idle_cruise_step(m, 7, 27, rng) == 9);   // 27 mod 24 = 3
  CHECK(idle_cruise_step(m, 7, -21, rng) == 9);  // -21 mod 24 = 3
  CHECK(idle_cruise_step(m, 7, 4, rng) == 7);    // no row: stay
}
