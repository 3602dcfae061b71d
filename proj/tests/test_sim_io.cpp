#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "reposim/demand.hpp"
#include "reposim/errors.hpp"
#include "reposim/hexgrid.hpp"
#include "reposim/policies.hpp"
#include "reposim/sim_io.hpp"
#include "reposim/simulator.hpp"

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
  explicit TempFile(const std::string& name) : path("/tmp/reposim_sim_io_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

// one busy episode shared by the round-trip cases
const EpisodeResult& busy_episode(const GridIndex& grid) {
  static EpisodeResult result = [&grid] {
    TravelTimeModel tt(&grid, 400.0);
    DemandConfig dc;
    dc.horizon_s = 3600;
    dc.base_rate_per_cell_hour = 1.0;
    std::vector<TripOrder> orders = generate_demand(grid, dc, 7);
    SimConfig cfg;
    cfg.horizon_s = 3600;
    cfg.num_drivers = 12;
    cfg.num_managed = 4;
    cfg.seed = 5;
    RandomRepositionPolicy policy;
    return run_episode(grid, tt, orders, policy, cfg);
  }();
  return result;
}

bool same_state(const DriverState& a, const DriverState& b) {
  return a.location.lat == b.location.lat && a.location.lon == b.location.lon &&
         a.cell == b.cell && a.time_s == b.time_s;
}

bool same_key(const StateKey& a, const StateKey& b) {
  return a.q == b.q && a.r == b.r && a.minute == b.minute;
}

bool same_sd(const SDContext& a, const SDContext& b) {
  if (a.present != b.present) return false;
  return (a.f - b.f).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_CASE("transitions survive a save/load round trip bit exactly") {
  GridIndex grid = make_grid();
  const EpisodeResult& ep = busy_episode(grid);
  REQUIRE(!ep.transitions.empty());

  TempFile f("transitions.jsonl");
  save_transitions(f.path, ep.transitions);
  std::vector<TransitionRecord> back = load_transitions(f.path);
  REQUIRE(back.size() == ep.transitions.size());
  for (size_t i = 0; i < back.size(); ++i) {
    const TransitionRecord& a = ep.transitions[i];
    const TransitionRecord& b = back[i];
    CHECK(b.driver_id == a.driver_id);
    CHECK(b.managed == a.managed);
    CHECK(same_state(b.s, a.s));
    CHECK(b.option.kind == a.option.kind);
    CHECK(b.option.destination == a.option.destination);
    CHECK(b.option.trip_id == a.option.trip_id);
    CHECK(b.option.duration_min == a.option.duration_min);
    CHECK(b.option.price == a.option.price);
    CHECK(b.option.cost == a.option.cost);
    CHECK(b.reward == a.reward);
    CHECK(b.k == a.k);
    CHECK(same_state(b.s_next, a.s_next));
    CHECK(b.terminal == a.terminal);
  }
}

TEST_CASE("sarsa samples survive a save/load round trip with the sd context") {
  GridIndex grid = make_grid();
  const EpisodeResult& ep = busy_episode(grid);
  REQUIRE(!ep.decisions.empty());

  TempFile f("sarsa.jsonl");
  save_sarsa_samples(f.path, ep.decisions);
  std::vector<SarsaSample> back = load_sarsa_samples(f.path);
  REQUIRE(back.size() == ep.decisions.size());
  bool any_sd = false;
  for (size_t i = 0; i < back.size(); ++i) {
    const SarsaSample& a = ep.decisions[i];
    const SarsaSample& b = back[i];
    CHECK(same_key(b.s, a.s));
    CHECK(same_sd(b.sd, a.sd));
    CHECK(b.option == a.option);
    CHECK(b.reward == a.reward);
    CHECK(b.k == a.k);
    CHECK(same_key(b.s_next, a.s_next));
    CHECK(same_sd(b.sd_next, a.sd_next));
    CHECK(b.option_next == a.option_next);
    CHECK(b.terminal == a.terminal);
    any_sd = any_sd || a.sd.f.cwiseAbs().maxCoeff() > 0;
  }
  // the busy episode must exercise nonzero sd features or the check is vacuous
  CHECK(any_sd);
}

TEST_CASE("driver events survive a save/load round trip") {
  GridIndex grid = make_grid();
  const EpisodeResult& ep = busy_episode(grid);
  REQUIRE(!ep.driver_events.empty());

  TempFile f("events.jsonl");
  save_driver_events(f.path, ep.driver_events);
  std::vector<DriverEvent> back = load_driver_events(f.path);
  REQUIRE(back.size() == ep.driver_events.size());
  for (size_t i = 0; i < back.size(); ++i) {
    const DriverEvent& a = ep.driver_events[i];
    const DriverEvent& b = back[i];
    CHECK(b.kind == a.kind);
    CHECK(b.ctx.cell == a.ctx.cell);
    CHECK(b.ctx.minute_of_day == a.ctx.minute_of_day);
    CHECK(b.ctx.day_of_week == a.ctx.day_of_week);
    CHECK(b.ctx.driver_id == a.ctx.driver_id);
  }
}

TEST_CASE("sd snapshots survive a save/load round trip") {
  GridIndex grid = make_grid();
  const EpisodeResult& ep = busy_episode(grid);
  REQUIRE(!ep.sd_snapshots.empty());

  TempFile f("snaps.jsonl");
  save_sd_snapshots(f.path, ep.sd_snapshots);
  std::vector<SdSnapshot> back = load_sd_snapshots(f.path);
  REQUIRE(back.size() == ep.sd_snapshots.size());
  for (size_t i = 0; i < back.size(); ++i) {
    const SdSnapshot& a = ep.sd_snapshots[i];
    const SdSnapshot& b = back[i];
    CHECK(b.time_s == a.time_s);
    CHECK(b.cell == a.cell);
    CHECK(b.idle == a.idle);
    CHECK(b.requests == a.requests);
    CHECK(b.unassigned == a.unassigned);
  }
}

TEST_CASE("loaders report the offending line") {
  TempFile f("bad.jsonl");

  SUBCASE("malformed json names line 2") {
    write_file(f.path,
               R"({"t":1,"cell":0,"idle":1,"requests":0,"unassigned":0})"
               "\nnot json\n");
    CHECK_THROWS_WITH_AS(load_sd_snapshots(f.path), doctest::Contains(":2"), DataError);
  }

  SUBCASE("missing field names the line and the field") {
    write_file(f.path, R"({"t":1,"cell":0,"idle":1,"requests":0})" "\n");
    CHECK_THROWS_WITH_AS(load_sd_snapshots(f.path), doctest::Contains("unassigned"), DataError);
    CHECK_THROWS_WITH_AS(load_sd_snapshots(f.path), doctest::Contains(":1"), DataError);
  }

  SUBCASE("wrong field type is rejected") {
    write_file(f.path, R"({"t":1,"cell":"zero","idle":1,"requests":0,"unassigned":0})" "\n");
    CHECK_THROWS_WITH_AS(load_sd_snapshots(f.path), doctest::Contains("cell"), DataError);
  }

  SUBCASE("unknown event kind is rejected") {
    write_file(f.path, R"({"kind":"teleport","cell":0,"minute":0,"dow":0,"driver_id":0})" "\n");
    CHECK_THROWS_WITH_AS(load_driver_events(f.path), doctest::Contains("teleport"), DataError);
  }

  SUBCASE("unknown option kind is rejected") {
    write_file(f.path,
               R"({"driver_id":0,"managed":true,"s":{"lat":0,"lon":0,"cell":0,"t":0},)"
               R"("kind":"warp","dest":0,"trip_id":-1,"duration_min":1,"price":0,"cost":0,)"
               R"("reward":0,"k":1,"s_next":{"lat":0,"lon":0,"cell":0,"t":60},"terminal":false})"
               "\n");
    CHECK_THROWS_WITH_AS(load_transitions(f.path), doctest::Contains("warp"), DataError);
  }

  SUBCASE("nonpositive k is rejected") {
    write_file(f.path,
               R"({"driver_id":0,"managed":true,"s":{"lat":0,"lon":0,"cell":0,"t":0},)"
               R"("kind":"reposition","dest":0,"trip_id":-1,"duration_min":1,"price":0,"cost":0,)"
               R"("reward":0,"k":0,"s_next":{"lat":0,"lon":0,"cell":0,"t":60},"terminal":false})"
               "\n");
    CHECK_THROWS_WITH_AS(load_transitions(f.path), doctest::Contains("k must be >= 1"), DataError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_transitions("/tmp/reposim_sim_io_no_such.jsonl"), DataError);
  }

  SUBCASE("blank lines are skipped") {
    write_file(f.path,
               "\n"
               R"({"t":1,"cell":0,"idle":1,"requests":0,"unassigned":0})"
               "\n\n");
    CHECK(load_sd_snapshots(f.path).size() == 1);
  }
}

TEST_CASE("vn samples carry axial coordinates and the uncapped minute clock") {
  GridIndex grid = make_grid();
  const EpisodeResult& ep = busy_episode(grid);
  REQUIRE(!ep.transitions.empty());

  const double start = 660;
  std::vector<VnSample> vn = to_vn_samples(ep.transitions, grid, start);
  REQUIRE(vn.size() == ep.transitions.size());
  bool any_dispatch = false;
  for (size_t i = 0; i < vn.size(); ++i) {
    const TransitionRecord& t = ep.transitions[i];
    const VnSample& v = vn[i];
    AxialCoord a = grid.cell(t.s.cell).axial;
    CHECK(v.s.q == a.q);
    CHECK(v.s.r == a.r);
    CHECK(v.s.minute == start + t.s.time_s / 60.0);
    AxialCoord b = grid.cell(t.s_next.cell).axial;
    CHECK(v.s_next.q == b.q);
    CHECK(v.s_next.r == b.r);
    CHECK(v.s_next.minute == start + t.s_next.time_s / 60.0);
    CHECK(v.reward == t.reward);
    CHECK(v.k == t.k);
    CHECK(v.terminal == t.terminal);
    CHECK(v.dispatch == (t.option.kind == OptionKind::kDispatch));
    any_dispatch = any_dispatch || v.dispatch;
  }
  CHECK(any_dispatch);
}

TEST_CASE("sim config json round trips every field") {
  SimConfig a;
  a.match_window_s = 3;
  a.reposition_review_s = 120;
  a.idle_threshold_min = 7.5;
  a.horizon_s = 7200;
  a.start_minute_of_day = 480;
  a.day_of_week = 5;
  a.seed = 9001;
  a.num_drivers = 33;
  a.num_managed = 11;
  a.speed_m_per_min = 512.5;
  a.reposition_cost_per_min = 0.125;
  a.order_patience_s = 240;
  a.sd_window_s = 480;
  a.gamma = 0.9375;
  a.cancellation.midpoint_m = 1750;
  a.cancellation.scale_m = 420;
  a.cancellation.floor = 0.0625;
  a.cancellation.ceiling = 0.875;
  a.churn.arrival_rate_per_hour = 2.25;
  a.churn.offline_hazard_per_hour = 0.375;
  a.record_sd_snapshots = false;

  SimConfig b = sim_config_from_json(sim_config_json(a));
  CHECK(b.match_window_s == a.match_window_s);
  CHECK(b.reposition_review_s == a.reposition_review_s);
  CHECK(b.idle_threshold_min == a.idle_threshold_min);
  CHECK(b.horizon_s == a.horizon_s);
  CHECK(b.start_minute_of_day == a.start_minute_of_day);
  CHECK(b.day_of_week == a.day_of_week);
  CHECK(b.seed == a.seed);
  CHECK(b.num_drivers == a.num_drivers);
  CHECK(b.num_managed == a.num_managed);
  CHECK(b.speed_m_per_min == a.speed_m_per_min);
  CHECK(b.reposition_cost_per_min == a.reposition_cost_per_min);
  CHECK(b.order_patience_s == a.order_patience_s);
  CHECK(b.sd_window_s == a.sd_window_s);
  CHECK(b.gamma == a.gamma);
  CHECK(b.cancellation.midpoint_m == a.cancellation.midpoint_m);
  CHECK(b.cancellation.scale_m == a.cancellation.scale_m);
  CHECK(b.cancellation.floor == a.cancellation.floor);
  CHECK(b.cancellation.ceiling == a.cancellation.ceiling);
  CHECK(b.churn.arrival_rate_per_hour == a.churn.arrival_rate_per_hour);
  CHECK(b.churn.offline_hazard_per_hour == a.churn.offline_hazard_per_hour);
  CHECK(b.record_sd_snapshots == a.record_sd_snapshots);

  SUBCASE("absent fields keep defaults") {
    SimConfig d = sim_config_from_json("{}");
    SimConfig ref;
    CHECK(d.gamma == ref.gamma);
    CHECK(d.num_drivers == ref.num_drivers);
    CHECK(d.cancellation.midpoint_m == ref.cancellation.midpoint_m);
  }

  SUBCASE("malformed text is rejected") {
    CHECK_THROWS_AS(sim_config_from_json("{nope"), DataError);
  }

  SUBCASE("wrong field type is rejected") {
    CHECK_THROWS_WITH_AS(sim_config_from_json(R"({"gamma":"high"})"),
                         doctest::Contains("gamma"), DataError);
  }
}

TEST_CASE("demand config json round trips weights and the hour profile") {
  DemandConfig a;
  a.horizon_s = 5400;
  a.start_minute_of_day = 300;
  a.base_rate_per_cell_hour = 1.75;
  a.hour_profile.assign(24, 1.0);
  a.hour_profile[7] = 2.5;
  a.origin_weight[3] = 40.0;
  a.origin_weight[11] = 0.5;
  a.dest_weight[2] = 9.0;
  a.origin_jitter_m = 150;
  a.trip_speed_m_per_min = 700;
  a.min_trip_min = 3.5;
  a.price_per_min = 1.2;
  a.price_jitter = 0.1;

  DemandConfig b = demand_config_from_json(demand_config_json(a));
  CHECK(b.horizon_s == a.horizon_s);
  CHECK(b.start_minute_of_day == a.start_minute_of_day);
  CHECK(b.base_rate_per_cell_hour == a.base_rate_per_cell_hour);
  CHECK(b.hour_profile == a.hour_profile);
  CHECK(b.origin_weight == a.origin_weight);
  CHECK(b.dest_weight == a.dest_weight);
  CHECK(b.origin_jitter_m == a.origin_jitter_m);
  CHECK(b.trip_speed_m_per_min == a.trip_speed_m_per_min);
  CHECK(b.min_trip_min == a.min_trip_min);
  CHECK(b.price_per_min == a.price_per_min);
  CHECK(b.price_jitter == a.price_jitter);

  SUBCASE("empty maps stay empty") {
    DemandConfig d = demand_config_from_json("{}");
    CHECK(d.origin_weight.empty());
    CHECK(d.dest_weight.empty());
    CHECK(d.hour_profile.empty());
  }

  SUBCASE("non-numeric weight key is rejected") {
    CHECK_THROWS_AS(demand_config_from_json(R"({"origin_weight":{"abc":1.0}})"), DataError);
  }
}

TEST_CASE("episode summary embeds the config and the ledgers") {
  GridIndex grid = make_grid();
  const EpisodeResult& ep = busy_episode(grid);
  SimConfig cfg;
  cfg.horizon_s = 3600;
  cfg.num_drivers = 12;
  cfg.num_managed = 4;
  cfg.seed = 5;

  TempFile f("summary.json");
  save_episode_summary(f.path, ep, cfg);

  std::ifstream in(f.path);
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("config").at("seed").get<uint64_t>() == 5);
  CHECK(j.at("config").at("num_drivers").get<int>() == 12);
  CHECK(j.at("orders").at("created").get<int64_t>() == ep.orders.created);
  CHECK(j.at("orders").at("completed").get<int64_t>() == ep.orders.completed);
  CHECK(j.at("repositions").at("issued").get<int64_t>() == ep.repositions.issued);
  REQUIRE(j.at("metrics").size() == ep.metrics.drivers.size());
  CHECK(j.at("metrics")[0].at("income").get<double>() == ep.metrics.drivers[0].income);
  REQUIRE(j.at("logs").size() == ep.logs.size());
  size_t trips = 0;
  for (const auto& l : j.at("logs")) trips += l.at("trips").size();
  CHECK(trips == static_cast<size_t>(ep.orders.completed));
}
