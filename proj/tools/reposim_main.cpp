// reposim: synthetic-city generation, trainers, episode simulation,
// benchmark matrices, and offline evaluation around the core library.
//
// Exit codes: 0 ok, 1 usage, 2 bad data, 3 runtime failure.
// REPOSIM_LOG=quiet|warn|info|debug controls stderr verbosity.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reposim/errors.hpp"
#include "reposim/metrics.hpp"
#include "reposim/sim_io.hpp"
#include "scenario.hpp"

using namespace reposim;
namespace rcli = reposim::cli;
using nlohmann::json;

namespace {

constexpr double kMetersPerDeg = 6371000.0 * M_PI / 180.0;

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";  // N/A cells stay empty, schema unchanged
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

double safe_iph(const std::vector<DriverMetrics>& group) {
  try {
    return iph_group(group);
  } catch (const UndefinedMetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double safe_util(const std::vector<DriverMetrics>& group) {
  try {
    return utilization(group);
  } catch (const UndefinedMetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// ---------------------------------------------------------------- sim flags

struct SimOpts {
  std::string config;
  uint64_t seed = 1;
  int drivers = 50;
  int managed = 10;
  double horizon_h = 8;
  double start_minute = 660;
  int dow = 2;
  double gamma = 0.92;
  double cost_per_min = 0;
  double speed = 400;
  double patience_s = 300;
  double churn_arrivals = 0;
  double churn_hazard = 0;
};

void add_sim_flags(CLI::App* cmd, SimOpts& o) {
  cmd->add_option("--config", o.config, "sim config json; flags override its fields");
  cmd->add_option("--seed", o.seed, "episode seed");
  cmd->add_option("--drivers", o.drivers, "fleet size");
  cmd->add_option("--managed", o.managed, "managed drivers (first ids)");
  cmd->add_option("--horizon-h", o.horizon_h, "episode length, hours");
  cmd->add_option("--start-minute", o.start_minute, "episode start, minute of day");
  cmd->add_option("--day-of-week", o.dow, "0 = Monday");
  cmd->add_option("--gamma", o.gamma, "per-minute discount");
  cmd->add_option("--cost-per-min", o.cost_per_min, "reposition cost rate");
  cmd->add_option("--speed", o.speed, "cruise speed, m/min");
  cmd->add_option("--patience-s", o.patience_s, "order expiry, seconds");
  cmd->add_option("--churn-arrivals", o.churn_arrivals, "unmanaged arrivals per hour");
  cmd->add_option("--churn-hazard", o.churn_hazard, "idle offline hazard per hour");
}

SimConfig resolve_sim(const CLI::App* cmd, const SimOpts& o) {
  SimConfig cfg;
  if (!o.config.empty()) cfg = sim_config_from_json(rcli::read_file(o.config));
  if (cmd->count("--seed")) cfg.seed = o.seed;
  if (cmd->count("--drivers")) cfg.num_drivers = o.drivers;
  if (cmd->count("--managed")) cfg.num_managed = o.managed;
  if (cmd->count("--horizon-h")) cfg.horizon_s = o.horizon_h * 3600.0;
  if (cmd->count("--start-minute")) cfg.start_minute_of_day = o.start_minute;
  if (cmd->count("--day-of-week")) cfg.day_of_week = o.dow;
  if (cmd->count("--gamma")) cfg.gamma = o.gamma;
  if (cmd->count("--cost-per-min")) cfg.reposition_cost_per_min = o.cost_per_min;
  if (cmd->count("--speed")) cfg.speed_m_per_min = o.speed;
  if (cmd->count("--patience-s")) cfg.order_patience_s = o.patience_s;
  if (cmd->count("--churn-arrivals")) cfg.churn.arrival_rate_per_hour = o.churn_arrivals;
  if (cmd->count("--churn-hazard")) cfg.churn.offline_hazard_per_hour = o.churn_hazard;
  cfg.validate();
  return cfg;
}

struct ArtifactOpts {
  std::string value_net;
  std::string dispatch;
  std::string ls_table;
  std::string qnet;
  double const_pd = 0.5;
};

void add_artifact_flags(CLI::App* cmd, ArtifactOpts& o) {
  cmd->add_option("--value-net", o.value_net, "dual value net checkpoint");
  cmd->add_option("--dispatch-model", o.dispatch, "dispatch classifier checkpoint");
  cmd->add_option("--ls-table", o.ls_table, "long-search table");
  cmd->add_option("--qnet", o.qnet, "sarsa q-net checkpoint");
  cmd->add_option("--const-pd", o.const_pd,
                  "dispatch probability when no classifier is given");
}

rcli::Artifacts load_artifacts(const ArtifactOpts& o) {
  rcli::Artifacts a;
  if (!o.value_net.empty())
    a.value_net = std::make_unique<DualValueNet>(DualValueNet::load(o.value_net));
  if (!o.dispatch.empty())
    a.dispatch = std::make_unique<DispatchClassifier>(DispatchClassifier::load(o.dispatch));
  if (!o.ls_table.empty())
    a.ls_table = std::make_unique<LongSearchTable>(LongSearchTable::load(o.ls_table));
  if (!o.qnet.empty()) a.qnet = std::make_unique<QNetwork>(QNetwork::load(o.qnet));
  a.const_pd = o.const_pd;
  return a;
}

json artifact_json(const ArtifactOpts& o) {
  return {{"value_net", o.value_net},
          {"dispatch_model", o.dispatch},
          {"ls_table", o.ls_table},
          {"qnet", o.qnet},
          {"const_pd", o.const_pd}};
}

// --------------------------------------------------------------- gen-city

struct GenCityOpts {
  std::string out;
  std::string config;
  double half_km = 5.9;
  double edge_m = 500;
  double hours = 8;
  double start_minute = 660;
  double rate = 1.0;
  std::string hour_profile;               // 24 comma-separated multipliers
  std::vector<std::string> hotspots;      // cell:weight
  std::vector<std::string> dest_weights;  // cell:weight
  double jitter_m = 200;
  double trip_speed = 600;
  double min_trip_min = 4;
  double price_per_min = 1.0;
  double price_jitter = 0.25;
  std::string cruising = "none";
  uint64_t seed = 1;
};

std::pair<CellId, double> parse_cell_weight(const std::string& s) {
  size_t colon = s.find(':');
  if (colon == std::string::npos)
    throw rcli::UsageError("expected CELL:WEIGHT, got '" + s + "'");
  try {
    return {static_cast<CellId>(std::stol(s.substr(0, colon))),
            std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw rcli::UsageError("expected CELL:WEIGHT, got '" + s + "'");
  }
}

void cmd_gen_city(const CLI::App* cmd, const GenCityOpts& o) {
  double half_km = o.half_km, edge_m = o.edge_m;
  uint64_t seed = o.seed;
  std::string cruising = o.cruising;
  DemandConfig dc;

  if (!o.config.empty()) {
    json j = json::parse(rcli::read_file(o.config), nullptr, false);
    if (j.is_discarded()) throw DataError("malformed city config " + o.config);
    if (j.contains("grid")) {
      if (j["grid"].contains("half_km")) half_km = j["grid"]["half_km"].get<double>();
      if (j["grid"].contains("edge_m")) edge_m = j["grid"]["edge_m"].get<double>();
    }
    if (j.contains("demand")) dc = demand_config_from_json(j["demand"].dump());
    if (j.contains("seed")) seed = j["seed"].get<uint64_t>();
    if (j.contains("cruising")) cruising = j["cruising"].get<std::string>();
  }
  if (cmd->count("--half-km")) half_km = o.half_km;
  if (cmd->count("--edge-m")) edge_m = o.edge_m;
  if (cmd->count("--seed")) seed = o.seed;
  if (cmd->count("--cruising")) cruising = o.cruising;
  if (cmd->count("--hours")) dc.horizon_s = o.hours * 3600.0;
  if (cmd->count("--start-minute")) dc.start_minute_of_day = o.start_minute;
  if (cmd->count("--rate")) dc.base_rate_per_cell_hour = o.rate;
  if (cmd->count("--jitter-m")) dc.origin_jitter_m = o.jitter_m;
  if (cmd->count("--trip-speed")) dc.trip_speed_m_per_min = o.trip_speed;
  if (cmd->count("--min-trip-min")) dc.min_trip_min = o.min_trip_min;
  if (cmd->count("--price-per-min")) dc.price_per_min = o.price_per_min;
  if (cmd->count("--price-jitter")) dc.price_jitter = o.price_jitter;
  if (!o.hour_profile.empty()) {
    dc.hour_profile.clear();
    for (const std::string& p : split_csv(o.hour_profile)) dc.hour_profile.push_back(std::stod(p));
  }
  for (const std::string& h : o.hotspots) {
    auto [cell, w] = parse_cell_weight(h);
    dc.origin_weight[cell] = w;
  }
  for (const std::string& h : o.dest_weights) {
    auto [cell, w] = parse_cell_weight(h);
    dc.dest_weight[cell] = w;
  }
  if (cruising != "none" && cruising != "uniform")
    throw rcli::UsageError("--cruising must be none or uniform");

  rcli::ensure_dir(o.out);
  double d = half_km * 1000.0 / kMetersPerDeg;
  GridIndex grid(BoundingBox{-d, d, -d, d}, edge_m);
  int valid = 0;
  for (const HexCell& c : grid.cells()) valid += c.valid ? 1 : 0;
  grid.save(o.out + "/grid.bin");

  std::vector<TripOrder> orders = generate_demand(grid, dc, seed);
  save_trip_log(o.out + "/demand.csv", orders);

  json cruise_j = {{"mode", "none"}};
  if (cruising == "uniform") {
    // idle unmanaged drivers random-walk over self + valid neighbors
    CruisingModel model;
    for (int hour = 0; hour < 24; ++hour) {
      for (const HexCell& c : grid.cells()) {
        if (!c.valid) continue;
        CellId id = grid.find(c.axial);
        std::vector<CellId> targets{id};
        for (CellId nb : grid.neighbors(id)) targets.push_back(nb);
        std::vector<std::pair<CellId, double>> row;
        for (CellId t : targets) row.emplace_back(t, 1.0 / targets.size());
        model.set_row(hour, id, row);
      }
    }
    model.save_csv(o.out + "/cruising.csv");
    cruise_j = {{"mode", "uniform"}, {"path", "cruising.csv"}};
  }

  json manifest{{"command", "gen-city"},
                {"seed", seed},
                {"grid",
                 {{"half_km", half_km},
                  {"edge_m", edge_m},
                  {"path", "grid.bin"},
                  {"cells", grid.size()},
                  {"valid_cells", valid}}},
                {"demand",
                 {{"config", json::parse(demand_config_json(dc))},
                  {"path", "demand.csv"},
                  {"orders", orders.size()}}},
                {"cruising", cruise_j}};
  rcli::write_text(o.out + "/city.json", manifest.dump(2) + "\n");
  rcli::log_info("gen-city: " + std::to_string(grid.size()) + " cells (" +
                 std::to_string(valid) + " valid), " + std::to_string(orders.size()) +
                 " orders -> " + o.out);
}

// ------------------------------------------------------------- training loop

// Deterministic resumable batch schedule: epoch e reshuffles the sample
// index with a seed derived from (seed, e), so a resumed trainer replays
// the exact remaining sequence.
template <typename Sample, typename Trainer>
void drive_training(Trainer& tr, const std::vector<Sample>& data, int batch_size,
                    int64_t max_iterations, uint64_t seed) {
  if (data.empty()) throw DataError("no training records");
  const int64_t per_epoch =
      (static_cast<int64_t>(data.size()) + batch_size - 1) / batch_size;
  std::vector<size_t> idx(data.size());
  int64_t shuffled_epoch = -1;
  while (tr.updates_done() < max_iterations) {
    const int64_t it = tr.updates_done();
    const int64_t epoch = it / per_epoch;
    const int64_t slot = it % per_epoch;
    if (epoch != shuffled_epoch) {
      std::iota(idx.begin(), idx.end(), size_t{0});
      Rng rng(derive_seed(seed, static_cast<uint64_t>(epoch)));
      std::shuffle(idx.begin(), idx.end(), rng);
      shuffled_epoch = epoch;
    }
    const size_t lo = static_cast<size_t>(slot) * batch_size;
    const size_t hi = std::min(lo + batch_size, data.size());
    std::vector<Sample> batch;
    batch.reserve(hi - lo);
    for (size_t i = lo; i < hi; ++i) batch.push_back(data[idx[i]]);
    tr.update_batch(batch);
    if (tr.updates_done() % 1000 == 0)
      rcli::log_debug("update " + std::to_string(tr.updates_done()) + "/" +
                      std::to_string(max_iterations));
  }
}

// ------------------------------------------------------------- train-value

struct TrainValueOpts {
  std::vector<std::string> transitions;
  std::string grid;
  std::string out;
  std::string resume_net;
  std::string resume_state;
  double start_minute = 660;
  double episode_min = 480;
  double gamma = 0.92;
  double step_size = 3e-4;
  double l2 = 1e-4;
  int batch = 256;
  int64_t iters = 20000;
  int sync = 1000;
  uint64_t seed = 1;
};

void cmd_train_value(const TrainValueOpts& o) {
  GridIndex grid = GridIndex::load(o.grid);
  std::vector<VnSample> samples;
  for (const std::string& f : o.transitions) {
    std::vector<TransitionRecord> recs = load_transitions(f);
    std::vector<VnSample> part = to_vn_samples(recs, grid, o.start_minute);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  rcli::log_info("train-value: " + std::to_string(samples.size()) + " samples");

  TrainConfig cfg;
  cfg.gamma = o.gamma;
  cfg.step_size = o.step_size;
  cfg.lambda_reg = o.l2;
  cfg.batch_size = o.batch;
  cfg.max_iterations = o.iters;
  cfg.target_sync = o.sync;

  std::unique_ptr<DualValueNet> net;
  if (!o.resume_net.empty()) {
    net = std::make_unique<DualValueNet>(DualValueNet::load(o.resume_net));
  } else {
    net = std::make_unique<DualValueNet>(EmbeddingConfig{}, o.seed);
    net->set_gamma(o.gamma);
    net->set_horizon_min(o.start_minute + o.episode_min);
  }
  DpeTrainer trainer(net.get(), cfg);
  if (!o.resume_state.empty()) trainer.load_state(o.resume_state);

  drive_training(trainer, samples, cfg.batch_size, cfg.max_iterations, o.seed);

  net->save(o.out);
  trainer.save_state(o.out + ".state");
  trainer.write_log_csv(o.out + ".log.csv");
  json manifest{{"command", "train-value"},
                {"inputs", o.transitions},
                {"grid", o.grid},
                {"seed", o.seed},
                {"config",
                 {{"gamma", cfg.gamma},
                  {"step_size", cfg.step_size},
                  {"lambda_reg", cfg.lambda_reg},
                  {"batch_size", cfg.batch_size},
                  {"max_iterations", cfg.max_iterations},
                  {"target_sync", cfg.target_sync},
                  {"start_minute", o.start_minute},
                  {"episode_min", o.episode_min}}},
                {"samples", samples.size()},
                {"rejected", trainer.rejected_records()},
                {"resumed_from", o.resume_net},
                {"outputs",
                 {{"net", o.out}, {"state", o.out + ".state"}, {"log", o.out + ".log.csv"}}}};
  rcli::write_text(o.out + ".json", manifest.dump(2) + "\n");
  rcli::log_info("train-value: " + std::to_string(trainer.updates_done()) + " updates -> " +
                 o.out);
}

// ----------------------------------------------------------- train-dispatch

struct TrainDispatchOpts {
  std::vector<std::string> events;
  std::string out;
  int max_neg_ratio = 5;
  double holdout = 0.2;
  double l2 = 1e-5;
  double lr = 0.1;
  int epochs = 5000;
  bool no_calibrate = false;
  uint64_t seed = 1;
};

void cmd_train_dispatch(const TrainDispatchOpts& o) {
  std::vector<DriverEvent> events;
  for (const std::string& f : o.events) {
    std::vector<DriverEvent> part = load_driver_events(f);
    events.insert(events.end(), part.begin(), part.end());
  }
  TrainingSetCounts counts;
  std::vector<LabeledExample> examples = build_training_set(events, o.max_neg_ratio, o.seed, &counts);
  if (examples.empty()) throw DataError("no training examples");

  Rng rng(derive_seed(o.seed, 0x401dULL));
  std::shuffle(examples.begin(), examples.end(), rng);
  size_t held = static_cast<size_t>(std::llround(examples.size() * o.holdout));
  held = std::min(held, examples.size());
  std::vector<LabeledExample> holdout(examples.end() - held, examples.end());
  std::vector<LabeledExample> train(examples.begin(), examples.end() - held);
  if (train.empty()) throw DataError("holdout fraction leaves no training data");

  DispatchTrainConfig tcfg;
  tcfg.l2 = o.l2;
  tcfg.lr = o.lr;
  tcfg.max_epochs = o.epochs;
  tcfg.calibrate = !o.no_calibrate;
  tcfg.seed = o.seed;
  DispatchClassifier clf = DispatchClassifier::train(train, DispatchFeatureConfig{}, tcfg);
  clf.save(o.out);

  const std::vector<LabeledExample>& report_set = holdout.empty() ? train : holdout;
  ClassifierReport report = evaluate(clf, report_set);
  rcli::write_text(o.out + ".report.json", classifier_report_json(report) + "\n");

  json manifest{{"command", "train-dispatch"},
                {"inputs", o.events},
                {"seed", o.seed},
                {"config",
                 {{"max_neg_ratio", o.max_neg_ratio},
                  {"holdout", o.holdout},
                  {"l2", tcfg.l2},
                  {"lr", tcfg.lr},
                  {"max_epochs", tcfg.max_epochs},
                  {"calibrate", tcfg.calibrate}}},
                {"counts",
                 {{"positives", counts.positives},
                  {"negatives_idle", counts.negatives_idle},
                  {"negatives_onoff", counts.negatives_onoff},
                  {"negatives_kept", counts.negatives_kept}}},
                {"report_split", holdout.empty() ? "train" : "holdout"},
                {"outputs", {{"model", o.out}, {"report", o.out + ".report.json"}}}};
  rcli::write_text(o.out + ".json", manifest.dump(2) + "\n");
  rcli::log_info("train-dispatch: auc " + std::to_string(report.auc) + " on " +
                 (holdout.empty() ? "train" : "holdout") + " -> " + o.out);
}

// -------------------------------------------------------------- train-sarsa

struct TrainSarsaOpts {
  std::vector<std::string> decisions;
  std::string out;
  double gamma = 0.92;
  double step_size = 3e-4;
  double l2 = 1e-4;
  int batch = 256;
  int64_t iters = 20000;
  uint64_t seed = 1;
};

void cmd_train_sarsa(const TrainSarsaOpts& o) {
  std::vector<SarsaSample> samples;
  for (const std::string& f : o.decisions) {
    std::vector<SarsaSample> part = load_sarsa_samples(f);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  rcli::log_info("train-sarsa: " + std::to_string(samples.size()) + " samples");

  SarsaConfig cfg;
  cfg.gamma = o.gamma;
  cfg.step_size = o.step_size;
  cfg.lambda_reg = o.l2;
  cfg.batch_size = o.batch;
  cfg.max_iterations = o.iters;

  QNetwork net(EmbeddingConfig{}, o.seed);
  net.set_gamma(o.gamma);
  SarsaTrainer trainer(&net, cfg);
  drive_training(trainer, samples, cfg.batch_size, cfg.max_iterations, o.seed);

  net.save(o.out);
  trainer.write_log_csv(o.out + ".log.csv");
  json manifest{{"command", "train-sarsa"},
                {"inputs", o.decisions},
                {"seed", o.seed},
                {"config",
                 {{"gamma", cfg.gamma},
                  {"step_size", cfg.step_size},
                  {"lambda_reg", cfg.lambda_reg},
                  {"batch_size", cfg.batch_size},
                  {"max_iterations", cfg.max_iterations}}},
                {"samples", samples.size()},
                {"rejected", trainer.rejected_records()},
                {"outputs", {{"net", o.out}, {"log", o.out + ".log.csv"}}}};
  rcli::write_text(o.out + ".json", manifest.dump(2) + "\n");
  rcli::log_info("train-sarsa: " + std::to_string(trainer.updates_done()) + " updates -> " +
                 o.out);
}

// ------------------------------------------------------------ build-ls-table

struct BuildLsOpts {
  std::string value_net;
  std::string grid;
  std::string out;
  int table_size = 200;
  double bin_min = 20;
};

void cmd_build_ls_table(const BuildLsOpts& o) {
  DualValueNet net = DualValueNet::load(o.value_net);
  GridIndex grid = GridIndex::load(o.grid);
  PlannerConfig pc;
  pc.table_size = o.table_size;
  pc.table_bin_min = o.bin_min;
  LongSearchTable table = build_long_search_table(net, grid, pc);
  table.save(o.out);
  json manifest{{"command", "build-ls-table"},
                {"value_net", o.value_net},
                {"grid", o.grid},
                {"config", {{"table_size", pc.table_size}, {"table_bin_min", pc.table_bin_min}}},
                {"intervals", table.num_intervals()},
                {"outputs", {{"table", o.out}}}};
  rcli::write_text(o.out + ".json", manifest.dump(2) + "\n");
  rcli::log_info("build-ls-table: " + std::to_string(table.num_intervals()) +
                 " intervals -> " + o.out);
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string grid;
  std::string demand;
  std::string cruising;
  std::string out;
  std::string policy = "random";
  double long_trigger_min = 100;
  double lambda = 0.92;
};

void write_metrics_csv(const std::string& path, const EpisodeMetrics& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "driver_id,managed,income,online_min,serving_min,iph,utilization\n";
  for (const DriverMetrics& d : m.drivers) {
    double iph = d.online_min > 0 ? iph_individual(d) : std::numeric_limits<double>::quiet_NaN();
    double util = d.online_min > 0 ? d.serving_min / d.online_min
                                   : std::numeric_limits<double>::quiet_NaN();
    out << d.driver_id << ',' << (d.managed ? 1 : 0) << ',' << fmt(d.income) << ','
        << fmt(d.online_min) << ',' << fmt(d.serving_min) << ',' << fmt(iph) << ','
        << fmt(util) << '\n';
  }
}

void cmd_simulate(const CLI::App* cmd, const SimulateOpts& o, const SimOpts& so,
                  const ArtifactOpts& ao) {
  SimConfig cfg = resolve_sim(cmd, so);
  rcli::Scenario sc = rcli::load_scenario(o.grid, o.demand, o.cruising, cfg.speed_m_per_min);
  rcli::Artifacts art = load_artifacts(ao);
  rcli::PolicySpec spec = rcli::parse_policy_spec(o.policy);
  PlannerConfig pcfg = rcli::planner_config_for(cfg, spec.depth);
  pcfg.long_trigger_min = o.long_trigger_min;
  pcfg.lambda = o.lambda;
  rcli::PolicyBundle bundle = rcli::make_policy(spec, sc, art, cfg, pcfg);

  auto t0 = std::chrono::steady_clock::now();
  EpisodeResult r = run_episode(*sc.grid, *sc.tt, sc.orders, *bundle.policy, cfg,
                                sc.cruising.get());
  double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  rcli::ensure_dir(o.out);
  save_transitions(o.out + "/transitions.jsonl", r.transitions);
  save_sarsa_samples(o.out + "/decisions.jsonl", r.decisions);
  save_driver_events(o.out + "/events.jsonl", r.driver_events);
  save_sd_snapshots(o.out + "/snapshots.jsonl", r.sd_snapshots);
  save_episode_summary(o.out + "/summary.json", r, cfg);
  write_metrics_csv(o.out + "/metrics.csv", r.metrics);

  std::vector<DriverMetrics> managed = r.metrics.managed();
  std::vector<DriverMetrics> unmanaged = r.metrics.unmanaged();
  json manifest{{"command", "simulate"},
                {"policy", bundle.policy->name()},
                {"policy_spec", o.policy},
                {"config", json::parse(sim_config_json(cfg))},
                {"artifacts", artifact_json(ao)},
                {"planner",
                 {{"depth", pcfg.depth},
                  {"stay_min", pcfg.stay_min},
                  {"long_trigger_min", pcfg.long_trigger_min},
                  {"lambda", pcfg.lambda}}},
                {"inputs",
                 {{"grid", o.grid}, {"demand", o.demand}, {"cruising", o.cruising}}},
                {"wall_s", wall_s},
                {"policy_cpu_s", r.policy_cpu_s},
                {"outputs",
                 {"transitions.jsonl", "decisions.jsonl", "events.jsonl", "snapshots.jsonl",
                  "summary.json", "metrics.csv"}}};
  rcli::write_text(o.out + "/manifest.json", manifest.dump(2) + "\n");

  std::cout << "policy=" << bundle.policy->name() << " seed=" << cfg.seed
            << " managed_iph=" << fmt(safe_iph(managed))
            << " unmanaged_iph=" << fmt(safe_iph(unmanaged))
            << " managed_util=" << fmt(safe_util(managed))
            << " orders_completed=" << r.orders.completed << "\n";
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkOpts {
  std::string spec;
  std::string grid;
  std::string demand;
  std::string cruising;
  std::string out;
  std::string policies;  // comma separated
  std::string seeds;     // comma separated
  double long_trigger_min = 100;
  double lambda = 0.92;
  int jobs = 0;
  int n_resamples = 5000;
  uint64_t bootstrap_seed = 0;
};

struct BenchCell {
  std::string policy;
  uint64_t seed = 0;
  double managed_iph = 0, unmanaged_iph = 0, fleet_iph = 0;
  double managed_util = 0, unmanaged_util = 0;
  int64_t created = 0, completed = 0, cancelled = 0, expired = 0;
  int64_t repositions = 0;
  double wall_s = 0, policy_cpu_s = 0;
  std::vector<DriverMetrics> managed, unmanaged;
  std::exception_ptr error;
};

void cmd_benchmark(const CLI::App* cmd, const BenchmarkOpts& o, const SimOpts& so,
                   const ArtifactOpts& ao) {
  std::string grid_path = o.grid, demand_path = o.demand, cruising_path = o.cruising;
  std::string out_dir = o.out;
  std::vector<std::string> policies = split_csv(o.policies);
  std::vector<uint64_t> seeds;
  for (const std::string& s : split_csv(o.seeds)) seeds.push_back(std::stoull(s));
  SimConfig base = resolve_sim(cmd, so);
  ArtifactOpts art_paths = ao;

  if (!o.spec.empty()) {
    json j = json::parse(rcli::read_file(o.spec), nullptr, false);
    if (j.is_discarded()) throw DataError("malformed experiment spec " + o.spec);
    if (grid_path.empty() && j.contains("grid")) grid_path = j["grid"].get<std::string>();
    if (demand_path.empty() && j.contains("demand")) demand_path = j["demand"].get<std::string>();
    if (cruising_path.empty() && j.contains("cruising"))
      cruising_path = j["cruising"].get<std::string>();
    if (out_dir.empty() && j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
    if (policies.empty() && j.contains("policies"))
      policies = j["policies"].get<std::vector<std::string>>();
    if (seeds.empty() && j.contains("seeds")) seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (!cmd->count("--config") && j.contains("sim")) {
      base = sim_config_from_json(j["sim"].dump());
      base.validate();
    }
    if (j.contains("artifacts")) {
      const json& a = j["artifacts"];
      if (art_paths.value_net.empty() && a.contains("value_net"))
        art_paths.value_net = a["value_net"].get<std::string>();
      if (art_paths.dispatch.empty() && a.contains("dispatch_model"))
        art_paths.dispatch = a["dispatch_model"].get<std::string>();
      if (art_paths.ls_table.empty() && a.contains("ls_table"))
        art_paths.ls_table = a["ls_table"].get<std::string>();
      if (art_paths.qnet.empty() && a.contains("qnet"))
        art_paths.qnet = a["qnet"].get<std::string>();
      if (!cmd->count("--const-pd") && a.contains("const_pd"))
        art_paths.const_pd = a["const_pd"].get<double>();
    }
  }
  if (grid_path.empty() || demand_path.empty())
    throw rcli::UsageError("benchmark needs --grid and --demand (or an experiment spec)");
  if (out_dir.empty()) throw rcli::UsageError("benchmark needs --out (or out_dir in the spec)");
  if (policies.empty()) throw DataError("experiment spec has no policies");
  if (seeds.empty()) throw DataError("experiment spec has no seeds");

  // parse all specs up front so a typo fails before any episode runs
  std::vector<rcli::PolicySpec> specs;
  for (const std::string& p : policies) specs.push_back(rcli::parse_policy_spec(p));

  rcli::Scenario sc = rcli::load_scenario(grid_path, demand_path, cruising_path,
                                          base.speed_m_per_min);
  rcli::Artifacts art = load_artifacts(art_paths);

  const size_t n = specs.size() * seeds.size();
  std::vector<BenchCell> cells(n);
  std::atomic<size_t> next{0};
  auto run_cell = [&](size_t i) {
    const rcli::PolicySpec& spec = specs[i / seeds.size()];
    uint64_t seed = seeds[i % seeds.size()];
    BenchCell& c = cells[i];
    c.policy = spec.label;
    c.seed = seed;
    SimConfig cfg = base;
    cfg.seed = seed;
    PlannerConfig pcfg = rcli::planner_config_for(cfg, spec.depth);
    pcfg.long_trigger_min = o.long_trigger_min;
    pcfg.lambda = o.lambda;
    rcli::PolicyBundle bundle = rcli::make_policy(spec, sc, art, cfg, pcfg);
    auto t0 = std::chrono::steady_clock::now();
    EpisodeResult r =
        run_episode(*sc.grid, *sc.tt, sc.orders, *bundle.policy, cfg, sc.cruising.get());
    c.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.policy_cpu_s = r.policy_cpu_s;
    c.managed = r.metrics.managed();
    c.unmanaged = r.metrics.unmanaged();
    c.managed_iph = safe_iph(c.managed);
    c.unmanaged_iph = safe_iph(c.unmanaged);
    c.fleet_iph = safe_iph(r.metrics.drivers);
    c.managed_util = safe_util(c.managed);
    c.unmanaged_util = safe_util(c.unmanaged);
    c.created = r.orders.created;
    c.completed = r.orders.completed;
    c.cancelled = r.orders.cancelled;
    c.expired = r.orders.expired;
    c.repositions = r.repositions.issued;
    rcli::log_info("cell " + spec.label + " seed " + std::to_string(seed) + ": managed_iph=" +
                   fmt(c.managed_iph) + " wall_s=" + fmt(c.wall_s));
  };

  int jobs = o.jobs > 0 ? o.jobs
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = static_cast<int>(std::min<size_t>(jobs, n));
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          run_cell(i);
        } catch (...) {
          cells[i].error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& w : workers) w.join();
  for (const BenchCell& c : cells)
    if (c.error) std::rethrow_exception(c.error);

  rcli::ensure_dir(out_dir);

  std::ofstream table(out_dir + "/results.csv");
  if (!table) throw DataError("cannot write " + out_dir + "/results.csv");
  table << "policy,seed,managed_iph,unmanaged_iph,fleet_iph,managed_utilization,"
           "unmanaged_utilization,orders_created,orders_completed,orders_cancelled,"
           "orders_expired,repositions_issued,wall_s,policy_cpu_s\n";
  json rows = json::array();
  for (const BenchCell& c : cells) {
    table << c.policy << ',' << c.seed << ',' << fmt(c.managed_iph) << ','
          << fmt(c.unmanaged_iph) << ',' << fmt(c.fleet_iph) << ',' << fmt(c.managed_util)
          << ',' << fmt(c.unmanaged_util) << ',' << c.created << ',' << c.completed << ','
          << c.cancelled << ',' << c.expired << ',' << c.repositions << ',' << fmt(c.wall_s)
          << ',' << fmt(c.policy_cpu_s) << '\n';
    rows.push_back({{"policy", c.policy},
                    {"seed", c.seed},
                    {"managed_iph", c.managed_iph},
                    {"unmanaged_iph", c.unmanaged_iph},
                    {"fleet_iph", c.fleet_iph},
                    {"managed_utilization", c.managed_util},
                    {"unmanaged_utilization", c.unmanaged_util},
                    {"orders_created", c.created},
                    {"orders_completed", c.completed},
                    {"orders_cancelled", c.cancelled},
                    {"orders_expired", c.expired},
                    {"repositions_issued", c.repositions},
                    {"wall_s", c.wall_s},
                    {"policy_cpu_s", c.policy_cpu_s}});
  }
  table.close();

  // per policy: managed drivers pooled over seeds vs the unmanaged pool
  json comparisons = json::object();
  for (size_t p = 0; p < specs.size(); ++p) {
    std::vector<DriverMetrics> exp_pool, ctl_pool;
    for (size_t s = 0; s < seeds.size(); ++s) {
      const BenchCell& c = cells[p * seeds.size() + s];
      exp_pool.insert(exp_pool.end(), c.managed.begin(), c.managed.end());
      ctl_pool.insert(ctl_pool.end(), c.unmanaged.begin(), c.unmanaged.end());
    }
    json entry;
    if (!exp_pool.empty() && !ctl_pool.empty()) {
      BootstrapReport iph = bootstrap_compare(exp_pool, ctl_pool, GroupMetric::kIph,
                                              o.n_resamples, o.bootstrap_seed);
      BootstrapReport util = bootstrap_compare(exp_pool, ctl_pool, GroupMetric::kUtilization,
                                               o.n_resamples, o.bootstrap_seed);
      entry = {{"iph", json::parse(bootstrap_report_json(iph))},
               {"utilization", json::parse(bootstrap_report_json(util))}};
    } else {
      entry = {{"iph", nullptr}, {"utilization", nullptr}};
    }
    comparisons[specs[p].label] = entry;
  }

  // pairwise one-sided wilcoxon on per-seed managed iph
  std::ofstream wilcox(out_dir + "/wilcoxon.csv");
  if (!wilcox) throw DataError("cannot write " + out_dir + "/wilcoxon.csv");
  wilcox << "policy_a,policy_b,p_a_gt_b\n";
  json wilcox_rows = json::array();
  for (size_t a = 0; a < specs.size(); ++a) {
    for (size_t b = 0; b < specs.size(); ++b) {
      if (a == b) continue;
      std::vector<double> xa, xb;
      for (size_t s = 0; s < seeds.size(); ++s) {
        double va = cells[a * seeds.size() + s].managed_iph;
        double vb = cells[b * seeds.size() + s].managed_iph;
        if (std::isfinite(va) && std::isfinite(vb)) {
          xa.push_back(va);
          xb.push_back(vb);
        }
      }
      double p = xa.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : wilcoxon_signed_rank_one_sided_p(xa, xb);
      wilcox << specs[a].label << ',' << specs[b].label << ',' << fmt(p) << '\n';
      wilcox_rows.push_back(
          {{"policy_a", specs[a].label}, {"policy_b", specs[b].label}, {"p_a_gt_b", p}});
    }
  }
  wilcox.close();

  json seeds_j = json::array();
  for (uint64_t s : seeds) seeds_j.push_back(s);
  json result{{"command", "benchmark"},
              {"spec",
               {{"grid", grid_path},
                {"demand", demand_path},
                {"cruising", cruising_path},
                {"sim", json::parse(sim_config_json(base))},
                {"artifacts", artifact_json(art_paths)},
                {"policies", policies},
                {"seeds", seeds_j},
                {"n_resamples", o.n_resamples},
                {"bootstrap_seed", o.bootstrap_seed},
                {"long_trigger_min", o.long_trigger_min},
                {"lambda", o.lambda}}},
              {"rows", rows},
              {"comparisons", comparisons},
              {"wilcoxon", wilcox_rows}};
  rcli::write_text(out_dir + "/results.json", result.dump(2) + "\n");
  rcli::write_text(out_dir + "/comparisons.json", comparisons.dump(2) + "\n");
  rcli::log_info("benchmark: " + std::to_string(n) + " cells -> " + out_dir);
  std::cout << "benchmark " << specs.size() << " policies x " << seeds.size() << " seeds -> "
            << out_dir << "/results.csv\n";
}

// ----------------------------------------------------------------- evaluate

struct EvaluateOpts {
  std::vector<std::string> summaries;
  std::string window;  // "begin:end" minutes
  int n_resamples = 5000;
  uint64_t seed = 0;
  std::string out;
  std::string csv;
};

void cmd_evaluate(const EvaluateOpts& o) {
  std::vector<DriverLog> logs;
  for (const std::string& f : o.summaries) {
    std::vector<DriverLog> part = load_episode_logs(f);
    logs.insert(logs.end(), part.begin(), part.end());
  }
  if (logs.empty()) throw DataError("no driver logs in the given summaries");

  std::optional<Window> win;
  if (!o.window.empty()) {
    size_t colon = o.window.find(':');
    if (colon == std::string::npos)
      throw rcli::UsageError("--window expects BEGIN:END in minutes");
    try {
      win = Window{std::stod(o.window.substr(0, colon)), std::stod(o.window.substr(colon + 1))};
    } catch (const std::exception&) {
      throw rcli::UsageError("--window expects BEGIN:END in minutes");
    }
    if (win->end <= win->begin) throw rcli::UsageError("--window end must exceed begin");
  }

  EpisodeMetrics m = summarize_episode(logs, win);
  std::vector<DriverMetrics> managed = m.managed();
  std::vector<DriverMetrics> unmanaged = m.unmanaged();
  if (managed.empty()) throw DataError("no managed drivers in the given summaries");
  if (unmanaged.empty()) throw DataError("no unmanaged drivers in the given summaries");

  BootstrapReport iph =
      bootstrap_compare(managed, unmanaged, GroupMetric::kIph, o.n_resamples, o.seed);
  BootstrapReport util =
      bootstrap_compare(managed, unmanaged, GroupMetric::kUtilization, o.n_resamples, o.seed);

  auto group_json = [](const std::vector<DriverMetrics>& g) {
    double income = 0, online = 0, serving = 0;
    for (const DriverMetrics& d : g) {
      income += d.income;
      online += d.online_min;
      serving += d.serving_min;
    }
    return json{{"drivers", g.size()},
                {"income", income},
                {"online_min", online},
                {"serving_min", serving},
                {"iph", safe_iph(g)},
                {"utilization", safe_util(g)}};
  };
  json report{{"command", "evaluate"},
              {"inputs", o.summaries},
              {"window", o.window.empty() ? json(nullptr)
                                          : json{{"begin", win->begin}, {"end", win->end}}},
              {"n_resamples", o.n_resamples},
              {"seed", o.seed},
              {"managed", group_json(managed)},
              {"unmanaged", group_json(unmanaged)},
              {"bootstrap",
               {{"iph", json::parse(bootstrap_report_json(iph))},
                {"utilization", json::parse(bootstrap_report_json(util))}}}};
  std::string text = report.dump(2) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    rcli::write_text(o.out, text);

  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    if (!out) throw DataError("cannot write " + o.csv);
    out << "metric,observed,ci_lo,ci_hi,n_resamples,significant\n";
    for (const BootstrapReport* r : {&iph, &util})
      out << r->metric << ',' << fmt(r->observed) << ',' << fmt(r->ci_lo) << ','
          << fmt(r->ci_hi) << ',' << r->n_resamples << ',' << (r->significant ? 1 : 0)
          << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ride-hailing repositioning testbed"};
  app.require_subcommand(1);

  auto gc = std::make_shared<GenCityOpts>();
  CLI::App* gen = app.add_subcommand("gen-city", "tessellate a synthetic city and its demand");
  gen->add_option("--out", gc->out, "output directory")->required();
  gen->add_option("--city-config", gc->config, "city config json; flags override");
  gen->add_option("--half-km", gc->half_km, "half-width of the square region, km");
  gen->add_option("--edge-m", gc->edge_m, "hex edge length, m");
  gen->add_option("--hours", gc->hours, "demand horizon, hours");
  gen->add_option("--start-minute", gc->start_minute, "demand clock start, minute of day");
  gen->add_option("--rate", gc->rate, "base orders per cell-hour");
  gen->add_option("--hour-profile", gc->hour_profile, "24 comma-separated multipliers");
  gen->add_option("--hotspot", gc->hotspots, "origin hotspot CELL:WEIGHT (repeatable)");
  gen->add_option("--dest-weight", gc->dest_weights, "destination weight CELL:WEIGHT");
  gen->add_option("--jitter-m", gc->jitter_m, "origin jitter, m");
  gen->add_option("--trip-speed", gc->trip_speed, "trip speed, m/min");
  gen->add_option("--min-trip-min", gc->min_trip_min, "minimum trip duration, min");
  gen->add_option("--price-per-min", gc->price_per_min, "fare per trip minute");
  gen->add_option("--price-jitter", gc->price_jitter, "uniform +-fraction on the fare");
  gen->add_option("--cruising", gc->cruising, "none | uniform idle cruising model");
  gen->add_option("--seed", gc->seed, "demand seed");
  gen->callback([gen, gc] { cmd_gen_city(gen, *gc); });

  auto tv = std::make_shared<TrainValueOpts>();
  CLI::App* tval = app.add_subcommand("train-value", "fit the dual value net on logged transitions");
  tval->add_option("--transitions", tv->transitions, "transitions jsonl (repeatable)")->required();
  tval->add_option("--grid", tv->grid, "grid file")->required();
  tval->add_option("--out", tv->out, "output checkpoint")->required();
  tval->add_option("--start-minute", tv->start_minute, "episode start, minute of day");
  tval->add_option("--episode-min", tv->episode_min, "episode length, minutes");
  tval->add_option("--gamma", tv->gamma, "per-minute discount");
  tval->add_option("--step-size", tv->step_size, "adam step size");
  tval->add_option("--l2", tv->l2, "dense weight decay");
  tval->add_option("--batch", tv->batch, "batch size");
  tval->add_option("--iters", tv->iters, "update count");
  tval->add_option("--sync", tv->sync, "target sync cadence, updates");
  tval->add_option("--seed", tv->seed, "init + shuffle seed");
  tval->add_option("--resume-net", tv->resume_net, "checkpoint to continue from");
  tval->add_option("--resume-state", tv->resume_state, "trainer state to continue from");
  tval->callback([tv] { cmd_train_value(*tv); });

  auto td = std::make_shared<TrainDispatchOpts>();
  CLI::App* tdis = app.add_subcommand("train-dispatch", "fit the dispatch classifier on driver events");
  tdis->add_option("--events", td->events, "events jsonl (repeatable)")->required();
  tdis->add_option("--out", td->out, "output model file")->required();
  tdis->add_option("--max-neg-ratio", td->max_neg_ratio, "kept negatives per positive");
  tdis->add_option("--holdout", td->holdout, "held-out fraction for the report");
  tdis->add_option("--l2", td->l2, "l2 strength");
  tdis->add_option("--lr", td->lr, "learning rate");
  tdis->add_option("--epochs", td->epochs, "max epochs");
  tdis->add_flag("--no-calibrate", td->no_calibrate, "skip isotonic calibration");
  tdis->add_option("--seed", td->seed, "sampling seed");
  tdis->callback([td] { cmd_train_dispatch(*td); });

  auto ts = std::make_shared<TrainSarsaOpts>();
  CLI::App* tsar = app.add_subcommand("train-sarsa", "fit the q-net on logged decision hops");
  tsar->add_option("--decisions", ts->decisions, "decisions jsonl (repeatable)")->required();
  tsar->add_option("--out", ts->out, "output checkpoint")->required();
  tsar->add_option("--gamma", ts->gamma, "per-minute discount");
  tsar->add_option("--step-size", ts->step_size, "adam step size");
  tsar->add_option("--l2", ts->l2, "dense weight decay");
  tsar->add_option("--batch", ts->batch, "batch size");
  tsar->add_option("--iters", ts->iters, "update count");
  tsar->add_option("--seed", ts->seed, "init + shuffle seed");
  tsar->callback([ts] { cmd_train_sarsa(*ts); });

  auto bl = std::make_shared<BuildLsOpts>();
  CLI::App* blt = app.add_subcommand("build-ls-table", "precompute the long-search shortlist");
  blt->add_option("--value-net", bl->value_net, "dual value net checkpoint")->required();
  blt->add_option("--grid", bl->grid, "grid file")->required();
  blt->add_option("--out", bl->out, "output table file")->required();
  blt->add_option("--table-size", bl->table_size, "entries kept per interval");
  blt->add_option("--bin-min", bl->bin_min, "interval width, minutes");
  blt->callback([bl] { cmd_build_ls_table(*bl); });

  auto si = std::make_shared<SimulateOpts>();
  auto si_sim = std::make_shared<SimOpts>();
  auto si_art = std::make_shared<ArtifactOpts>();
  CLI::App* sim = app.add_subcommand("simulate", "run one episode and dump its artifacts");
  sim->add_option("--grid", si->grid, "grid file")->required();
  sim->add_option("--demand", si->demand, "trip log csv")->required();
  sim->add_option("--cruising", si->cruising, "cruising model csv");
  sim->add_option("--out", si->out, "output directory")->required();
  sim->add_option("--policy", si->policy,
                  "random|greedy|mab|stay|vps[:depth][:stochastic]|sarsa[:sdreg]");
  sim->add_option("--long-trigger-min", si->long_trigger_min, "idle minutes before long search");
  sim->add_option("--lambda", si->lambda, "long-search discount base");
  add_sim_flags(sim, *si_sim);
  add_artifact_flags(sim, *si_art);
  sim->callback([sim, si, si_sim, si_art] { cmd_simulate(sim, *si, *si_sim, *si_art); });

  auto be = std::make_shared<BenchmarkOpts>();
  auto be_sim = std::make_shared<SimOpts>();
  auto be_art = std::make_shared<ArtifactOpts>();
  CLI::App* ben = app.add_subcommand("benchmark", "run a policy x seed matrix and compare");
  ben->add_option("--spec", be->spec, "experiment spec json");
  ben->add_option("--grid", be->grid, "grid file");
  ben->add_option("--demand", be->demand, "trip log csv");
  ben->add_option("--cruising", be->cruising, "cruising model csv");
  ben->add_option("--out", be->out, "output directory");
  ben->add_option("--policies", be->policies, "comma-separated policy roster");
  ben->add_option("--seeds", be->seeds, "comma-separated seeds");
  ben->add_option("--long-trigger-min", be->long_trigger_min, "idle minutes before long search");
  ben->add_option("--lambda", be->lambda, "long-search discount base");
  ben->add_option("--jobs", be->jobs, "parallel episodes (default: hardware threads)");
  ben->add_option("--n-resamples", be->n_resamples, "bootstrap resamples");
  ben->add_option("--bootstrap-seed", be->bootstrap_seed, "bootstrap seed");
  add_sim_flags(ben, *be_sim);
  add_artifact_flags(ben, *be_art);
  ben->callback([ben, be, be_sim, be_art] { cmd_benchmark(ben, *be, *be_sim, *be_art); });

  auto ev = std::make_shared<EvaluateOpts>();
  CLI::App* eva = app.add_subcommand("evaluate", "bootstrap comparison over saved summaries");
  eva->add_option("--summary", ev->summaries, "episode summary json (repeatable)")->required();
  eva->add_option("--window", ev->window, "evaluation window BEGIN:END, minutes");
  eva->add_option("--n-resamples", ev->n_resamples, "bootstrap resamples");
  eva->add_option("--seed", ev->seed, "bootstrap seed");
  eva->add_option("--out", ev->out, "report json (stdout when omitted)");
  eva->add_option("--csv", ev->csv, "also write the reports as csv");
  eva->callback([ev] { cmd_evaluate(*ev); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const rcli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const OutOfRegionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
