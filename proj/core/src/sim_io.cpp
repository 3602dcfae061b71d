#include "reposim/sim_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reposim/errors.hpp"

namespace reposim {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

json parse_line(const std::string& line, const std::string& path, size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw DataError(path + ":" + std::to_string(lineno) + ": malformed json");
  return j;
}

// field access with the line number attached to any mismatch
template <typename T>
T field(const json& j, const char* key, const std::string& path, size_t lineno) {
  auto it = j.find(key);
  if (it == j.end())
    throw DataError(path + ":" + std::to_string(lineno) + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(path + ":" + std::to_string(lineno) + ": bad field '" + key + "'");
  }
}

json state_to_json(const DriverState& s) {
  return {{"lat", s.location.lat}, {"lon", s.location.lon}, {"cell", s.cell},
          {"t", s.time_s}};
}

DriverState state_from_json(const json& j, const std::string& path, size_t lineno) {
  DriverState s;
  s.location = {field<double>(j, "lat", path, lineno), field<double>(j, "lon", path, lineno)};
  s.cell = field<CellId>(j, "cell", path, lineno);
  s.time_s = field<double>(j, "t", path, lineno);
  return s;
}

json key_to_json(const StateKey& s) {
  return {{"q", s.q}, {"r", s.r}, {"minute", s.minute}};
}

StateKey key_from_json(const json& j, const std::string& path, size_t lineno) {
  return {field<int>(j, "q", path, lineno), field<int>(j, "r", path, lineno),
          field<double>(j, "minute", path, lineno)};
}

json sd_to_json(const SDContext& sd) {
  json f = json::array();
  for (int row = 0; row < 3; ++row) {
    json r = json::array();
    for (int col = 0; col < 7; ++col) r.push_back(sd.f(row, col));
    f.push_back(std::move(r));
  }
  json present = json::array();
  for (bool p : sd.present) present.push_back(p);
  return {{"f", std::move(f)}, {"present", std::move(present)}};
}

SDContext sd_from_json(const json& j, const std::string& path, size_t lineno) {
  SDContext sd;
  const json& f = j.at("f");
  const json& present = j.at("present");
  if (!f.is_array() || f.size() != 3 || !present.is_array() || present.size() != 7)
    throw DataError(path + ":" + std::to_string(lineno) + ": bad sd context shape");
  for (int row = 0; row < 3; ++row) {
    const json& r = f[static_cast<size_t>(row)];
    if (!r.is_array() || r.size() != 7)
      throw DataError(path + ":" + std::to_string(lineno) + ": bad sd context shape");
    for (int col = 0; col < 7; ++col) sd.f(row, col) = r[static_cast<size_t>(col)].get<double>();
  }
  for (int k = 0; k < 7; ++k) sd.present[static_cast<size_t>(k)] = present[static_cast<size_t>(k)].get<bool>();
  return sd;
}

const char* event_kind_name(DriverEventKind k) {
  switch (k) {
    case DriverEventKind::kDispatchReceipt: return "dispatch";
    case DriverEventKind::kIdleStart: return "idle";
    case DriverEventKind::kOnline: return "online";
    case DriverEventKind::kOffline: return "offline";
  }
  return "unknown";
}

DriverEventKind event_kind_from(const std::string& name, const std::string& path,
                                size_t lineno) {
  if (name == "dispatch") return DriverEventKind::kDispatchReceipt;
  if (name == "idle") return DriverEventKind::kIdleStart;
  if (name == "online") return DriverEventKind::kOnline;
  if (name == "offline") return DriverEventKind::kOffline;
  throw DataError(path + ":" + std::to_string(lineno) + ": unknown event kind '" + name + "'");
}

json metrics_to_json(const DriverMetrics& m) {
  return {{"driver_id", m.driver_id}, {"managed", m.managed}, {"income", m.income},
          {"online_min", m.online_min}, {"serving_min", m.serving_min}};
}

}  // namespace

void save_transitions(const std::string& path, const std::vector<TransitionRecord>& recs) {
  std::ofstream out = open_out(path);
  for (const TransitionRecord& r : recs) {
    json j{{"driver_id", r.driver_id},
           {"managed", r.managed},
           {"s", state_to_json(r.s)},
           {"kind", r.option.kind == OptionKind::kDispatch ? "dispatch" : "reposition"},
           {"dest", r.option.destination},
           {"trip_id", r.option.trip_id},
           {"duration_min", r.option.duration_min},
           {"price", r.option.price},
           {"cost", r.option.cost},
           {"reward", r.reward},
           {"k", r.k},
           {"s_next", state_to_json(r.s_next)},
           {"terminal", r.terminal}};
    out << j.dump() << '\n';
  }
}

std::vector<TransitionRecord> load_transitions(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<TransitionRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    TransitionRecord r;
    r.driver_id = field<int64_t>(j, "driver_id", path, lineno);
    r.managed = field<bool>(j, "managed", path, lineno);
    r.s = state_from_json(j.at("s"), path, lineno);
    std::string kind = field<std::string>(j, "kind", path, lineno);
    if (kind != "dispatch" && kind != "reposition")
      throw DataError(path + ":" + std::to_string(lineno) + ": unknown option kind '" + kind + "'");
    r.option.kind = kind == "dispatch" ? OptionKind::kDispatch : OptionKind::kReposition;
    r.option.destination = field<CellId>(j, "dest", path, lineno);
    r.option.trip_id = field<int64_t>(j, "trip_id", path, lineno);
    r.option.duration_min = field<double>(j, "duration_min", path, lineno);
    r.option.price = field<double>(j, "price", path, lineno);
    r.option.cost = field<double>(j, "cost", path, lineno);
    r.reward = field<double>(j, "reward", path, lineno);
    r.k = field<int>(j, "k", path, lineno);
    if (r.k < 1) throw DataError(path + ":" + std::to_string(lineno) + ": k must be >= 1");
    r.s_next = state_from_json(j.at("s_next"), path, lineno);
    r.terminal = field<bool>(j, "terminal", path, lineno);
    out.push_back(std::move(r));
  }
  return out;
}

void save_sarsa_samples(const std::string& path, const std::vector<SarsaSample>& samples) {
  std::ofstream out = open_out(path);
  for (const SarsaSample& s : samples) {
    json j{{"s", key_to_json(s.s)},         {"sd", sd_to_json(s.sd)},
           {"option", s.option},            {"reward", s.reward},
           {"k", s.k},                      {"s_next", key_to_json(s.s_next)},
           {"sd_next", sd_to_json(s.sd_next)}, {"option_next", s.option_next},
           {"terminal", s.terminal}};
    out << j.dump() << '\n';
  }
}

std::vector<SarsaSample> load_sarsa_samples(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<SarsaSample> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    SarsaSample s;
    s.s = key_from_json(j.at("s"), path, lineno);
    s.sd = sd_from_json(j.at("sd"), path, lineno);
    s.option = field<int>(j, "option", path, lineno);
    s.reward = field<double>(j, "reward", path, lineno);
    s.k = field<int>(j, "k", path, lineno);
    if (s.k < 1) throw DataError(path + ":" + std::to_string(lineno) + ": k must be >= 1");
    s.s_next = key_from_json(j.at("s_next"), path, lineno);
    s.sd_next = sd_from_json(j.at("sd_next"), path, lineno);
    s.option_next = field<int>(j, "option_next", path, lineno);
    s.terminal = field<bool>(j, "terminal", path, lineno);
    out.push_back(std::move(s));
  }
  return out;
}

void save_driver_events(const std::string& path, const std::vector<DriverEvent>& events) {
  std::ofstream out = open_out(path);
  for (const DriverEvent& e : events) {
    json j{{"kind", event_kind_name(e.kind)},
           {"cell", e.ctx.cell},
           {"minute", e.ctx.minute_of_day},
           {"dow", e.ctx.day_of_week},
           {"driver_id", e.ctx.driver_id}};
    out << j.dump() << '\n';
  }
}

std::vector<DriverEvent> load_driver_events(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<DriverEvent> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    DriverEvent e;
    e.kind = event_kind_from(field<std::string>(j, "kind", path, lineno), path, lineno);
    e.ctx.cell = field<CellId>(j, "cell", path, lineno);
    e.ctx.minute_of_day = field<double>(j, "minute", path, lineno);
    e.ctx.day_of_week = field<int>(j, "dow", path, lineno);
    e.ctx.driver_id = field<int64_t>(j, "driver_id", path, lineno);
    out.push_back(e);
  }
  return out;
}

void save_sd_snapshots(const std::string& path, const std::vector<SdSnapshot>& snaps) {
  std::ofstream out = open_out(path);
  for (const SdSnapshot& s : snaps) {
    json j{{"t", s.time_s},
           {"cell", s.cell},
           {"idle", s.idle},
           {"requests", s.requests},
           {"unassigned", s.unassigned}};
    out << j.dump() << '\n';
  }
}

std::vector<SdSnapshot> load_sd_snapshots(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<SdSnapshot> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    SdSnapshot s;
    s.time_s = field<double>(j, "t", path, lineno);
    s.cell = field<CellId>(j, "cell", path, lineno);
    s.idle = field<double>(j, "idle", path, lineno);
    s.requests = field<double>(j, "requests", path, lineno);
    s.unassigned = field<double>(j, "unassigned", path, lineno);
    out.push_back(s);
  }
  return out;
}

std::vector<VnSample> to_vn_samples(const std::vector<TransitionRecord>& recs,
                                    const GridIndex& grid, double start_minute_of_day) {
  std::vector<VnSample> out;
  out.reserve(recs.size());
  for (const TransitionRecord& r : recs) {
    VnSample v;
    const AxialCoord& a = grid.cell(r.s.cell).axial;
    v.s = {a.q, a.r, start_minute_of_day + r.s.time_s / 60.0};
    const AxialCoord& b = grid.cell(r.s_next.cell).axial;
    v.s_next = {b.q, b.r, start_minute_of_day + r.s_next.time_s / 60.0};
    v.reward = r.reward;
    v.k = r.k;
    v.terminal = r.terminal;
    v.dispatch = r.option.kind == OptionKind::kDispatch;
    out.push_back(v);
  }
  return out;
}

namespace {

json cancellation_to_json(const CancellationConfig& c) {
  return {{"midpoint_m", c.midpoint_m}, {"scale_m", c.scale_m}, {"floor", c.floor},
          {"ceiling", c.ceiling}};
}

json churn_to_json(const ChurnConfig& c) {
  return {{"arrival_rate_per_hour", c.arrival_rate_per_hour},
          {"offline_hazard_per_hour", c.offline_hazard_per_hour}};
}

json sim_config_to_json(const SimConfig& c) {
  return {{"match_window_s", c.match_window_s},
          {"reposition_review_s", c.reposition_review_s},
          {"idle_threshold_min", c.idle_threshold_min},
          {"horizon_s", c.horizon_s},
          {"start_minute_of_day", c.start_minute_of_day},
          {"day_of_week", c.day_of_week},
          {"seed", c.seed},
          {"num_drivers", c.num_drivers},
          {"num_managed", c.num_managed},
          {"speed_m_per_min", c.speed_m_per_min},
          {"reposition_cost_per_min", c.reposition_cost_per_min},
          {"order_patience_s", c.order_patience_s},
          {"sd_window_s", c.sd_window_s},
          {"gamma", c.gamma},
          {"cancellation", cancellation_to_json(c.cancellation)},
          {"churn", churn_to_json(c.churn)},
          {"record_sd_snapshots", c.record_sd_snapshots}};
}

template <typename T>
void maybe_get(const json& j, const char* key, T* out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    *out = it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("bad config field '") + key + "'");
  }
}

SimConfig sim_config_from(const json& j) {
  SimConfig c;
  maybe_get(j, "match_window_s", &c.match_window_s);
  maybe_get(j, "reposition_review_s", &c.reposition_review_s);
  maybe_get(j, "idle_threshold_min", &c.idle_threshold_min);
  maybe_get(j, "horizon_s", &c.horizon_s);
  maybe_get(j, "start_minute_of_day", &c.start_minute_of_day);
  maybe_get(j, "day_of_week", &c.day_of_week);
  maybe_get(j, "seed", &c.seed);
  maybe_get(j, "num_drivers", &c.num_drivers);
  maybe_get(j, "num_managed", &c.num_managed);
  maybe_get(j, "speed_m_per_min", &c.speed_m_per_min);
  maybe_get(j, "reposition_cost_per_min", &c.reposition_cost_per_min);
  maybe_get(j, "order_patience_s", &c.order_patience_s);
  maybe_get(j, "sd_window_s", &c.sd_window_s);
  maybe_get(j, "gamma", &c.gamma);
  if (j.count("cancellation")) {
    const json& k = j.at("cancellation");
    maybe_get(k, "midpoint_m", &c.cancellation.midpoint_m);
    maybe_get(k, "scale_m", &c.cancellation.scale_m);
    maybe_get(k, "floor", &c.cancellation.floor);
    maybe_get(k, "ceiling", &c.cancellation.ceiling);
  }
  if (j.count("churn")) {
    const json& k = j.at("churn");
    maybe_get(k, "arrival_rate_per_hour", &c.churn.arrival_rate_per_hour);
    maybe_get(k, "offline_hazard_per_hour", &c.churn.offline_hazard_per_hour);
  }
  maybe_get(j, "record_sd_snapshots", &c.record_sd_snapshots);
  return c;
}

}  // namespace

std::string sim_config_json(const SimConfig& cfg) { return sim_config_to_json(cfg).dump(2); }

SimConfig sim_config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed sim config json");
  return sim_config_from(j);
}

std::string demand_config_json(const DemandConfig& cfg) {
  json j{{"horizon_s", cfg.horizon_s},
         {"start_minute_of_day", cfg.start_minute_of_day},
         {"base_rate_per_cell_hour", cfg.base_rate_per_cell_hour},
         {"origin_jitter_m", cfg.origin_jitter_m},
         {"trip_speed_m_per_min", cfg.trip_speed_m_per_min},
         {"min_trip_min", cfg.min_trip_min},
         {"price_per_min", cfg.price_per_min},
         {"price_jitter", cfg.price_jitter}};
  if (!cfg.hour_profile.empty()) j["hour_profile"] = cfg.hour_profile;
  if (!cfg.origin_weight.empty()) {
    json w = json::object();
    for (const auto& [cell, v] : cfg.origin_weight) w[std::to_string(cell)] = v;
    j["origin_weight"] = std::move(w);
  }
  if (!cfg.dest_weight.empty()) {
    json w = json::object();
    for (const auto& [cell, v] : cfg.dest_weight) w[std::to_string(cell)] = v;
    j["dest_weight"] = std::move(w);
  }
  return j.dump(2);
}

DemandConfig demand_config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed demand config json");
  DemandConfig c;
  maybe_get(j, "horizon_s", &c.horizon_s);
  maybe_get(j, "start_minute_of_day", &c.start_minute_of_day);
  maybe_get(j, "base_rate_per_cell_hour", &c.base_rate_per_cell_hour);
  maybe_get(j, "origin_jitter_m", &c.origin_jitter_m);
  maybe_get(j, "trip_speed_m_per_min", &c.trip_speed_m_per_min);
  maybe_get(j, "min_trip_min", &c.min_trip_min);
  maybe_get(j, "price_per_min", &c.price_per_min);
  maybe_get(j, "price_jitter", &c.price_jitter);
  maybe_get(j, "hour_profile", &c.hour_profile);
  auto parse_weights = [&](const char* key, std::map<CellId, double>* out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_object()) throw DataError(std::string("bad config field '") + key + "'");
    for (const auto& [k, v] : it->items()) {
      try {
        (*out)[static_cast<CellId>(std::stoll(k))] = v.get<double>();
      } catch (const std::exception&) {
        throw DataError(std::string("bad config field '") + key + "'");
      }
    }
  };
  parse_weights("origin_weight", &c.origin_weight);
  parse_weights("dest_weight", &c.dest_weight);
  return c;
}

void save_episode_summary(const std::string& path, const EpisodeResult& r,
                          const SimConfig& cfg) {
  json logs = json::array();
  for (const DriverLog& l : r.logs) {
    json trips = json::array();
    for (const TripRecord& t : l.trips) trips.push_back({{"at", t.completed_at}, {"price", t.price}});
    json online = json::array();
    for (const Span& s : l.online_spans) online.push_back({{"begin", s.begin}, {"end", s.end}});
    json serving = json::array();
    for (const Span& s : l.serving_spans) serving.push_back({{"begin", s.begin}, {"end", s.end}});
    logs.push_back({{"driver_id", l.driver_id},
                    {"managed", l.managed},
                    {"trips", std::move(trips)},
                    {"online_spans", std::move(online)},
                    {"serving_spans", std::move(serving)}});
  }
  json metrics = json::array();
  for (const DriverMetrics& m : r.metrics.drivers) metrics.push_back(metrics_to_json(m));

  json j{{"config", sim_config_to_json(cfg)},
         {"orders",
          {{"created", r.orders.created},
           {"completed", r.orders.completed},
           {"cancelled", r.orders.cancelled},
           {"expired", r.orders.expired}}},
         {"repositions",
          {{"issued", r.repositions.issued},
           {"stays", r.repositions.stays},
           {"completed", r.repositions.completed},
           {"interrupted", r.repositions.interrupted},
           {"voided", r.repositions.voided},
           {"cruises", r.repositions.cruises}}},
         {"metrics", std::move(metrics)},
         {"logs", std::move(logs)}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

std::vector<DriverLog> load_episode_logs(const std::string& path) {
  std::ifstream in = open_in(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed episode summary " + path);
  if (!j.contains("logs")) throw DataError(path + ": no driver logs");
  std::vector<DriverLog> out;
  try {
    for (const json& l : j.at("logs")) {
      DriverLog log;
      log.driver_id = l.at("driver_id").get<int>();
      log.managed = l.at("managed").get<bool>();
      for (const json& t : l.at("trips"))
        log.trips.push_back({t.at("at").get<double>(), t.at("price").get<double>()});
      for (const json& s : l.at("online_spans"))
        log.online_spans.push_back({s.at("begin").get<double>(), s.at("end").get<double>()});
      for (const json& s : l.at("serving_spans"))
        log.serving_spans.push_back({s.at("begin").get<double>(), s.at("end").get<double>()});
      out.push_back(std::move(log));
    }
  } catch (const json::exception& e) {
    throw DataError(path + ": bad driver log: " + e.what());
  }
  return out;
}

}  // namespace reposim
