#include "reposim/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "reposim/errors.hpp"

namespace reposim {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& path, size_t lineno) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (used != s.size()) throw DataError("");
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
  }
}

int64_t parse_int(const std::string& s, const std::string& path, size_t lineno) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw DataError("");
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
  }
}

}  // namespace

std::vector<TripOrder> load_trip_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trip log " + path);
  std::string line;
  size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  ++lineno;
  if (line.rfind("order_id,", 0) != 0)
    throw DataError(path + ":1: expected header starting with order_id,");

  std::vector<TripOrder> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 8)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 8 fields, got " +
                      std::to_string(f.size()));
    TripOrder o;
    o.id = parse_int(f[0], path, lineno);
    o.request_s = parse_double(f[1], path, lineno);
    o.origin = {parse_double(f[2], path, lineno), parse_double(f[3], path, lineno)};
    o.destination = {parse_double(f[4], path, lineno), parse_double(f[5], path, lineno)};
    o.price = parse_double(f[6], path, lineno);
    o.trip_duration_min = parse_double(f[7], path, lineno);
    if (o.price <= 0)
      throw DataError(path + ":" + std::to_string(lineno) + ": price must be positive");
    if (o.trip_duration_min <= 0)
      throw DataError(path + ":" + std::to_string(lineno) + ": duration must be positive");
    if (o.request_s < 0)
      throw DataError(path + ":" + std::to_string(lineno) + ": negative request time");
    out.push_back(o);
  }
  std::stable_sort(out.begin(), out.end(), [](const TripOrder& a, const TripOrder& b) {
    return a.request_s != b.request_s ? a.request_s < b.request_s : a.id < b.id;
  });
  return out;
}

void save_trip_log(const std::string& path, const std::vector<TripOrder>& orders) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trip log " + path);
  out << "order_id,request_ts,origin_lat,origin_lon,dest_lat,dest_lon,price,duration_min\n";
  out << std::setprecision(17);
  for (const TripOrder& o : orders)
    out << o.id << ',' << o.request_s << ',' << o.origin.lat << ',' << o.origin.lon << ','
        << o.destination.lat << ',' << o.destination.lon << ',' << o.price << ','
        << o.trip_duration_min << '\n';
}

std::vector<TripOrder> generate_demand(const GridIndex& grid, const DemandConfig& cfg,
                                       uint64_t seed) {
  if (cfg.horizon_s <= 0) throw DataError("demand horizon must be positive");
  if (!cfg.hour_profile.empty() && cfg.hour_profile.size() != 24)
    throw DataError("hour profile needs 24 entries");
  if (cfg.price_jitter < 0 || cfg.price_jitter >= 1)
    throw DataError("price jitter must be in [0, 1)");

  std::vector<CellId> valid;
  for (const HexCell& c : grid.cells())
    if (c.valid) valid.push_back(c.id);
  if (valid.empty()) throw DataError("grid has no valid cells");

  std::vector<double> dest_w;
  for (CellId c : valid) {
    auto it = cfg.dest_weight.find(c);
    dest_w.push_back(it == cfg.dest_weight.end() ? 1.0 : it->second);
  }

  Rng rng(seed);
  std::discrete_distribution<int> pick_dest(dest_w.begin(), dest_w.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Projection& proj = grid.projection();
  auto jitter = [&](LatLon base) {
    double ang = 2.0 * M_PI * unit(rng);
    double rad = cfg.origin_jitter_m * std::sqrt(unit(rng));
    double x, y;
    proj.to_local(base, x, y);
    LatLon p = proj.to_latlon(x + rad * std::cos(ang), y + rad * std::sin(ang));
    return grid.bbox().contains(p) ? p : base;
  };

  std::vector<TripOrder> out;
  for (CellId cell : valid) {
    auto wit = cfg.origin_weight.find(cell);
    double rate = cfg.base_rate_per_cell_hour *
                  (wit == cfg.origin_weight.end() ? 1.0 : wit->second);
    if (rate <= 0) continue;
    for (double chunk = 0; chunk < cfg.horizon_s; chunk += 3600.0) {
      double len_s = std::min(3600.0, cfg.horizon_s - chunk);
      int hour = static_cast<int>(
                     std::fmod(cfg.start_minute_of_day * 60.0 + chunk, 86400.0) / 3600.0) %
                 24;
      double mult = cfg.hour_profile.empty() ? 1.0 : cfg.hour_profile[hour];
      double lambda = rate * mult * len_s / 3600.0;
      if (lambda <= 0) continue;
      std::poisson_distribution<int> count(lambda);
      int n = count(rng);
      for (int i = 0; i < n; ++i) {
        TripOrder o;
        o.request_s = chunk + len_s * unit(rng);
        o.origin = jitter(grid.representative_point(cell));
        CellId dest = valid[static_cast<size_t>(pick_dest(rng))];
        o.destination = jitter(grid.representative_point(dest));
        double dist = proj.distance_m(o.origin, o.destination);
        o.trip_duration_min = std::max(cfg.min_trip_min, dist / cfg.trip_speed_m_per_min);
        o.price = cfg.price_per_min * o.trip_duration_min *
                  (1.0 + cfg.price_jitter * (2.0 * unit(rng) - 1.0));
        out.push_back(o);
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TripOrder& a, const TripOrder& b) {
    return a.request_s < b.request_s;
  });
  for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int64_t>(i);
  return out;
}

void CruisingModel::set_row(int hour, CellId origin,
                            const std::vector<std::pair<CellId, double>>& row) {
  if (hour < 0 || hour > 23) throw DataError("cruising row hour out of range");
  double sum = 0;
  for (const auto& [cell, p] : row) {
    if (p < 0) throw DataError("cruising probability must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("cruising row (" + std::to_string(hour) + ", " + std::to_string(origin) +
                    ") sums to " + std::to_string(sum));
  rows_[{hour, origin}] = row;
}

bool CruisingModel::has_row(int hour, CellId origin) const {
  return rows_.count({hour, origin}) > 0;
}

CellId CruisingModel::sample(int hour, CellId origin, Rng& rng) const {
  auto it = rows_.find({hour, origin});
  if (it == rows_.end()) return origin;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double acc = 0;
  for (const auto& [cell, p] : it->second) {
    acc += p;
    if (u < acc) return cell;
  }
  return it->second.back().first;  // rounding tail
}

CruisingModel CruisingModel::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cruising table " + path);
  std::string line;
  size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  ++lineno;
  if (line.rfind("hour,", 0) != 0)
    throw DataError(path + ":1: expected header starting with hour,");

  std::map<std::pair<int, CellId>, std::vector<std::pair<CellId, double>>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 4)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    int hour = static_cast<int>(parse_int(f[0], path, lineno));
    CellId origin = static_cast<CellId>(parse_int(f[1], path, lineno));
    CellId dest = static_cast<CellId>(parse_int(f[2], path, lineno));
    double p = parse_double(f[3], path, lineno);
    rows[{hour, origin}].push_back({dest, p});
  }
  CruisingModel m;
  for (const auto& [key, row] : rows) m.set_row(key.first, key.second, row);
  return m;
}

void CruisingModel::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write cruising table " + path);
  out << "hour,origin_cell,dest_cell,prob\n";
  out << std::setprecision(17);
  for (const auto& [key, row] : rows_)
    for (const auto& [dest, p] : row)
      out << key.first << ',' << key.second << ',' << dest << ',' << p << '\n';
}

CellId idle_cruise_step(const CruisingModel& model, CellId cell, int hour, Rng& rng) {
  int h = ((hour % 24) + 24) % 24;
  return model.sample(h, cell, rng);
}

}  // namespace reposim
