#include "reposim/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "reposim/dispatch_model.hpp"
#include "reposim/errors.hpp"
#include "reposim/nn.hpp"

namespace reposim {

using nlohmann::json;

double ClassifierDispatchProb::at(CellId cell, double minute) const {
  double m = std::fmod(minute, 1440.0);
  if (m < 0) m += 1440.0;
  return clf_->predict({cell, m, dow_, driver_});
}

namespace {

StateKey cell_key(const GridIndex& grid, CellId id, double minute) {
  const AxialCoord& a = grid.cell(id).axial;
  return {a.q, a.r, minute};
}

}  // namespace

VpsPlanner::VpsPlanner(const GridIndex* grid, const TravelTimeModel* tt,
                       const ValueSource* values, const DispatchProbSource* dispatch_prob,
                       PlannerConfig cfg)
    : grid_(grid), tt_(tt), values_(values), pd_(dispatch_prob), cfg_(cfg) {
  if (cfg_.depth < 1) throw DataError("planner expansion depth must be >= 1");
}

double VpsPlanner::leg_eta(CellId from, CellId to) const {
  if (from == to) return cfg_.stay_min;
  return tt_->eta_min(grid_->representative_point(from), grid_->representative_point(to));
}

std::vector<PathCandidate> VpsPlanner::generate_paths(CellId origin, int depth) const {
  if (depth < 1) throw DataError("expansion depth must be >= 1");
  grid_->cell(origin);  // id check

  // Fallback test: can the driver reach any valid cell besides sitting still?
  bool movable = false;
  for (CellId c : grid_->cells_within(origin, depth))
    if (c != origin && grid_->is_valid(c)) movable = true;

  std::vector<PathCandidate> out;
  if (!movable) {
    std::vector<CellId> escape = grid_->nearest_valid(origin);
    if (escape.empty()) {
      if (!grid_->is_valid(origin))
        throw LookupError("no valid cell reachable from cell " + std::to_string(origin));
      // the origin is the only valid cell in the city: staying is all there is
      PathCandidate stay;
      stay.cells.assign(static_cast<size_t>(depth) + 1, origin);
      stay.leg_cost.assign(depth, 0.0);
      stay.eta_min.resize(depth);
      for (int j = 0; j < depth; ++j) stay.eta_min[j] = cfg_.stay_min * (j + 1);
      out.push_back(std::move(stay));
      return out;
    }
    for (CellId c : escape) {
      PathCandidate p;
      double eta = leg_eta(origin, c);
      p.cells = {origin, c};
      p.leg_cost = {-cfg_.cost_per_min * eta};
      p.eta_min = {eta};
      out.push_back(std::move(p));
    }
    return out;
  }

  // Depth-first over stay + valid neighbors, stay slot first, preserving the
  // fixed direction order; every path is extendable so all reach full depth.
  PathCandidate seed;
  seed.cells = {origin};
  std::vector<PathCandidate> frontier{std::move(seed)};
  for (int level = 0; level < depth; ++level) {
    std::vector<PathCandidate> next;
    for (const PathCandidate& p : frontier) {
      CellId here = p.cells.back();
      double t_here = p.eta_min.empty() ? 0.0 : p.eta_min.back();
      std::vector<CellId> options;
      if (grid_->is_valid(here)) options.push_back(here);
      for (CellId nb : grid_->neighbors(here)) options.push_back(nb);
      for (CellId dest : options) {
        PathCandidate q = p;
        double eta = leg_eta(here, dest);
        q.cells.push_back(dest);
        q.leg_cost.push_back(dest == here ? 0.0 : -cfg_.cost_per_min * eta);
        q.eta_min.push_back(t_here + eta);
        next.push_back(std::move(q));
      }
    }
    frontier = std::move(next);
  }
  return frontier;
}

double VpsPlanner::path_value(const PathCandidate& path, double minute) const {
  int m = path.steps();
  if (m < 1) throw DataError("path must have at least one leg");
  double val = 0;
  for (int j = m; j >= 1; --j) {
    double t_prev = j >= 2 ? path.eta_min[j - 2] : 0.0;
    double dt = path.eta_min[j - 1] - t_prev;
    double dr = std::pow(cfg_.gamma, t_prev) *
                discounted_reward_cont(path.leg_cost[j - 1], dt, cfg_.gamma);
    StateKey s = cell_key(*grid_, path.cells[j], minute);
    double t = path.eta_min[j - 1];
    if (j == m) {
      val = dr + values_->value(s, t);
    } else {
      double pd = pd_->at(path.cells[j], minute + t);
      val = dr + pd * values_->conditional_value(s, t) + (1.0 - pd) * val;
    }
  }
  return val;
}

void VpsPlanner::value_paths(std::vector<PathCandidate>& paths, double minute) const {
  // phase 2 of the planner: one deduplicated batch per network head
  using Key = std::pair<CellId, double>;
  std::map<Key, int> v_idx, c_idx, p_idx;
  std::vector<std::pair<StateKey, double>> v_q, c_q;
  std::vector<Key> p_q;

  auto intern_value = [&](CellId cell, double t) {
    auto [it, fresh] = v_idx.try_emplace({cell, t}, static_cast<int>(v_q.size()));
    if (fresh) v_q.emplace_back(cell_key(*grid_, cell, minute), t);
    return it->second;
  };
  auto intern_cond = [&](CellId cell, double t) {
    auto [it, fresh] = c_idx.try_emplace({cell, t}, static_cast<int>(c_q.size()));
    if (fresh) c_q.emplace_back(cell_key(*grid_, cell, minute), t);
    return it->second;
  };
  auto intern_pd = [&](CellId cell, double t) {
    auto [it, fresh] = p_idx.try_emplace({cell, t}, static_cast<int>(p_q.size()));
    if (fresh) p_q.push_back({cell, t});
    return it->second;
  };

  for (const PathCandidate& p : paths) {
    int m = p.steps();
    for (int j = 1; j <= m; ++j) {
      CellId cell = p.cells[j];
      double t = p.eta_min[j - 1];
      if (j == m) {
        intern_value(cell, t);
      } else {
        intern_cond(cell, t);
        intern_pd(cell, t);
      }
    }
  }

  std::vector<double> v_out(v_q.size()), c_out(c_q.size()), p_out(p_q.size());
  if (!v_q.empty()) values_->value_many(v_q, v_out.data());
  if (!c_q.empty()) values_->conditional_many(c_q, c_out.data());
  for (size_t i = 0; i < p_q.size(); ++i) p_out[i] = pd_->at(p_q[i].first, minute + p_q[i].second);

  for (PathCandidate& p : paths) {
    int m = p.steps();
    double val = 0;
    for (int j = m; j >= 1; --j) {
      double t_prev = j >= 2 ? p.eta_min[j - 2] : 0.0;
      double dt = p.eta_min[j - 1] - t_prev;
      double dr = std::pow(cfg_.gamma, t_prev) *
                  discounted_reward_cont(p.leg_cost[j - 1], dt, cfg_.gamma);
      CellId cell = p.cells[j];
      double t = p.eta_min[j - 1];
      if (j == m) {
        val = dr + v_out[intern_value(cell, t)];
      } else {
        double pd = p_out[intern_pd(cell, t)];
        val = dr + pd * c_out[intern_cond(cell, t)] + (1.0 - pd) * val;
      }
    }
    p.value = val;
  }
}

std::vector<std::pair<CellId, double>> VpsPlanner::first_step_values(CellId origin,
                                                                     double minute) const {
  std::vector<PathCandidate> paths = generate_paths(origin, cfg_.depth);
  value_paths(paths, minute);
  std::map<CellId, double> best;
  for (const PathCandidate& p : paths) {
    auto [it, fresh] = best.try_emplace(p.first_step(), p.value);
    if (!fresh && p.value > it->second) it->second = p.value;
  }
  return {best.begin(), best.end()};
}

CellId VpsPlanner::select_action(CellId origin, double minute) const {
  auto q = first_step_values(origin, minute);
  CellId pick = q.front().first;
  double top = q.front().second;
  for (const auto& [cell, val] : q) {
    if (val > top) {
      top = val;
      pick = cell;
    }
  }
  return pick;  // map order is ascending cell id, so ties keep the lowest
}

CellId VpsPlanner::select_action_stochastic(CellId origin, double minute, Rng& rng) const {
  auto q = first_step_values(origin, minute);
  Eigen::VectorXd z(q.size());
  for (size_t i = 0; i < q.size(); ++i) z[static_cast<int>(i)] = q[i].second;
  return q[nn::softmax_sample(z, rng)].first;
}

RepositionTarget VpsPlanner::long_search(CellId cell, LatLon pos, double minute) const {
  if (table_) {
    auto hit = table_->query(pos, minute, *tt_, cfg_.lambda);
    if (hit) return {hit->cell, hit->point, true};
  }
  CellId dest = select_action(cell, minute);
  return {dest, grid_->representative_point(dest), false};
}

int LongSearchTable::interval_of(double minute) const {
  double m = std::fmod(minute, 1440.0);
  if (m < 0) m += 1440.0;
  int idx = static_cast<int>(m / bin_min_);
  return std::min(idx, num_intervals() - 1);
}

const std::vector<LongSearchEntry>& LongSearchTable::interval(int idx) const {
  if (idx < 0 || idx >= num_intervals()) throw LookupError("long-search interval out of range");
  return intervals_[idx];
}

std::optional<LongSearchEntry> LongSearchTable::query(LatLon from, double minute,
                                                      const TravelTimeModel& tt,
                                                      double lambda) const {
  if (intervals_.empty()) return std::nullopt;
  const auto& entries = intervals_[interval_of(minute)];
  std::optional<LongSearchEntry> best;
  double best_score = 0;
  for (const LongSearchEntry& e : entries) {
    double tau = tt.eta_min(from, e.point);
    double score = std::pow(lambda, tau / 10.0) * e.value;
    if (!best || score > best_score ||
        (score == best_score && e.cell < best->cell)) {
      best = e;
      best_score = score;
    }
  }
  return best;
}

void LongSearchTable::save(const std::string& path) const {
  json j;
  j["type"] = "long_search_table";
  j["bin_min"] = bin_min_;
  json iv = json::array();
  for (const auto& entries : intervals_) {
    json arr = json::array();
    for (const LongSearchEntry& e : entries)
      arr.push_back({e.cell, {e.point.lat, e.point.lon}, e.value});
    iv.push_back(std::move(arr));
  }
  j["intervals"] = std::move(iv);
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << '\n';
}

LongSearchTable LongSearchTable::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  json j = json::parse(f);
  if (j.value("type", "") != "long_search_table")
    throw DataError(path + " is not a long-search table file");
  LongSearchTable t;
  t.bin_min_ = j.at("bin_min").get<double>();
  for (const json& arr : j.at("intervals")) {
    std::vector<LongSearchEntry> entries;
    for (const json& e : arr) {
      LongSearchEntry le;
      le.cell = e.at(0).get<CellId>();
      le.point = {e.at(1).at(0).get<double>(), e.at(1).at(1).get<double>()};
      le.value = e.at(2).get<double>();
      entries.push_back(le);
    }
    t.intervals_.push_back(std::move(entries));
  }
  return t;
}

LongSearchTable build_long_search_table(const ValueSource& values, const GridIndex& grid,
                                        const PlannerConfig& cfg) {
  if (cfg.table_bin_min <= 0 || cfg.table_size < 1)
    throw DataError("long-search table needs a positive bin and size");
  LongSearchTable t;
  t.bin_min_ = cfg.table_bin_min;
  int n_intervals = static_cast<int>(std::ceil(1440.0 / cfg.table_bin_min));
  t.intervals_.resize(n_intervals);

  std::vector<CellId> valid;
  for (const HexCell& c : grid.cells())
    if (c.valid) valid.push_back(c.id);

  // value per (interval, cell): V averaged at the interval's quarter points,
  // one batched evaluation for the whole table
  std::vector<std::pair<StateKey, double>> queries;
  queries.reserve(2 * valid.size() * n_intervals);
  for (int i = 0; i < n_intervals; ++i) {
    double start = i * cfg.table_bin_min;
    for (CellId c : valid) {
      const AxialCoord& a = grid.cell(c).axial;
      queries.emplace_back(StateKey{a.q, a.r, start + 0.25 * cfg.table_bin_min}, 0.0);
      queries.emplace_back(StateKey{a.q, a.r, start + 0.75 * cfg.table_bin_min}, 0.0);
    }
  }
  std::vector<double> out(queries.size());
  if (!queries.empty()) values.value_many(queries, out.data());

  size_t k = 0;
  for (int i = 0; i < n_intervals; ++i) {
    std::vector<LongSearchEntry> entries;
    entries.reserve(valid.size());
    for (CellId c : valid) {
      double v = 0.5 * (out[k] + out[k + 1]);
      k += 2;
      entries.push_back({c, grid.representative_point(c), v});
    }
    std::sort(entries.begin(), entries.end(), [](const LongSearchEntry& a, const LongSearchEntry& b) {
      return a.value != b.value ? a.value > b.value : a.cell < b.cell;
    });
    if (static_cast<int>(entries.size()) > cfg.table_size) entries.resize(cfg.table_size);
    t.intervals_[i] = std::move(entries);
  }
  return t;
}

}  // namespace reposim
