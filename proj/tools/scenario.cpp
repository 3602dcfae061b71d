#include "scenario.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "reposim/errors.hpp"

namespace reposim::cli {

LogLevel log_level() {
  static LogLevel level = [] {
    const char* v = std::getenv("REPOSIM_LOG");
    if (!v) return LogLevel::kInfo;
    std::string s(v);
    if (s == "quiet") return LogLevel::kQuiet;
    if (s == "warn") return LogLevel::kWarn;
    if (s == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

void log_warn(const std::string& msg) {
  if (log_level() >= LogLevel::kWarn) std::cerr << "[warn] " << msg << "\n";
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[debug] " << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << body;
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw DataError("cannot create directory " + path + ": " + ec.message());
}

Scenario load_scenario(const std::string& grid_path, const std::string& demand_path,
                       const std::string& cruising_path, double speed_m_per_min) {
  Scenario sc;
  sc.grid = std::make_unique<GridIndex>(GridIndex::load(grid_path));
  sc.tt = std::make_unique<TravelTimeModel>(sc.grid.get(), speed_m_per_min);
  sc.orders = load_trip_log(demand_path);
  if (!cruising_path.empty())
    sc.cruising = std::make_unique<CruisingModel>(CruisingModel::load_csv(cruising_path));
  log_debug("scenario: " + std::to_string(sc.grid->size()) + " cells, " +
            std::to_string(sc.orders.size()) + " orders");
  return sc;
}

PolicySpec parse_policy_spec(const std::string& token) {
  PolicySpec spec;
  spec.label = token;
  std::vector<std::string> parts;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty()) throw UsageError("empty policy spec");
  spec.kind = parts[0];
  if (spec.kind == "random" || spec.kind == "greedy" || spec.kind == "mab" ||
      spec.kind == "stay") {
    if (parts.size() > 1) throw UsageError("policy '" + spec.kind + "' takes no options");
    return spec;
  }
  if (spec.kind == "vps") {
    for (size_t i = 1; i < parts.size(); ++i) {
      if (parts[i] == "stochastic") {
        spec.stochastic = true;
      } else {
        try {
          spec.depth = std::stoi(parts[i]);
        } catch (const std::exception&) {
          throw UsageError("bad vps option '" + parts[i] + "'");
        }
        if (spec.depth < 1) throw UsageError("vps depth must be >= 1");
      }
    }
    return spec;
  }
  if (spec.kind == "sarsa") {
    for (size_t i = 1; i < parts.size(); ++i) {
      if (parts[i] == "sdreg")
        spec.sd_reg = true;
      else
        throw UsageError("bad sarsa option '" + parts[i] + "'");
    }
    return spec;
  }
  throw UsageError("unknown policy '" + spec.kind +
                   "' (expected random|greedy|mab|stay|vps[:depth][:stochastic]|sarsa[:sdreg])");
}

PlannerConfig planner_config_for(const SimConfig& cfg, int depth) {
  PlannerConfig p;
  p.depth = depth;
  p.gamma = cfg.gamma;
  p.stay_min = cfg.idle_threshold_min;
  p.cost_per_min = cfg.reposition_cost_per_min;
  return p;
}

PolicyBundle make_policy(const PolicySpec& spec, const Scenario& sc, const Artifacts& art,
                         const SimConfig& cfg, const PlannerConfig& pcfg) {
  PolicyBundle b;
  if (spec.kind == "random") {
    b.policy = std::make_unique<RandomRepositionPolicy>();
    return b;
  }
  if (spec.kind == "stay") {
    b.policy = std::make_unique<StayPolicy>();
    return b;
  }
  if (spec.kind == "mab") {
    b.policy = std::make_unique<MabRepositionPolicy>();
    return b;
  }
  if (spec.kind == "greedy") {
    if (!art.value_net) throw UsageError("policy 'greedy' needs --value-net");
    b.policy =
        std::make_unique<GreedyRepositionPolicy>(sc.tt.get(), art.value_net.get(), pcfg);
    return b;
  }
  if (spec.kind == "vps") {
    if (!art.value_net) throw UsageError("policy 'vps' needs --value-net");
    if (art.dispatch)
      b.pd = std::make_unique<ClassifierDispatchProb>(art.dispatch.get(), cfg.day_of_week,
                                                      int64_t{0});
    else
      b.pd = std::make_unique<ConstDispatchProb>(art.const_pd);
    auto vps = std::make_unique<VpsRepositionPolicy>(sc.grid.get(), sc.tt.get(),
                                                     art.value_net.get(), b.pd.get(), pcfg,
                                                     spec.stochastic);
    if (art.ls_table) vps->set_long_search_table(art.ls_table.get());
    b.policy = std::move(vps);
    return b;
  }
  if (spec.kind == "sarsa") {
    if (!art.qnet) throw UsageError("policy 'sarsa' needs --qnet");
    b.policy = std::make_unique<QnetRepositionPolicy>(art.qnet.get(), spec.sd_reg);
    return b;
  }
  throw UsageError("unknown policy '" + spec.kind + "'");
}

}  // namespace reposim::cli
