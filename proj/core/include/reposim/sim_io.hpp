#pragma once

#include <string>
#include <vector>

#include "reposim/demand.hpp"
#include "reposim/simulator.hpp"
#include "reposim/valuenet.hpp"

namespace reposim {

// JSONL streams for the episode artifacts: one record per line, so runs can
// be concatenated and trainers can stream them back. Loaders throw DataError
// with the offending line number.
void save_transitions(const std::string& path, const std::vector<TransitionRecord>& recs);
std::vector<TransitionRecord> load_transitions(const std::string& path);

void save_sarsa_samples(const std::string& path, const std::vector<SarsaSample>& samples);
std::vector<SarsaSample> load_sarsa_samples(const std::string& path);

void save_driver_events(const std::string& path, const std::vector<DriverEvent>& events);
std::vector<DriverEvent> load_driver_events(const std::string& path);

void save_sd_snapshots(const std::string& path, const std::vector<SdSnapshot>& snaps);
std::vector<SdSnapshot> load_sd_snapshots(const std::string& path);

// Value-net training rows from logged transitions: the cell becomes axial
// coordinates, the timestamp becomes the uncapped minute clock.
std::vector<VnSample> to_vn_samples(const std::vector<TransitionRecord>& recs,
                                    const GridIndex& grid, double start_minute_of_day);

// Config round trips, so every artifact can embed the resolved settings.
std::string sim_config_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const std::string& text);
std::string demand_config_json(const DemandConfig& cfg);
DemandConfig demand_config_from_json(const std::string& text);

// One-file episode summary: order/reposition counts, per-driver metrics and
// logs, and the resolved config + seed that produced them.
void save_episode_summary(const std::string& path, const EpisodeResult& r, const SimConfig& cfg);

// Driver logs back out of a saved summary, for offline re-evaluation.
std::vector<DriverLog> load_episode_logs(const std::string& path);

}  // namespace reposim
