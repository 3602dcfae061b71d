#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reposim {

// All timestamps are minutes since episode start.
struct Span {
  double begin = 0;
  double end = 0;
  double length() const { return end - begin; }
};

struct TripRecord {
  double completed_at = 0;
  double price = 0;
};

struct DriverLog {
  int driver_id = 0;
  bool managed = false;
  std::vector<TripRecord> trips;
  std::vector<Span> online_spans;
  std::vector<Span> serving_spans;
};

struct DriverMetrics {
  int driver_id = 0;
  bool managed = false;
  double income = 0;        // currency
  double online_min = 0;    // minutes
  double serving_min = 0;   // minutes
};

struct EpisodeMetrics {
  std::vector<DriverMetrics> drivers;
  std::vector<DriverMetrics> managed() const;
  std::vector<DriverMetrics> unmanaged() const;
};

// Evaluation window in minutes since episode start. Trips count toward
// income when they complete inside [begin, end); online/serving hours are
// clipped to the window by intersection.
struct Window {
  double begin = 0;
  double end = 0;
};

DriverMetrics summarize(const DriverLog& log, std::optional<Window> win = {});
EpisodeMetrics summarize_episode(const std::vector<DriverLog>& logs,
                                 std::optional<Window> win = {});

// Individual income per hour, c(x)/h(x). Throws UndefinedMetricError when
// the driver has no online time.
double iph_individual(const DriverMetrics& d);

// Group income per hour as a ratio of sums, not a mean of ratios.
double iph_group(const std::vector<DriverMetrics>& group);

// In-service fraction of online time for the group, in [0, 1].
double utilization(const std::vector<DriverMetrics>& group);

enum class GroupMetric { kIph, kUtilization };

struct BootstrapReport {
  std::string metric;
  double observed = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  int n_resamples = 0;
  uint64_t seed = 0;
  bool significant = false;
};

// Samples `n_resamples` control groups of size |experiment| with replacement
// from the pool, takes the empirical 2.5/97.5 percentiles of the group
// metric, and flags significance when the experiment's observed value falls
// outside that interval. Deterministic given the seed.
BootstrapReport bootstrap_compare(const std::vector<DriverMetrics>& experiment,
                                  const std::vector<DriverMetrics>& control_pool,
                                  GroupMetric metric, int n_resamples = 5000,
                                  uint64_t seed = 0);

std::string bootstrap_report_json(const BootstrapReport& r);

// Exact one-sided Wilcoxon signed-rank test of H1: x > y (paired). Ranks of
// |x-y| carry average ranks on ties; zero differences are dropped; the null
// distribution is enumerated over all sign assignments, so n must stay
// small (<= 20 pairs). Returns P(W+ >= observed) under the null.
double wilcoxon_signed_rank_one_sided_p(const std::vector<double>& x,
                                        const std::vector<double>& y);

}  // namespace reposim
