#include "reposim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "reposim/errors.hpp"
#include "reposim/rng.hpp"

namespace reposim {

namespace {

double clipped_minutes(const std::vector<Span>& spans, std::optional<Window> win) {
  double total = 0;
  for (const Span& s : spans) {
    double b = s.begin, e = s.end;
    if (win) {
      b = std::max(b, win->begin);
      e = std::min(e, win->end);
    }
    if (e > b) total += e - b;
  }
  return total;
}

double percentile(const std::vector<double>& sorted, double pct) {
  if (sorted.empty()) throw DataError("percentile of empty sample");
  double pos = pct / 100.0 * (static_cast<double>(sorted.size()) - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = static_cast<size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

double group_metric(const std::vector<const DriverMetrics*>& group, GroupMetric m) {
  double num = 0, den = 0;
  for (const DriverMetrics* d : group) {
    num += m == GroupMetric::kIph ? d->income : d->serving_min;
    den += d->online_min;
  }
  if (den <= 0) throw UndefinedMetricError("group has no online time");
  return m == GroupMetric::kIph ? num / (den / 60.0) : num / den;
}

}  // namespace

std::vector<DriverMetrics> EpisodeMetrics::managed() const {
  std::vector<DriverMetrics> out;
  for (const DriverMetrics& d : drivers)
    if (d.managed) out.push_back(d);
  return out;
}

std::vector<DriverMetrics> EpisodeMetrics::unmanaged() const {
  std::vector<DriverMetrics> out;
  for (const DriverMetrics& d : drivers)
    if (!d.managed) out.push_back(d);
  return out;
}

DriverMetrics summarize(const DriverLog& log, std::optional<Window> win) {
  DriverMetrics m;
  m.driver_id = log.driver_id;
  m.managed = log.managed;
  for (const TripRecord& t : log.trips) {
    if (win && (t.completed_at < win->begin || t.completed_at >= win->end)) continue;
    m.income += t.price;
  }
  m.online_min = clipped_minutes(log.online_spans, win);
  m.serving_min = clipped_minutes(log.serving_spans, win);
  return m;
}

EpisodeMetrics summarize_episode(const std::vector<DriverLog>& logs,
                                 std::optional<Window> win) {
  EpisodeMetrics em;
  em.drivers.reserve(logs.size());
  for (const DriverLog& l : logs) em.drivers.push_back(summarize(l, win));
  return em;
}

double iph_individual(const DriverMetrics& d) {
  if (d.online_min <= 0)
    throw UndefinedMetricError("driver " + std::to_string(d.driver_id) +
                               " has no online time");
  return d.income / (d.online_min / 60.0);
}

double iph_group(const std::vector<DriverMetrics>& group) {
  std::vector<const DriverMetrics*> ptrs;
  ptrs.reserve(group.size());
  for (const DriverMetrics& d : group) ptrs.push_back(&d);
  return group_metric(ptrs, GroupMetric::kIph);
}

double utilization(const std::vector<DriverMetrics>& group) {
  std::vector<const DriverMetrics*> ptrs;
  ptrs.reserve(group.size());
  for (const DriverMetrics& d : group) ptrs.push_back(&d);
  return group_metric(ptrs, GroupMetric::kUtilization);
}

BootstrapReport bootstrap_compare(const std::vector<DriverMetrics>& experiment,
                                  const std::vector<DriverMetrics>& control_pool,
                                  GroupMetric metric, int n_resamples,
                                  uint64_t seed) {
  if (control_pool.empty()) throw DataError("bootstrap control pool is empty");
  if (control_pool.size() < experiment.size())
    throw DataError("bootstrap control pool smaller than experiment group");
  if (experiment.empty()) throw DataError("bootstrap experiment group is empty");
  if (n_resamples < 2) throw DataError("need at least 2 resamples");

  BootstrapReport r;
  r.metric = metric == GroupMetric::kIph ? "group_iph" : "utilization";
  r.n_resamples = n_resamples;
  r.seed = seed;
  r.observed = metric == GroupMetric::kIph ? iph_group(experiment)
                                           : utilization(experiment);

  Rng rng(seed);
  std::uniform_int_distribution<size_t> pick(0, control_pool.size() - 1);
  std::vector<double> stats;
  stats.reserve(n_resamples);
  std::vector<const DriverMetrics*> sample(experiment.size());
  for (int i = 0; i < n_resamples; ++i) {
    for (size_t j = 0; j < experiment.size(); ++j)
      sample[j] = &control_pool[pick(rng)];
    stats.push_back(group_metric(sample, metric));
  }
  std::sort(stats.begin(), stats.end());
  r.ci_lo = percentile(stats, 2.5);
  r.ci_hi = percentile(stats, 97.5);
  r.significant = r.observed < r.ci_lo || r.observed > r.ci_hi;
  return r;
}

std::string bootstrap_report_json(const BootstrapReport& r) {
  nlohmann::json j;
  j["metric"] = r.metric;
  j["observed"] = r.observed;
  j["ci"] = {r.ci_lo, r.ci_hi};
  j["n_resamples"] = r.n_resamples;
  j["seed"] = r.seed;
  j["significant"] = r.significant;
  return j.dump(2);
}

double wilcoxon_signed_rank_one_sided_p(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("wilcoxon requires paired samples");
  std::vector<double> d;
  for (size_t i = 0; i < x.size(); ++i) {
    double diff = x[i] - y[i];
    if (diff != 0.0) d.push_back(diff);
  }
  size_t n = d.size();
  if (n == 0) return 1.0;
  if (n > 20) throw DataError("exact wilcoxon limited to 20 nonzero pairs");

  // average ranks of |d|
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n &&
           std::abs(d[order[j + 1]]) == std::abs(d[order[i]]))
      ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  double w_obs = 0;
  for (size_t k = 0; k < n; ++k)
    if (d[k] > 0) w_obs += rank[k];

  // exact null: all 2^n sign assignments equally likely
  uint64_t total = uint64_t{1} << n;
  uint64_t ge = 0;
  for (uint64_t mask = 0; mask < total; ++mask) {
    double w = 0;
    for (size_t k = 0; k < n; ++k)
      if (mask & (uint64_t{1} << k)) w += rank[k];
    if (w >= w_obs - 1e-12) ++ge;
  }
  return static_cast<double>(ge) / static_cast<double>(total);
}

}  // namespace reposim
