#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "intman/learning.hpp"
#include "intman/policies.hpp"
#include "intman/scenario.hpp"
#include "intman/stats.hpp"
#include "intman/stream.hpp"

namespace intman {

/// Named policy constructor: fcfs, ttr, pdt, cdt, ocp, bestseq, random,
/// neural:<file>. Each call builds a fresh instance.
struct PolicySpec {
  std::string label;
  std::function<std::unique_ptr<PrecedencePolicy>()> make;
};
PolicySpec parse_policy(const std::string& spec, const Scenario& scenario);
PolicySpec neural_policy_spec(const std::string& label, const Mlp& net, const Scenario& scenario);

/// Feature scaling bounds for a scenario.
FeatureScaler scenario_scaler(const Scenario& s);

/// Metrics of one policy on one stream.
struct RunMetrics {
  std::string policy;
  unsigned long long seed = 0;
  double rate = 0.0;
  std::size_t robots = 0;  ///< robots counted after the transient cutoff
  double objective = 0.0;  ///< sum of r_i (x(t^A + T_h) - x(t^A))
  double weighted_ttc = 0.0;  ///< priority-weighted mean of t^X - t^A
  double throughput = 0.0;  ///< robots per second from first arrival to last exit
  std::size_t violations = 0;
  Summary tick_us;  ///< sequential optimization wall clock per tick
  double solve_us_per_robot = 0.0;
};

/// Metrics of a finished log; robots whose tentative arrival precedes the
/// cutoff are excluded from objective and TTC.
RunMetrics run_metrics(const SimulationLog& log, const Scenario& s);

struct RunOutput {
  SimulationLog log;
  RunMetrics metrics;
};

/// One stream under one policy, with the safety audit. Throws
/// std::runtime_error on any violation.
RunOutput run_once(const Scenario& s, unsigned long long seed, PrecedencePolicy& policy,
                   StreamObserver* observer = nullptr);

/// E and B style relative difference in percent: (ref - p) / p * 100.
double relative_gain(double reference, double value);

struct PolicySummary {
  std::string policy;
  double rate = 0.0;
  std::size_t streams = 0;
  double J_bar = 0.0;  ///< mean objective over streams
  double J_hat = 0.0;  ///< mean weighted TTC over streams
  double E = 0.0;  ///< vs reference policy, percent
  double B = 0.0;
  double throughput = 0.0;
  Summary tick_us;
};

struct MetricsReport {
  std::string reference;
  std::vector<RunMetrics> runs;
  std::vector<PolicySummary> summary;
};

/// Summaries per (policy, rate) with E and B against `reference`. Throws if
/// the compared runs do not share the same stream seeds.
std::vector<PolicySummary> summarize_runs(const std::vector<RunMetrics>& runs,
                                          const std::string& reference);

/// Every policy on every (rate, seed); an empty rate list runs the scenario
/// as configured. Runs execute on `jobs` threads; results are ordered.
MetricsReport evaluate(const std::vector<PolicySpec>& policies, const Scenario& s,
                       const std::vector<double>& rates,
                       const std::vector<unsigned long long>& seeds,
                       const std::string& reference, int jobs = 1);

void write_runs_csv(std::ostream& os, const std::vector<RunMetrics>& runs);
void write_summary_csv(std::ostream& os, const std::vector<PolicySummary>& rows);

/// Coordination instances seen at ticks of streams run under `policy`,
/// keeping those with min_pending..max_pending robots, at most
/// `per_size` of each size.
std::vector<CoordinationInstance> harvest_instances(const Scenario& s, PrecedencePolicy& policy,
                                                    const std::vector<unsigned long long>& seeds,
                                                    std::size_t min_pending,
                                                    std::size_t max_pending,
                                                    std::size_t per_size);

struct OptGapEntry {
  std::size_t pending = 0;
  double best_sequence = 0.0;
  double combined = 0.0;
  double gap = 0.0;  ///< percent
  double bs_us = 0.0;
  double co_us = 0.0;
};

struct OptGapRow {
  std::size_t pending = 0;
  std::size_t instances = 0;
  double avg_gap = 0.0;
  double p90_gap = 0.0;
  double bs_us_per_robot = 0.0;
  double co_us_per_robot = 0.0;
};

/// BESTSEQ against the combined toy oracle on harvested instances.
/// Instances whose oracle state space exceeds the cap are left out and
/// counted in `skipped` when given.
std::vector<OptGapEntry> optgap_entries(const std::vector<CoordinationInstance>& instances,
                                        const CombinedOracleOptions& opts = {},
                                        std::size_t* skipped = nullptr);
std::vector<OptGapRow> optgap_table(const std::vector<OptGapEntry>& entries);
void write_optgap_csv(std::ostream& os, const std::vector<OptGapRow>& rows);

struct TimingEntry {
  std::size_t pending = 0;
  double sequential_us_per_robot = 0.0;
  double bestseq_us = 0.0;
  std::size_t orders = 0;
};

/// Wall clock of sequential optimization (arrival-order precedence) and of
/// BESTSEQ on each instance; the fastest of `repeats` sequential runs is kept.
std::vector<TimingEntry> timing_study(const std::vector<CoordinationInstance>& instances,
                                      bool with_bestseq, int repeats = 3);
void write_timing_csv(std::ostream& os, const std::vector<TimingEntry>& rows);

struct SweepRow {
  double buffer = 0.0;
  double length = 0.0;
  double throughput = 0.0;  ///< mean over seeds
  std::vector<double> per_seed;
};

/// Throughput for each buffer value with paired seeds.
std::vector<SweepRow> buffer_sweep(const Scenario& s, const std::vector<double>& buffers,
                                   const PolicySpec& policy,
                                   const std::vector<unsigned long long>& seeds, int jobs = 1);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct CollectOptions {
  std::size_t phases = 2000;  ///< coordination ticks to record
  LearnerConfig learner;
  TrainerConfig trainer;
  unsigned long long seed = 1;  ///< stream seeds, noise and initialization
};

/// Replay buffer from consecutive streams under the exploring learner.
ReplayBuffer collect_buffer(const Scenario& s, const CollectOptions& opts);

/// Learner settings implied by a scenario (T_r, r_bar, slots).
LearnerConfig scenario_learner(const Scenario& s);
TrainerConfig scenario_trainer(const Scenario& s);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace intman
