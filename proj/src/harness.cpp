#include "intman/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "intman/errors.hpp"

namespace intman {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

FeatureScaler scenario_scaler(const Scenario& s) {
  return FeatureScaler::for_scenario(s.geometry(), s.max_priority(), s.u_max, s.T_h,
                                     apply_adaptations(s, s.max_speed()).length);
}

PolicySpec neural_policy_spec(const std::string& label, const Mlp& net, const Scenario& scenario) {
  const FeatureScaler scaler = scenario_scaler(scenario);
  return {label, [net, scaler, label] { return std::make_unique<NeuralPolicy>(net, scaler, label); }};
}

PolicySpec parse_policy(const std::string& spec, const Scenario& scenario) {
  if (spec == "fcfs") return {spec, [] { return std::make_unique<FcfsPolicy>(); }};
  if (spec == "ttr") return {spec, [] { return std::make_unique<HeuristicPolicy>(HeuristicKind::TTR); }};
  if (spec == "pdt") return {spec, [] { return std::make_unique<HeuristicPolicy>(HeuristicKind::PDT); }};
  if (spec == "cdt") return {spec, [] { return std::make_unique<HeuristicPolicy>(HeuristicKind::CDT); }};
  if (spec == "arrival")
    return {spec, [] { return std::make_unique<HeuristicPolicy>(HeuristicKind::FcfsOrder); }};
  // The ordering rule is an approximation, and reports say so.
  if (spec == "ocp") return {"ocp-approx", [] { return std::make_unique<OcpPolicy>(); }};
  if (spec == "bestseq") return {spec, [] { return std::make_unique<BestSeqPolicy>(); }};
  if (spec == "random") return {spec, [] { return std::make_unique<RandomPolicy>(); }};
  if (spec.rfind("neural:", 0) == 0) {
    const std::string path = spec.substr(7);
    return neural_policy_spec("neural", Mlp::load_file(path), scenario);
  }
  throw InputError("unknown policy '" + spec + "'");
}

RunMetrics run_metrics(const SimulationLog& log, const Scenario& s) {
  RunMetrics m;
  m.policy = log.policy;
  double wsum = 0.0, wttc = 0.0;
  double first_arrival = kForever, last_exit = -kForever;
  std::size_t exited = 0;
  for (const RobotRecord& r : log.robots) {
    first_arrival = std::min(first_arrival, r.robot.arrival_time);
    if (r.robot.exit_time) {
      last_exit = std::max(last_exit, *r.robot.exit_time);
      ++exited;
    }
    if (r.tentative_time < s.transient_cutoff) continue;
    const double tA = r.robot.arrival_time;
    ++m.robots;
    m.objective += r.robot.priority * (r.trajectory.state_at(tA + s.T_h).x - r.trajectory.x.front());
    if (r.robot.exit_time) {
      wsum += r.robot.priority;
      wttc += r.robot.priority * (*r.robot.exit_time - tA);
    }
  }
  m.weighted_ttc = wsum > 0 ? wttc / wsum : 0.0;
  m.throughput = exited > 0 && last_exit > first_arrival
                     ? static_cast<double>(exited) / (last_exit - first_arrival)
                     : 0.0;
  std::vector<double> ticks;
  double total_us = 0.0;
  std::size_t planned = 0;
  for (const TickTiming& t : log.timings) {
    ticks.push_back(t.sequential_us);
    total_us += t.sequential_us;
    planned += t.pending;
  }
  m.tick_us = summarize(ticks);
  m.solve_us_per_robot = planned ? total_us / static_cast<double>(planned) : 0.0;
  return m;
}

RunOutput run_once(const Scenario& s, unsigned long long seed, PrecedencePolicy& policy,
                   StreamObserver* observer) {
  policy.reset(seed);
  const StreamConfig cfg = stream_config(s, seed);
  RunOutput out;
  out.log = run_stream(cfg, policy, observer);
  const auto violations = audit_safety(out.log, *cfg.geometry);
  out.metrics = run_metrics(out.log, s);
  out.metrics.seed = seed;
  out.metrics.rate = s.rate_mode == RateMode::Static && s.lane_rates.size() == 1 ? s.lane_rates[0] : -1.0;
  out.metrics.violations = violations.size();
  if (!violations.empty())
    throw std::runtime_error("safety audit failed for policy " + policy.name() + " seed " +
                             std::to_string(seed) + ": " + violations.front());
  return out;
}

double relative_gain(double reference, double value) {
  if (value == 0.0) return reference == 0.0 ? 0.0 : kForever;
  return (reference - value) / value * 100.0;
}

std::vector<PolicySummary> summarize_runs(const std::vector<RunMetrics>& runs,
                                          const std::string& reference) {
  std::map<std::pair<double, std::string>, std::vector<const RunMetrics*>> groups;
  std::vector<std::pair<double, std::string>> order;
  for (const RunMetrics& r : runs) {
    auto key = std::make_pair(r.rate, r.policy);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  auto seeds_of = [](const std::vector<const RunMetrics*>& g) {
    std::multiset<unsigned long long> s;
    for (const RunMetrics* r : g) s.insert(r->seed);
    return s;
  };
  std::vector<PolicySummary> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    PolicySummary p;
    p.policy = key.second;
    p.rate = key.first;
    p.streams = g.size();
    std::vector<double> ticks;
    for (const RunMetrics* r : g) {
      p.J_bar += r->objective;
      p.J_hat += r->weighted_ttc;
      p.throughput += r->throughput;
      ticks.push_back(r->tick_us.mean);
    }
    p.J_bar /= static_cast<double>(g.size());
    p.J_hat /= static_cast<double>(g.size());
    p.throughput /= static_cast<double>(g.size());
    p.tick_us = summarize(ticks);
    auto ref = groups.find({key.first, reference});
    if (ref != groups.end()) {
      if (seeds_of(ref->second) != seeds_of(g))
        throw InputError("summarize_runs: " + p.policy + " and " + reference +
                         " were run on different stream seeds");
      double rj = 0.0, rt = 0.0;
      for (const RunMetrics* r : ref->second) {
        rj += r->objective;
        rt += r->weighted_ttc;
      }
      rj /= static_cast<double>(ref->second.size());
      rt /= static_cast<double>(ref->second.size());
      p.E = relative_gain(rj, p.J_bar);
      p.B = relative_gain(rt, p.J_hat);
    }
    out.push_back(p);
  }
  return out;
}

MetricsReport evaluate(const std::vector<PolicySpec>& policies, const Scenario& s,
                       const std::vector<double>& rates,
                       const std::vector<unsigned long long>& seeds,
                       const std::string& reference, int jobs) {
  struct Job {
    const PolicySpec* policy;
    Scenario scenario;
    unsigned long long seed;
  };
  std::vector<Job> work;
  const std::vector<double> grid = rates.empty() ? std::vector<double>{-1.0} : rates;
  for (double rate : grid)
    for (const PolicySpec& p : policies)
      for (unsigned long long seed : seeds)
        work.push_back({&p, rate < 0 ? s : with_rate(s, rate), seed});
  MetricsReport report;
  report.reference = reference;
  report.runs.resize(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    auto policy = work[i].policy->make();
    RunMetrics m = run_once(work[i].scenario, work[i].seed, *policy).metrics;
    m.policy = work[i].policy->label;
    report.runs[i] = m;
  });
  report.summary = summarize_runs(report.runs, reference);
  return report;
}

void write_runs_csv(std::ostream& os, const std::vector<RunMetrics>& runs) {
  os << "policy,rate,seed,robots,objective,weighted_ttc,throughput,violations\n";
  os.precision(10);
  for (const RunMetrics& r : runs)
    os << r.policy << ',' << r.rate << ',' << r.seed << ',' << r.robots << ',' << r.objective << ','
       << r.weighted_ttc << ',' << r.throughput << ',' << r.violations << '\n';
}

void write_summary_csv(std::ostream& os, const std::vector<PolicySummary>& rows) {
  os << "policy,rate,streams,J_bar,J_hat,E_percent,B_percent,throughput\n";
  os.precision(10);
  for (const PolicySummary& p : rows)
    os << p.policy << ',' << p.rate << ',' << p.streams << ',' << p.J_bar << ',' << p.J_hat << ','
       << p.E << ',' << p.B << ',' << p.throughput << '\n';
}

// ---- instance studies -----------------------------------------------------------

namespace {

class Harvester : public StreamObserver {
 public:
  Harvester(std::size_t lo, std::size_t hi, std::size_t per_size, std::vector<CoordinationInstance>& out)
      : lo_(lo), hi_(hi), per_size_(per_size), out_(out) {}
  void on_tick(const CoordinationInstance& inst, const Precedence&, const SequentialOutcome&) override {
    const std::size_t n = inst.pending.size();
    if (n < lo_ || n > hi_ || count_[n] >= per_size_) return;
    ++count_[n];
    out_.push_back(inst);
  }
  bool full() const {
    for (std::size_t n = lo_; n <= hi_; ++n)
      if (count_.count(n) == 0 || count_.at(n) < per_size_) return false;
    return true;
  }

 private:
  std::size_t lo_, hi_, per_size_;
  std::map<std::size_t, std::size_t> count_;
  std::vector<CoordinationInstance>& out_;
};

double micros(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<CoordinationInstance> harvest_instances(const Scenario& s, PrecedencePolicy& policy,
                                                    const std::vector<unsigned long long>& seeds,
                                                    std::size_t min_pending,
                                                    std::size_t max_pending,
                                                    std::size_t per_size) {
  std::vector<CoordinationInstance> out;
  Harvester h(min_pending, max_pending, per_size, out);
  for (unsigned long long seed : seeds) {
    if (h.full()) break;
    policy.reset(seed);
    run_stream(stream_config(s, seed), policy, &h);
  }
  return out;
}

std::vector<OptGapEntry> optgap_entries(const std::vector<CoordinationInstance>& instances,
                                        const CombinedOracleOptions& opts,
                                        std::size_t* skipped) {
  std::vector<OptGapEntry> out;
  if (skipped) *skipped = 0;
  for (const CoordinationInstance& inst : instances) {
    OptGapEntry e;
    e.pending = inst.pending.size();
    auto t0 = std::chrono::steady_clock::now();
    e.best_sequence = best_sequence(inst, opts.max_robots).objective;
    e.bs_us = micros(t0);
    t0 = std::chrono::steady_clock::now();
    try {
      e.combined = combined_toy_oracle(inst, opts);
    } catch (const SolveError& err) {
      if (err.kind() != SolveErrorKind::StateExplosion) throw;
      if (skipped) ++*skipped;
      continue;
    }
    e.co_us = micros(t0);
    e.gap = e.combined != 0.0 ? (e.combined - e.best_sequence) / std::abs(e.combined) * 100.0 : 0.0;
    out.push_back(e);
  }
  return out;
}

std::vector<OptGapRow> optgap_table(const std::vector<OptGapEntry>& entries) {
  std::map<std::size_t, std::vector<const OptGapEntry*>> by;
  for (const OptGapEntry& e : entries) by[e.pending].push_back(&e);
  std::vector<OptGapRow> out;
  for (const auto& [n, g] : by) {
    OptGapRow r;
    r.pending = n;
    r.instances = g.size();
    std::vector<double> gaps;
    for (const OptGapEntry* e : g) {
      gaps.push_back(e->gap);
      r.bs_us_per_robot += e->bs_us / static_cast<double>(n);
      r.co_us_per_robot += e->co_us / static_cast<double>(n);
    }
    r.avg_gap = summarize(gaps).mean;
    r.p90_gap = quantile(gaps, 0.9);
    r.bs_us_per_robot /= static_cast<double>(g.size());
    r.co_us_per_robot /= static_cast<double>(g.size());
    out.push_back(r);
  }
  return out;
}

void write_optgap_csv(std::ostream& os, const std::vector<OptGapRow>& rows) {
  os << "pending,instances,avg_gap_percent,p90_gap_percent,bestseq_us_per_robot,combined_us_per_robot\n";
  os.precision(10);
  for (const OptGapRow& r : rows)
    os << r.pending << ',' << r.instances << ',' << r.avg_gap << ',' << r.p90_gap << ','
       << r.bs_us_per_robot << ',' << r.co_us_per_robot << '\n';
}

std::vector<TimingEntry> timing_study(const std::vector<CoordinationInstance>& instances,
                                      bool with_bestseq, int repeats) {
  std::vector<TimingEntry> out(instances.size());
  std::vector<Precedence> prec;
  HeuristicPolicy arrival(HeuristicKind::FcfsOrder);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out[i].pending = instances[i].pending.size();
    out[i].sequential_us_per_robot = std::numeric_limits<double>::infinity();
    prec.push_back(arrival.precedence(instances[i]));
  }
  // Repeats sweep all instances in turn so drift in machine speed does not
  // line up with instance order; the fastest repeat is kept.
  for (int r = 0; r < std::max(1, repeats); ++r)
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const SequentialOutcome o = sequential_optimization(instances[i], prec[i]);
      const double us = micros(t0) / static_cast<double>(std::max<std::size_t>(o.solves, 1));
      out[i].sequential_us_per_robot = std::min(out[i].sequential_us_per_robot, us);
    }
  if (with_bestseq)
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const CoordinationInstance& inst = instances[i];
      const auto t0 = std::chrono::steady_clock::now();
      out[i].orders = best_sequence(inst, std::max<std::size_t>(inst.pending.size(), 1)).orders;
      out[i].bestseq_us = micros(t0);
    }
  return out;
}

void write_timing_csv(std::ostream& os, const std::vector<TimingEntry>& rows) {
  os << "pending,sequential_us_per_robot,bestseq_us,orders\n";
  os.precision(10);
  for (const TimingEntry& e : rows)
    os << e.pending << ',' << e.sequential_us_per_robot << ',' << e.bestseq_us << ',' << e.orders << '\n';
}

std::vector<SweepRow> buffer_sweep(const Scenario& s, const std::vector<double>& buffers,
                                   const PolicySpec& policy,
                                   const std::vector<unsigned long long>& seeds, int jobs) {
  std::vector<SweepRow> rows(buffers.size());
  std::vector<double> results(buffers.size() * seeds.size());
  parallel_for(results.size(), jobs, [&](std::size_t i) {
    Scenario sc = s;
    sc.adapt.buffer = buffers[i / seeds.size()];
    auto p = policy.make();
    results[i] = run_once(sc, seeds[i % seeds.size()], *p).metrics.throughput;
  });
  for (std::size_t b = 0; b < buffers.size(); ++b) {
    Scenario sc = s;
    sc.adapt.buffer = buffers[b];
    rows[b].buffer = buffers[b];
    rows[b].length = apply_adaptations(sc, sc.max_speed()).length;
    for (std::size_t k = 0; k < seeds.size(); ++k) rows[b].per_seed.push_back(results[b * seeds.size() + k]);
    rows[b].throughput = summarize(rows[b].per_seed).mean;
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "buffer,effective_length,throughput\n";
  os.precision(10);
  for (const SweepRow& r : rows) os << r.buffer << ',' << r.length << ',' << r.throughput << '\n';
}

// ---- learning data ------------------------------------------------------------------

LearnerConfig scenario_learner(const Scenario& s) {
  LearnerConfig c;
  c.T_r = s.T_r;
  c.r_bar = s.max_priority();
  return c;
}

TrainerConfig scenario_trainer(const Scenario& s) {
  TrainerConfig c;
  c.slots = s.slots;
  return c;
}

ReplayBuffer collect_buffer(const Scenario& s, const CollectOptions& opts) {
  TrainerConfig tc = opts.trainer;
  tc.seed = opts.seed;
  Trainer trainer(tc);
  ReplayBuffer buffer(std::max<std::size_t>(opts.phases, 1), tc.slots);
  LearnerConfig lc = opts.learner;
  if (lc.sigma_steps == 0) lc.sigma_steps = opts.phases;
  OnlineLearner learner(trainer, buffer, scenario_scaler(s), lc, opts.seed ^ 0x9e3779b97f4a7c15ULL);
  for (unsigned long long i = 0; learner.ticks() < opts.phases; ++i) {
    const unsigned long long seed = opts.seed * 1000003ULL + i;
    run_stream(stream_config(s, seed), learner, &learner);
    if (i > 100000) throw std::runtime_error("collect_buffer: streams produce no coordination ticks");
  }
  return buffer;
}

}  // namespace intman
