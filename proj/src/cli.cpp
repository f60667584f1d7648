#include "intman/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "intman/errors.hpp"
#include "intman/harness.hpp"

namespace fs = std::filesystem;

namespace intman {

namespace {

constexpr const char* kMarker = "COMPLETE";

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Files are staged in memory and only published once the command succeeded;
// the marker goes last so a directory without it never looks finished.
class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {}

  std::ostream& file(const std::string& name) { return files_[name]; }
  void note(const std::string& key, const std::string& value) { manifest_ << key << " = " << value << '\n'; }

  void commit() {
    fs::create_directories(dir_);
    fs::remove(fs::path(dir_) / kMarker);
    for (auto& [name, body] : files_) publish(name, body.str());
    publish("manifest.txt", manifest_.str());
    publish(kMarker, "ok\n");
  }

 private:
  void publish(const std::string& name, const std::string& body) {
    const fs::path target = fs::path(dir_) / name;
    const fs::path tmp = fs::path(dir_) / (name + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary);
      os << body;
      if (!os) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
  }

  std::string dir_;
  std::map<std::string, std::ostringstream> files_;
  std::ostringstream manifest_;
};

struct Globals {
  std::optional<unsigned long long> seed;
  std::string scenario = "sim1";
  std::string out = "out";
  std::vector<std::string> policies;
  std::optional<double> dt;
  int jobs = 1;
};

// A file path, or a built-in name such as sim2 (testing variant) or sim2:train.
Scenario resolve_scenario(const Globals& g) {
  Scenario s;
  if (fs::exists(g.scenario)) {
    s = load_scenario_file(g.scenario);
  } else {
    std::string name = g.scenario;
    bool train = false;
    if (const auto colon = name.find(':'); colon != std::string::npos) {
      const std::string which = name.substr(colon + 1);
      if (which != "train" && which != "test") throw InputError("unknown scenario variant '" + which + "'");
      train = which == "train";
      name = name.substr(0, colon);
    }
    const ScenarioPair& e = builtin_scenario(name);
    s = train ? e.train : e.test;
  }
  if (g.dt) s.dt = *g.dt;
  s.validate();
  return s;
}

std::vector<unsigned long long> stream_seeds(unsigned long long base, std::size_t n) {
  std::vector<unsigned long long> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(base + i);
  return out;
}

std::string join(const std::vector<unsigned long long>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

void describe(Output& out, const std::string& command, const Scenario& s,
              const std::vector<unsigned long long>& seeds) {
  std::ostringstream cfg;
  write_scenario(cfg, s);
  std::ostringstream hash;
  hash << std::hex << fnv1a(cfg.str());
  out.note("command", command);
  out.note("version", kVersion);
  out.note("scenario", s.name);
  out.note("config_hash", hash.str());
  out.note("seeds", join(seeds));
  out.file("scenario.cfg") << cfg.str();
}

}  // namespace

int cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsignalized intersection coordination engine"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "base stream seed (default: scenario seed)");
  app.add_option("--scenario", g.scenario, "scenario file or built-in name (sim1 ... sim9, name:train)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--policy", g.policies,
                 "fcfs, ttr, pdt, cdt, ocp, bestseq, random, arrival or neural:<file>; repeatable");
  app.add_option("--dt", g.dt, "time step override")->check(CLI::PositiveNumber);
  app.add_option("--jobs", g.jobs, "parallel runs")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "one policy on one stream: log and metrics");

  auto* collect = app.add_subcommand("collect", "replay buffer from the exploring learner");
  std::size_t phases = 2000;
  std::optional<double> collect_rate;
  collect->add_option("--phases", phases, "coordination ticks to record");
  collect->add_option("--rate", collect_rate, "homogeneous static rate override");

  auto* train = app.add_subcommand("train", "offline training on merged buffers");
  std::vector<std::string> buffers;
  std::size_t iterations = 20000;
  std::size_t curve_every = 100;
  train->add_option("--buffer", buffers, "buffer file; repeatable")->required();
  train->add_option("--iterations", iterations, "training iterations");
  train->add_option("--curve-every", curve_every, "iterations between training-curve rows");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "paired comparison of policies");
  std::size_t streams = 20;
  std::vector<double> rates;
  std::string reference;
  evaluate_cmd->add_option("--streams", streams, "streams per policy and rate");
  evaluate_cmd->add_option("--rate", rates, "rates to run (default: scenario rate grid)");
  evaluate_cmd->add_option("--reference", reference, "policy that E and B compare against (default: first)");

  auto* benchmark = app.add_subcommand("benchmark", "opt-gap study and solve timing");
  std::size_t max_gap = 3, max_timing = 8, per_size = 20, seed_budget = 200;
  benchmark->add_option("--gap-max", max_gap, "largest pending set for the combined oracle");
  benchmark->add_option("--timing-max", max_timing, "largest pending set for timing");
  benchmark->add_option("--per-size", per_size, "instances per pending-set size");
  benchmark->add_option("--streams", seed_budget, "streams to harvest from at most");

  auto* sweep = app.add_subcommand("sweep", "throughput over a tracking-buffer grid");
  std::vector<double> buffer_grid{0.0};
  std::size_t sweep_streams = 20;
  std::vector<double> sweep_rates;
  sweep->add_option("--buffer", buffer_grid, "buffer values b in metres")->required();
  sweep->add_option("--streams", sweep_streams, "paired streams per buffer value");
  sweep->add_option("--rate", sweep_rates, "rates to repeat the sweep at");

  auto* scenarios = app.add_subcommand("scenarios", "write the built-in scenario files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    Output o(g.out);
    if (scenarios->parsed()) {
      for (const ScenarioPair& e : builtin_scenarios()) {
        write_scenario(o.file(e.name + "_train.cfg"), e.train);
        write_scenario(o.file(e.name + "_test.cfg"), e.test);
      }
      o.note("command", "scenarios");
      o.commit();
      return 0;
    }

    Scenario s = resolve_scenario(g);
    const unsigned long long base = g.seed.value_or(s.seed);
    auto policies = [&](std::size_t min_count) {
      if (g.policies.size() < min_count) throw InputError("--policy is required");
      std::vector<PolicySpec> specs;
      for (const std::string& p : g.policies) specs.push_back(parse_policy(p, s));
      return specs;
    };

    if (simulate->parsed()) {
      const auto specs = policies(1);
      if (specs.size() != 1) throw InputError("simulate takes exactly one --policy");
      auto policy = specs[0].make();
      RunOutput r = run_once(s, base, *policy);
      r.metrics.policy = specs[0].label;
      describe(o, "simulate", s, {base});
      o.note("policy", g.policies[0]);
      write_log(o.file("log.jsonl"), r.log);
      write_runs_csv(o.file("metrics.csv"), {r.metrics});
      write_timings(o.file("timings.csv"), r.log);
      out << "robots " << r.log.robots.size() << " objective " << r.metrics.objective << " weighted_ttc "
          << r.metrics.weighted_ttc << " violations " << r.metrics.violations << "\n";
    } else if (collect->parsed()) {
      if (collect_rate) s = with_rate(s, *collect_rate);
      if (s.slots < s.slot_bound())
        err << "warning: " << s.slots << " slots is below the bound of " << s.slot_bound()
            << " pending robots for this geometry\n";
      CollectOptions opts;
      opts.phases = phases;
      opts.learner = scenario_learner(s);
      opts.learner.sigma_steps = phases;
      opts.trainer = scenario_trainer(s);
      opts.seed = base;
      const ReplayBuffer buf = collect_buffer(s, opts);
      describe(o, "collect", s, {base});
      buf.save(o.file("buffer.txt"));
      out << "transitions " << buf.size() << "\n";
    } else if (train->parsed()) {
      std::vector<ReplayBuffer> parts;
      for (const std::string& b : buffers) parts.push_back(ReplayBuffer::load_file(b));
      const ReplayBuffer merged = ReplayBuffer::merge(parts);
      TrainerConfig cfg = scenario_trainer(s);
      cfg.seed = base;
      const TrainResult r = cml_train(merged, cfg, iterations, curve_every);
      describe(o, "train", s, {base});
      for (const std::string& b : buffers) o.note("buffer", b);
      o.note("iterations", std::to_string(iterations));
      r.actor.save(o.file("actor.net"));
      std::ostream& curve = o.file("curve.csv");
      curve << "iteration,critic_loss,mean_reward\n";
      curve.precision(10);
      for (const TrainingCurvePoint& p : r.curve)
        curve << p.iteration << ',' << p.critic_loss << ',' << p.mean_reward << '\n';
    } else if (evaluate_cmd->parsed()) {
      const auto specs = policies(1);
      const auto seeds = stream_seeds(base, streams);
      const std::string ref = reference.empty() ? specs[0].label : reference;
      const std::vector<double> grid = rates.empty() ? s.rate_grid : rates;
      const MetricsReport report = evaluate(specs, s, grid, seeds, ref, g.jobs);
      describe(o, "evaluate", s, seeds);
      o.note("reference", ref);
      write_runs_csv(o.file("runs.csv"), report.runs);
      write_summary_csv(o.file("summary.csv"), report.summary);
      write_summary_csv(out, report.summary);
    } else if (benchmark->parsed()) {
      const auto seeds = stream_seeds(base, seed_budget);
      HeuristicPolicy harvest_policy(HeuristicKind::FcfsOrder);
      const auto gap_instances = harvest_instances(s, harvest_policy, seeds, 1, max_gap, per_size);
      CombinedOracleOptions opts;
      opts.max_robots = max_gap;
      std::size_t skipped = 0;
      const auto table = optgap_table(optgap_entries(gap_instances, opts, &skipped));
      const auto timing_instances = harvest_instances(s, harvest_policy, seeds, 1, max_timing, per_size);
      const auto timing = timing_study(timing_instances, true);
      describe(o, "benchmark", s, seeds);
      o.note("optgap_skipped", std::to_string(skipped));
      write_optgap_csv(o.file("optgap.csv"), table);
      write_timing_csv(o.file("timing.csv"), timing);
      write_optgap_csv(out, table);
    } else if (sweep->parsed()) {
      const auto specs = policies(1);
      if (specs.size() != 1) throw InputError("sweep takes exactly one --policy");
      const auto seeds = stream_seeds(base, sweep_streams);
      describe(o, "sweep", s, seeds);
      std::ostream& csv = o.file("sweep.csv");
      csv << "rate,buffer,effective_length,throughput\n";
      csv.precision(10);
      const std::vector<double> grid = sweep_rates.empty() ? std::vector<double>{-1.0} : sweep_rates;
      for (double rate : grid) {
        const Scenario sc = rate < 0 ? s : with_rate(s, rate);
        for (const SweepRow& r : buffer_sweep(sc, buffer_grid, specs[0], seeds, g.jobs))
          csv << rate << ',' << r.buffer << ',' << r.length << ',' << r.throughput << '\n';
      }
    }
    o.commit();
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace intman
