#include "intman/stream.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "intman/errors.hpp"

namespace intman {
namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

long steps_of(double t, double dt) { return std::lround(t / dt); }

struct Active {
  std::size_t rec = 0;
  bool committed = false;
  double exit_time = kForever;
};

class StreamRunner {
 public:
  StreamRunner(const StreamConfig& cfg, PrecedencePolicy& policy, StreamObserver* obs)
      : cfg_(cfg), geom_(*cfg.geometry), policy_(policy), obs_(obs) {
    geom_.validate();
    if (!(cfg.dt > 0) || !(cfg.T_c > 0) || !(cfg.T_h > 0))
      throw InputError("stream: dt, T_c and T_h must be positive");
    tick_steps_ = steps_of(cfg.T_c, cfg.dt);
    if (std::abs(static_cast<double>(tick_steps_) * cfg.dt - cfg.T_c) > 1e-9)
      throw InputError("stream: T_c must be a multiple of dt");
    queues_.resize(static_cast<std::size_t>(geom_.num_lanes));
    lane_next_.assign(queues_.size(), 0);
    last_on_lane_.assign(queues_.size(), -1);
    std::vector<const ArrivalSpec*> sorted;
    for (const ArrivalSpec& a : cfg.arrivals) {
      if (!geom_.lane_valid(a.lane)) throw InputError("stream: arrival on an invalid lane");
      sorted.push_back(&a);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](const ArrivalSpec* a, const ArrivalSpec* b) {
      return a->tentative_time != b->tentative_time ? a->tentative_time < b->tentative_time
                                                    : a->id < b->id;
    });
    for (const ArrivalSpec* a : sorted) queues_[static_cast<std::size_t>(a->lane)].push_back(a);
    log_.policy = policy.name();
    log_.T_c = cfg.T_c;
    log_.T_h = cfg.T_h;
    log_.dt = cfg.dt;
    log_.stream_length = cfg.stream_length;
  }

  SimulationLog run() {
    if (policy_.fcfs_mode()) {
      run_fcfs();
    } else {
      run_periodic();
    }
    log_.robots.assign(std::make_move_iterator(records_.begin()),
                       std::make_move_iterator(records_.end()));
    if (obs_) obs_->on_finish(log_);
    return std::move(log_);
  }

 private:
  double time_of(long step) const { return static_cast<double>(step) * cfg_.dt; }

  bool queues_empty() const {
    for (const auto& q : queues_)
      if (!q.empty()) return false;
    return true;
  }

  /// Earliest grid step at which lane `l`'s next robot may be tried.
  long candidate_step(std::size_t l) const {
    const long tentative = static_cast<long>(std::ceil(queues_[l].front()->tentative_time / cfg_.dt - 1e-9));
    return std::max(tentative, lane_next_[l]);
  }

  static double entry_velocity(const ArrivalSpec& a, double approach) {
    return std::min({a.v0, a.v_max, std::sqrt(2.0 * (-a.u_min) * approach)});
  }

  Robot make_robot(const ArrivalSpec& a, double t_arrival) const {
    Robot r;
    r.id = a.id;
    r.lane = a.lane;
    r.length = a.length;
    r.priority = a.priority;
    r.v_max = a.v_max;
    r.u_min = a.u_min;
    r.u_max = a.u_max;
    r.arrival_time = t_arrival;
    r.validate();
    return r;
  }

  /// Robot most recently admitted on the lane, if it still matters.
  const RobotRecord* lane_predecessor(std::size_t l) const {
    const long idx = last_on_lane_[l];
    return idx < 0 ? nullptr : &records_[static_cast<std::size_t>(idx)];
  }

  bool admissible_entry(const ArrivalSpec& a, long step) const {
    const auto l = static_cast<std::size_t>(a.lane);
    const RobotRecord* lead = lane_predecessor(l);
    if (!lead) return true;
    const double t = time_of(step);
    const State ls = lead->trajectory.state_at(t);
    if (ls.x >= geom_.intersection_span[l] + lead->robot.length) return true;
    const State entry{-geom_.approach_length[l], entry_velocity(a, geom_.approach_length[l])};
    return rear_end_satisfied(entry, ls, lead->robot.length, a.u_min, 0.0);
  }

  /// Admits the robots whose admission falls before `end_step`, in global
  /// time order; calls `admitted` for each.
  template <class F>
  void admit_until(long end_step, F admitted) {
    for (;;) {
      std::size_t best = queues_.size();
      long best_step = 0;
      for (std::size_t l = 0; l < queues_.size(); ++l) {
        if (queues_[l].empty()) continue;
        const long s = candidate_step(l);
        if (best == queues_.size() || s < best_step) {
          best = l;
          best_step = s;
        }
      }
      if (best == queues_.size() || best_step >= end_step) return;
      const ArrivalSpec& a = *queues_[best].front();
      lane_next_[best] = best_step + 1;
      if (!admissible_entry(a, best_step)) continue;
      queues_[best].pop_front();
      RobotRecord rec;
      rec.robot = make_robot(a, time_of(best_step));
      rec.tentative_time = a.tentative_time;
      const double d = geom_.approach_length[best];
      rec.trajectory = Trajectory::start(time_of(best_step), cfg_.dt, {-d, entry_velocity(a, d)});
      records_.push_back(std::move(rec));
      last_on_lane_[best] = static_cast<long>(records_.size() - 1);
      admitted(records_.size() - 1, best_step);
    }
  }

  std::optional<LeaderRef> leader_for(const RobotRecord& rec) const {
    const auto l = static_cast<std::size_t>(rec.robot.lane);
    const RobotRecord* best = nullptr;
    for (const Active& a : active_) {
      const RobotRecord& o = records_[a.rec];
      if (o.robot.lane != rec.robot.lane || o.robot.id == rec.robot.id) continue;
      if (o.robot.arrival_time >= rec.robot.arrival_time) continue;
      if (!best || o.robot.arrival_time > best->robot.arrival_time) best = &o;
    }
    if (!best) return std::nullopt;
    return LeaderRef{&best->trajectory, best->robot.length, geom_.intersection_span[l]};
  }

  void drop_departed(double t) {
    std::erase_if(active_, [t](const Active& a) { return a.committed && a.exit_time <= t; });
  }

  void check_drain(double t) const {
    if (t > cfg_.stream_length + cfg_.drain_limit)
      throw std::runtime_error("stream: region did not empty within the drain limit");
  }

  // ---- periodic coordination -------------------------------------------

  void run_periodic() {
    for (long k = 0;; ++k) {
      const double t = time_of(k * tick_steps_);
      check_drain(t);
      if (k > 0) tick(static_cast<int>(k), t);
      const long window_end = (k + 1) * tick_steps_;
      admit_until(window_end, [&](std::size_t idx, long step) {
        provisional(idx, step, window_end);
      });
      bool waiting = false;
      for (const Active& a : active_) waiting = waiting || !a.committed;
      if (!waiting && queues_empty() && k > 0) break;
    }
  }

  void provisional(std::size_t idx, long start_step, long end_step) {
    RobotRecord& rec = records_[idx];
    const auto l = static_cast<std::size_t>(rec.robot.lane);
    SolveRequest req;
    req.robot = rec.robot;
    req.initial = rec.trajectory.final_state();
    req.t_start = time_of(start_step);
    req.t_end = time_of(end_step);
    req.dt = cfg_.dt;
    req.intersection_span = geom_.intersection_span[l];
    req.leader = leader_for(rec);
    req.entry_gate = kForever;
    const SolveResult res = solve_max_progress(req);
    rec.trajectory.append(res.trajectory);
    ++rec.provisional_rounds;
    active_.push_back({idx, false, kForever});
  }

  void tick(int k, double t) {
    drop_departed(t);
    CoordinationInstance inst;
    inst.k = k;
    inst.t_now = t;
    inst.T_c = cfg_.T_c;
    inst.T_h = cfg_.T_h;
    inst.dt = cfg_.dt;
    inst.geometry = cfg_.geometry;
    std::vector<std::size_t> pending_active;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const RobotRecord& rec = records_[active_[i].rec];
      if (active_[i].committed) {
        inst.committed.push_back({rec.robot, rec.trajectory, active_[i].exit_time});
      } else {
        inst.pending.push_back({rec.robot, rec.trajectory.final_state(), rec.trajectory});
        pending_active.push_back(i);
      }
    }

    Precedence prec;
    SequentialOutcome outcome;
    TickTiming timing;
    timing.k = k;
    timing.pending = inst.pending.size();
    if (!inst.pending.empty()) {
      auto t0 = Clock::now();
      prec = policy_.precedence(inst);
      timing.policy_us = micros_since(t0);
      t0 = Clock::now();
      outcome = sequential_optimization(inst, prec);
      timing.sequential_us = micros_since(t0);
      timing.solves = outcome.solves;
      log_.timings.push_back(timing);
    }

    for (std::size_t i : pending_active) {
      Active& a = active_[i];
      RobotRecord& rec = records_[a.rec];
      auto it = outcome.trajectories.find(rec.robot.id);
      if (it == outcome.trajectories.end()) continue;
      rec.trajectory.append(it->second);
      rec.robot.coord_start = t;
      const CrossingTimes ct = boundary_crossing_times(rec.trajectory, geom_, rec.robot);
      rec.robot.entry_time = ct.entry;
      rec.robot.exit_time = ct.exit;
      a.committed = true;
      a.exit_time = ct.exit.value_or(kForever);
    }
    if (!outcome.deferred.empty()) {
      const auto plans = deferred_provisional(inst, outcome);
      for (std::size_t i : pending_active) {
        RobotRecord& rec = records_[active_[i].rec];
        auto it = plans.find(rec.robot.id);
        if (it == plans.end()) continue;
        rec.trajectory.append(it->second);
        ++rec.provisional_rounds;
      }
    }
    if (obs_) obs_->on_tick(inst, prec, outcome);
    if (!inst.pending.empty())
      log_.events.push_back({k, t, inst.pending.size(), outcome.entered.size(), outcome.order});
  }

  // ---- FCFS ---------------------------------------------------------------

  void run_fcfs() {
    constexpr int kMaxExtensions = 64;
    int k = 0;
    admit_until(std::numeric_limits<long>::max(), [&](std::size_t idx, long step) {
      const double t = time_of(step);
      check_drain(t);
      drop_departed(t);
      RobotRecord& rec = records_[idx];
      std::vector<CommittedRobot> fixed;
      for (const Active& a : active_) {
        const RobotRecord& o = records_[a.rec];
        fixed.push_back({o.robot, o.trajectory, a.exit_time});
      }
      std::vector<const CommittedRobot*> refs;
      for (const CommittedRobot& c : fixed) refs.push_back(&c);
      SolveRequest req;
      req.robot = rec.robot;
      req.initial = rec.trajectory.final_state();
      req.t_start = t;
      req.dt = cfg_.dt;
      req.intersection_span = geom_.intersection_span[static_cast<std::size_t>(rec.robot.lane)];
      req.leader = lane_leader(rec.robot, refs, geom_);
      const double tau = min_wait_time(rec.robot, refs, geom_);
      if (tau > t) req.entry_gate = tau;
      TickTiming timing;
      timing.k = ++k;
      timing.pending = 1;
      const auto t0 = Clock::now();
      SolveResult res;
      for (int ext = 1; ext <= kMaxExtensions; ++ext) {
        req.t_end = t + cfg_.T_h * ext;
        res = solve_max_progress(req);
        ++timing.solves;
        if (res.crossed) break;
      }
      timing.sequential_us = micros_since(t0);
      if (!res.crossed) throw std::runtime_error("stream: FCFS robot cannot cross");
      log_.timings.push_back(timing);
      rec.trajectory = std::move(res.trajectory);
      rec.robot.coord_start = t;
      rec.robot.entry_time = res.crossing.entry;
      rec.robot.exit_time = res.crossing.exit;
      active_.push_back({idx, true, *res.crossing.exit});
      log_.events.push_back({k, t, 1, 1, {rec.robot.id}});
    });
  }

  const StreamConfig& cfg_;
  const LaneGeometry& geom_;
  PrecedencePolicy& policy_;
  StreamObserver* obs_;
  long tick_steps_ = 0;
  SimulationLog log_;
  std::deque<RobotRecord> records_;
  std::vector<Active> active_;
  std::vector<std::deque<const ArrivalSpec*>> queues_;
  std::vector<long> lane_next_;
  std::vector<long> last_on_lane_;
};

}  // namespace

SimulationLog run_stream(const StreamConfig& config, PrecedencePolicy& policy,
                         StreamObserver* observer) {
  if (!config.geometry) throw InputError("stream: missing geometry");
  StreamRunner runner(config, policy, observer);
  return runner.run();
}

std::vector<std::string> audit_safety(const SimulationLog& log, const LaneGeometry& geom,
                                      double time_tol, double dist_tol) {
  std::vector<std::string> out;
  struct Occupancy {
    const RobotRecord* rec;
    CrossingTimes ct;
  };
  std::vector<Occupancy> occ;
  for (const RobotRecord& r : log.robots)
    occ.push_back({&r, boundary_crossing_times(r.trajectory, geom, r.robot)});

  for (std::size_t i = 0; i < occ.size(); ++i) {
    const Occupancy& a = occ[i];
    if (!a.ct.entry) continue;
    for (std::size_t j = i + 1; j < occ.size(); ++j) {
      const Occupancy& b = occ[j];
      if (!b.ct.entry) continue;
      if (conflict_value(geom, a.rec->robot.lane, b.rec->robot.lane) != -1) continue;
      const double xa = a.ct.exit.value_or(kForever);
      const double xb = b.ct.exit.value_or(kForever);
      const double overlap = std::min(xa, xb) - std::max(*a.ct.entry, *b.ct.entry);
      if (overlap > time_tol)
        out.push_back("robots " + std::to_string(a.rec->robot.id) + " and " +
                      std::to_string(b.rec->robot.id) + " share the intersection for " +
                      std::to_string(overlap) + " s");
    }
  }

  // Rear-end safety between consecutive robots of each lane.
  std::vector<std::vector<const RobotRecord*>> lanes(static_cast<std::size_t>(geom.num_lanes));
  for (const RobotRecord& r : log.robots) lanes[static_cast<std::size_t>(r.robot.lane)].push_back(&r);
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    auto& q = lanes[l];
    std::stable_sort(q.begin(), q.end(), [](const RobotRecord* a, const RobotRecord* b) {
      return a->robot.arrival_time < b->robot.arrival_time;
    });
    const double span = geom.intersection_span[l];
    for (std::size_t i = 1; i < q.size(); ++i) {
      const RobotRecord& lead = *q[i - 1];
      const RobotRecord& fol = *q[i];
      const Trajectory& ft = fol.trajectory;
      for (std::size_t k = 0; k <= ft.steps(); ++k) {
        const double t = ft.time_at(k);
        const State ls = lead.trajectory.state_at(t);
        if (ls.x >= span + lead.robot.length) break;
        if (!rear_end_satisfied(ft.state_at_index(k), ls, lead.robot.length, fol.robot.u_min,
                                dist_tol)) {
          out.push_back("robot " + std::to_string(fol.robot.id) + " too close behind " +
                        std::to_string(lead.robot.id) + " at t=" + std::to_string(t));
          break;
        }
      }
    }
  }
  return out;
}

namespace {

using nlohmann::json;

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> json_opt(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace

void write_log(std::ostream& os, const SimulationLog& log) {
  json header{{"format", "intman-log"},  {"version", kLogFormatVersion},
              {"policy", log.policy},    {"T_c", log.T_c},
              {"T_h", log.T_h},          {"dt", log.dt},
              {"stream_length", log.stream_length}};
  os << header.dump() << '\n';
  for (const RobotRecord& r : log.robots) {
    json j{{"type", "robot"},
           {"id", r.robot.id},
           {"lane", r.robot.lane},
           {"priority", r.robot.priority},
           {"length", r.robot.length},
           {"v_max", r.robot.v_max},
           {"u_min", r.robot.u_min},
           {"u_max", r.robot.u_max},
           {"t_tentative", r.tentative_time},
           {"t_A", r.robot.arrival_time},
           {"t_C", opt_json(r.robot.coord_start)},
           {"t_E", opt_json(r.robot.entry_time)},
           {"t_X", opt_json(r.robot.exit_time)},
           {"provisional_rounds", r.provisional_rounds},
           {"t0", r.trajectory.t0},
           {"dt", r.trajectory.dt},
           {"u", r.trajectory.u},
           {"v", r.trajectory.v},
           {"x", r.trajectory.x}};
    os << j.dump() << '\n';
  }
  for (const CoordinationEvent& e : log.events) {
    json j{{"type", "event"},       {"k", e.k},
           {"t", e.t},              {"pending", e.pending},
           {"entered", e.entered},  {"order", e.order}};
    os << j.dump() << '\n';
  }
}

SimulationLog read_log(std::istream& is) {
  SimulationLog log;
  std::string line;
  if (!std::getline(is, line)) throw InputError("log: empty input");
  const json header = json::parse(line);
  if (header.value("format", "") != "intman-log" || header.value("version", 0) != kLogFormatVersion)
    throw InputError("log: unsupported format");
  log.policy = header.at("policy").get<std::string>();
  log.T_c = header.at("T_c").get<double>();
  log.T_h = header.at("T_h").get<double>();
  log.dt = header.at("dt").get<double>();
  log.stream_length = header.at("stream_length").get<double>();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "robot") {
      RobotRecord r;
      r.robot.id = j.at("id").get<int>();
      r.robot.lane = j.at("lane").get<int>();
      r.robot.priority = j.at("priority").get<double>();
      r.robot.length = j.at("length").get<double>();
      r.robot.v_max = j.at("v_max").get<double>();
      r.robot.u_min = j.at("u_min").get<double>();
      r.robot.u_max = j.at("u_max").get<double>();
      r.tentative_time = j.at("t_tentative").get<double>();
      r.robot.arrival_time = j.at("t_A").get<double>();
      r.robot.coord_start = json_opt(j.at("t_C"));
      r.robot.entry_time = json_opt(j.at("t_E"));
      r.robot.exit_time = json_opt(j.at("t_X"));
      r.provisional_rounds = j.at("provisional_rounds").get<int>();
      r.trajectory.t0 = j.at("t0").get<double>();
      r.trajectory.dt = j.at("dt").get<double>();
      r.trajectory.u = j.at("u").get<std::vector<double>>();
      r.trajectory.v = j.at("v").get<std::vector<double>>();
      r.trajectory.x = j.at("x").get<std::vector<double>>();
      log.robots.push_back(std::move(r));
    } else if (type == "event") {
      CoordinationEvent e;
      e.k = j.at("k").get<int>();
      e.t = j.at("t").get<double>();
      e.pending = j.at("pending").get<std::size_t>();
      e.entered = j.at("entered").get<std::size_t>();
      e.order = j.at("order").get<std::vector<int>>();
      log.events.push_back(std::move(e));
    } else {
      throw InputError("log: unknown record type " + type);
    }
  }
  return log;
}

void write_timings(std::ostream& os, const SimulationLog& log) {
  os << "k,pending,solves,policy_us,sequential_us\n";
  for (const TickTiming& t : log.timings)
    os << t.k << ',' << t.pending << ',' << t.solves << ',' << t.policy_us << ','
       << t.sequential_us << '\n';
}

}  // namespace intman
