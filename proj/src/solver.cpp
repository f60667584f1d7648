#include "intman/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "intman/errors.hpp"

namespace intman {

std::size_t SolveRequest::num_steps() const {
  const double n = (t_end - t_start) / dt;
  return n <= 0 ? 0 : static_cast<std::size_t>(std::llround(n));
}

StepChecker::StepChecker(const SolveRequest& req)
    : req_(req), gate_(req.entry_gate.value_or(-kForever)) {
  const std::size_t n = req.num_steps();
  leader_states_.resize(n + 1);
  leader_on_.assign(n + 1, false);
  if (!req.leader || req.leader->trajectory == nullptr) return;
  const LeaderRef& lead = *req.leader;
  const Trajectory& lt = *lead.trajectory;
  const double cleared = lead.span + lead.length;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = req.t_start + static_cast<double>(k) * req.dt;
    const State s = lt.state_at(t);
    leader_states_[k] = s;
    // Past its stored horizon a leader that has cleared the intersection
    // has left the region; otherwise it is held at its final state.
    leader_on_[k] = lt.covers(t) || s.x < cleared;
  }
}

bool StepChecker::admissible(std::size_t k, State cur, State next, double tol) const {
  const Robot& r = req_.robot;
  if (next.v < -tol || next.v > r.v_max + tol) return false;
  if (leader_active(k + 1) &&
      !rear_end_satisfied(next, leader_states_[k + 1], req_.leader->length, r.u_min,
                          tol))
    return false;
  const double t_k = req_.t_start + static_cast<double>(k) * req_.dt;
  if (gate_ > t_k && cur.x <= kEntryTolerance) {
    if (next.x > kEntryTolerance) {
      const double t_cross = interpolate_crossing(t_k, req_.dt, cur.x, next.x, 0.0);
      if (t_cross < gate_ - tol) return false;
    } else if (t_k + req_.dt < gate_ &&
               !stoppable_before(next.x, next.v, 0.0, r.u_min, tol)) {
      return false;
    }
  }
  return true;
}

double StepChecker::rear_slack(std::size_t k, State s) const {
  if (!leader_active(k)) return kForever;
  const State& lead = leader_states_[k];
  return lead.x - s.x -
         safe_following_distance(s.v, lead.v, req_.leader->length, req_.robot.u_min);
}

double StepChecker::gate_slack(std::size_t k, State s) const {
  const double t_k = req_.t_start + static_cast<double>(k) * req_.dt;
  if (!(gate_ > t_k) || s.x > kEntryTolerance) return kForever;
  return 2.0 * (-req_.robot.u_min) * (-s.x) - s.v * s.v;
}

bool StepChecker::initial_ok(double tol) const {
  const State s = req_.initial;
  const Robot& r = req_.robot;
  if (s.v < -tol || s.v > r.v_max + tol) return false;
  if (leader_active(0) &&
      !rear_end_satisfied(s, leader_states_[0], req_.leader->length, r.u_min, tol))
    return false;
  if (gate_ > req_.t_start && s.x <= kEntryTolerance &&
      !stoppable_before(s.x, s.v, 0.0, r.u_min, tol))
    return false;
  return true;
}

namespace {

SolveResult finish(const SolveRequest& req, Trajectory traj, SolveStatus status) {
  SolveResult out;
  out.crossing = boundary_crossing_times(traj, req.intersection_span, req.robot.length);
  out.objective = traj.x.back() - traj.x.front();
  out.crossed = out.crossing.exit && *out.crossing.exit <= req.t_end + 1e-9;
  out.trajectory = std::move(traj);
  out.status = status;
  return out;
}

void check_entry(const StepChecker& checker, const SolveRequest& req) {
  if (!checker.initial_ok(1e-6))
    throw SolveError(SolveErrorKind::InfeasibleEntry,
                     "robot " + std::to_string(req.robot.id) +
                         " violates the entry conditions at t=" + std::to_string(req.t_start));
}

}  // namespace

namespace {

constexpr double kResolution = 1e-6;

/// Greedy forward pass. `extra` further restricts the next state at step
/// k+1 and may name one control known to satisfy it; it is dropped for the
/// rest of the pass once no admissible control satisfies it.
template <class Extra>
Trajectory greedy_pass(const SolveRequest& req, const StepChecker& checker, Extra extra) {
  const KinematicLimits lim = req.robot.limits();
  const std::size_t n = req.num_steps();
  Trajectory traj = Trajectory::start(req.t_start, req.dt, req.initial);
  traj.u.reserve(n);
  traj.v.reserve(n + 1);
  traj.x.reserve(n + 1);
  bool use_extra = true;
  for (std::size_t k = 0; k < n; ++k) {
    const State cur = traj.final_state();
    // Controls are chosen with no tolerance so that rounding along a braking
    // leader cannot push maximum braking out of the tolerance used below.
    auto base = [&](double u) {
      return checker.admissible(k, cur, propagate(cur, u, req.dt, lim), 0.0);
    };
    if (!checker.admissible(k, cur, propagate(cur, lim.u_min, req.dt, lim)))
      throw std::logic_error("solve_max_progress: maximum braking became infeasible");
    auto ok = [&](double u) {
      return base(u) && (!use_extra || extra.check(k + 1, propagate(cur, u, req.dt, lim)));
    };
    if (ok(lim.u_max)) {
      traj.push(lim.u_max, lim);
      continue;
    }
    // At rest every u <= 0 leads to the same state.
    if (cur.v <= 0.0 && ok(0.0) && !ok(kResolution)) {
      traj.push(0.0, lim);
      continue;
    }
    // The admissible set need not contain u_min once a target must stay
    // reachable, so locate its upper part on a coarse grid first.
    constexpr int kCoarse = 16;
    const double step = (lim.u_max - lim.u_min) / kCoarse;
    int g = kCoarse - 1;
    while (g >= 0 && !ok(lim.u_min + g * step)) --g;
    double lo = lim.u_min + g * step;
    double hi = lo + step;
    if (g < 0) {
      const std::optional<double> w = use_extra ? extra.witness(k, cur) : std::nullopt;
      if (w && ok(*w)) {
        lo = *w;
        hi = std::min(lim.u_max, lim.u_min + (std::floor((*w - lim.u_min) / step) + 1) * step);
      } else {
        use_extra = false;
        lo = lim.u_min;
        hi = lo + step;
      }
    }
    while (hi - lo > kResolution) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
    traj.push(lo, lim);
  }
  return traj;
}

/// Reachability of a velocity target at the first grid step at or after the
/// gate, using the leaderless gate constraints only. Launch profiles are
/// searched: brake for b steps, one partial step, then maximum acceleration.
class GateTarget {
 public:
  GateTarget(const SolveRequest& req, std::size_t gate_step)
      : req_(req), gate_step_(gate_step), lim_(req.robot.limits()),
        t_pre_(req.t_start + static_cast<double>(gate_step - 1) * req.dt) {}

  /// Whether state `s` at step j can still reach velocity w at the gate
  /// step; on success the first control of a launch plan that does so.
  std::optional<double> plan(std::size_t j, State s, double w) const {
    if (w <= 0.0) return lim_.u_min;  // braking throughout stays admissible
    if (j >= gate_step_) return s.v >= w - kSolverTol ? std::optional<double>(lim_.u_max)
                                                       : std::nullopt;
    const std::size_t m = gate_step_ - j;
    // The partial step a launch needs grows with the brake length, and a
    // shorter brake stays ahead of a longer one (position and speed) at
    // every time. So only the longest brake that still reaches w can work.
    if (launch_control(s, 0, m, w) > lim_.u_max + 1e-12) return std::nullopt;
    const std::size_t b = longest_brake(s, m, w);
    const double up = std::max(launch_control(s, b, m, w), lim_.u_min);
    if (!launch_ok(brake(s, b), up, m - b - 1, w)) return std::nullopt;
    return b > 0 ? lim_.u_min : up;
  }

 private:
  State brake(State s, std::size_t b) const {
    return b == 0 ? s : propagate(s, lim_.u_min, static_cast<double>(b) * req_.dt, lim_);
  }
  /// Partial-step control after braking b of m steps that ends at w.
  double launch_control(State s, std::size_t b, std::size_t m, double w) const {
    const double rest = static_cast<double>(m - b - 1);
    return (w - brake(s, b).v) / req_.dt - rest * lim_.u_max;
  }
  /// Largest b < m whose launch control fits, given that b = 0 fits. The
  /// control is linear in b until the brake stops the robot and linear with
  /// a smaller slope after, so estimate in closed form and correct locally.
  std::size_t longest_brake(State s, std::size_t m, double w) const {
    auto fits = [&](std::size_t b) { return launch_control(s, b, m, w) <= lim_.u_max + 1e-12; };
    const double span = lim_.u_max - lim_.u_min;
    double est = (lim_.u_max - launch_control(s, 0, m, w)) / span;
    if (s.v + std::floor(est) * req_.dt * lim_.u_min <= 0.0)
      est = static_cast<double>(m) - w / (req_.dt * lim_.u_max);
    const double top = static_cast<double>(m - 1);
    std::size_t b = static_cast<std::size_t>(std::clamp(std::floor(est), 0.0, top));
    while (b + 1 < m && fits(b + 1)) ++b;
    while (b > 0 && !fits(b)) --b;
    return b;
  }
  bool stoppable_at(State s) const {
    return s.x <= kEntryTolerance && stoppable_before(s.x, s.v, 0.0, lim_.u_min, 0.0);
  }
  bool crossing_ok(State pre, State end) const {
    if (end.x <= kEntryTolerance) return true;
    if (pre.x > kEntryTolerance) return false;
    return interpolate_crossing(t_pre_, req_.dt, pre.x, end.x, 0.0) >= *req_.entry_gate;
  }
  /// Partial step `up` from `sb`, then `rest` steps at maximum acceleration
  /// ending on the gate step. Along the accelerating part position and
  /// velocity only grow, so stoppability needs checking at its ends only.
  bool launch_ok(State sb, double up, std::size_t rest, double w) const {
    const State s1 = propagate(sb, up, req_.dt, lim_);
    State pre = sb;
    State end = s1;
    if (rest > 0) {
      if (!stoppable_at(s1)) return false;
      pre = rest == 1 ? s1
                      : propagate(s1, lim_.u_max, static_cast<double>(rest - 1) * req_.dt, lim_);
      if (!stoppable_at(pre)) return false;
      end = propagate(pre, lim_.u_max, req_.dt, lim_);
    }
    return end.v >= w - kSolverTol && crossing_ok(pre, end);
  }

  const SolveRequest& req_;
  std::size_t gate_step_;
  KinematicLimits lim_;
  double t_pre_;
};

struct NoExtra {
  bool check(std::size_t, State) const { return true; }
  std::optional<double> witness(std::size_t, State) const { return std::nullopt; }
};

struct TargetExtra {
  const GateTarget& target;
  double w;
  bool check(std::size_t j, State s) const { return target.plan(j, s, w).has_value(); }
  std::optional<double> witness(std::size_t k, State cur) const { return target.plan(k, cur, w); }
};

}  // namespace

SolveResult solve_max_progress(const SolveRequest& req) {
  const StepChecker checker(req);
  check_entry(checker, req);
  Trajectory best = greedy_pass(req, checker, NoExtra{});

  // A gate that opens inside the horizon rewards arriving there with speed
  // rather than waiting at the stop line; search the arrival velocity.
  const std::size_t n = req.num_steps();
  if (!req.entry_gate || !(*req.entry_gate > req.t_start) || req.initial.x > kEntryTolerance)
    return finish(req, std::move(best), SolveStatus::OptimalGreedy);
  const double steps_to_gate = (*req.entry_gate - req.t_start) / req.dt;
  const auto gate_step = static_cast<std::size_t>(std::ceil(steps_to_gate - 1e-9));
  if (gate_step == 0 || gate_step >= n)
    return finish(req, std::move(best), SolveStatus::OptimalGreedy);

  const GateTarget target(req, gate_step);
  auto run = [&](double w) { return greedy_pass(req, checker, TargetExtra{target, w}); };
  auto score = [](const Trajectory& t) { return t.x.back(); };
  const double vmax = req.robot.v_max;
  constexpr int kGrid = 8;
  double best_w = 0.0;
  double best_score = score(best);
  for (int i = 1; i <= kGrid; ++i) {
    const double w = vmax * i / kGrid;
    Trajectory t = run(w);
    if (score(t) > best_score + 1e-12) {
      best_score = score(t);
      best_w = w;
      best = std::move(t);
    }
  }
  // Golden-section refinement around the best grid point.
  double a = std::max(0.0, best_w - vmax / kGrid);
  double b = std::min(vmax, best_w + vmax / kGrid);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  Trajectory tc = run(c), td = run(d);
  for (int it = 0; it < 12; ++it) {
    if (score(tc) >= score(td)) {
      b = d; d = c; td = std::move(tc);
      c = b - g * (b - a); tc = run(c);
    } else {
      a = c; c = d; tc = std::move(td);
      d = a + g * (b - a); td = run(d);
    }
  }
  for (Trajectory* t : {&tc, &td})
    if (score(*t) > best_score + 1e-12) {
      best_score = score(*t);
      best = std::move(*t);
    }
  return finish(req, std::move(best), SolveStatus::OptimalGreedy);
}

std::vector<Violation> certify_trajectory(const SolveRequest& req, const Trajectory& traj,
                                          double tol) {
  std::vector<Violation> out;
  const Robot& r = req.robot;
  const KinematicLimits lim = r.limits();
  const std::size_t n = req.num_steps();
  if (traj.steps() != n || traj.v.size() != n + 1 || traj.x.size() != n + 1 ||
      std::abs(traj.t0 - req.t_start) > 1e-9) {
    out.push_back({0, "shape does not match the request horizon"});
    return out;
  }
  if (std::abs(traj.x[0] - req.initial.x) > tol || std::abs(traj.v[0] - req.initial.v) > tol)
    out.push_back({0, "initial state differs from the request"});

  const double gate = req.entry_gate.value_or(-kForever);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = req.t_start + static_cast<double>(k) * req.dt;
    const State s{traj.x[k], traj.v[k]};
    if (s.v < -tol || s.v > r.v_max + tol) out.push_back({k, "velocity bound"});
    if (k < n) {
      const double u = traj.u[k];
      if (u < lim.u_min - tol || u > lim.u_max + tol) out.push_back({k, "acceleration bound"});
      const State next = propagate(s, u, req.dt, lim);
      if (std::abs(next.x - traj.x[k + 1]) > 1e-9 || std::abs(next.v - traj.v[k + 1]) > 1e-9)
        out.push_back({k, "kinematic inconsistency"});
    }
    if (req.leader && req.leader->trajectory) {
      const Trajectory& lt = *req.leader->trajectory;
      const State lead = lt.state_at(t);
      const bool present = lt.covers(t) || lead.x < req.leader->span + req.leader->length;
      if (present && !rear_end_satisfied(s, lead, req.leader->length, r.u_min, tol))
        out.push_back({k, "rear-end safety"});
    }
    if (t < gate && s.x <= kEntryTolerance && !stoppable_before(s.x, s.v, 0.0, r.u_min, tol))
      out.push_back({k, "not stoppable before the intersection while gated"});
  }
  const CrossingTimes ct = boundary_crossing_times(traj, req.intersection_span, r.length);
  if (ct.entry && *ct.entry < gate - tol)
    out.push_back({0, "intersection entered before the gate opened"});
  return out;
}

std::optional<LeaderRef> lane_leader(const Robot& robot,
                                     const std::vector<const CommittedRobot*>& fixed,
                                     const LaneGeometry& geom) {
  const CommittedRobot* best = nullptr;
  for (const CommittedRobot* c : fixed) {
    if (c->robot.lane != robot.lane || c->robot.id == robot.id) continue;
    const bool ahead = c->robot.arrival_time < robot.arrival_time ||
                       (c->robot.arrival_time == robot.arrival_time && c->robot.id < robot.id);
    if (!ahead) continue;
    if (!best || c->robot.arrival_time > best->robot.arrival_time ||
        (c->robot.arrival_time == best->robot.arrival_time && c->robot.id > best->robot.id))
      best = c;
  }
  if (!best) return std::nullopt;
  return LeaderRef{&best->trajectory, best->robot.length,
                   geom.intersection_span[static_cast<std::size_t>(robot.lane)]};
}

std::map<int, VirtualTimes> solve_relaxed_joint(const CoordinationInstance& instance) {
  const LaneGeometry& geom = instance.geom();
  std::vector<const CommittedRobot*> fixed;
  for (const CommittedRobot& c : instance.committed) fixed.push_back(&c);
  std::deque<CommittedRobot> relaxed;

  std::vector<const PendingRobot*> order;
  for (const PendingRobot& p : instance.pending) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const PendingRobot* a, const PendingRobot* b) {
    if (a->robot.lane != b->robot.lane) return a->robot.lane < b->robot.lane;
    return a->state.x > b->state.x;
  });

  std::map<int, VirtualTimes> out;
  for (const PendingRobot* p : order) {
    SolveRequest req;
    req.robot = p->robot;
    req.initial = p->state;
    req.t_start = instance.t_now;
    req.t_end = instance.t_now + instance.T_h;
    req.dt = instance.dt;
    req.intersection_span = geom.intersection_span[static_cast<std::size_t>(p->robot.lane)];
    req.leader = lane_leader(p->robot, fixed, geom);
    SolveResult res = solve_max_progress(req);
    VirtualTimes vt;
    if (res.crossing.entry) vt.entry = *res.crossing.entry;
    if (res.crossing.exit) vt.exit = *res.crossing.exit;
    out[p->robot.id] = vt;
    relaxed.push_back({p->robot, std::move(res.trajectory), vt.exit});
    fixed.push_back(&relaxed.back());
  }
  return out;
}

}  // namespace intman
