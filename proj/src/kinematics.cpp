#include "intman/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "intman/errors.hpp"
#include "intman/geometry.hpp"

namespace intman {

void Robot::validate() const {
  if (!(length > 0) || !(v_max > 0) || !(u_min < 0) || !(u_max > 0) || !(priority > 0))
    throw InputError("robot " + std::to_string(id) + ": invalid kinematic parameters");
}

Trajectory Trajectory::start(double t0, double dt, State initial) {
  Trajectory t;
  t.t0 = t0;
  t.dt = dt;
  t.v.push_back(initial.v);
  t.x.push_back(initial.x);
  return t;
}

std::optional<std::size_t> Trajectory::index_of(double t) const {
  const double k = (t - t0) / dt;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6 || r < 0 || r > static_cast<double>(steps()))
    return std::nullopt;
  return static_cast<std::size_t>(r);
}

bool Trajectory::covers(double t) const {
  return !empty() && t >= t0 - 1e-9 && t <= t_end() + 1e-9;
}

State Trajectory::state_at(double t) const {
  const double k = std::round((t - t0) / dt);
  if (k <= 0) return state_at_index(0);
  if (k >= static_cast<double>(steps())) return final_state();
  return state_at_index(static_cast<std::size_t>(k));
}

void Trajectory::push(double u_cmd, const KinematicLimits& limits) {
  const State next = propagate(final_state(), u_cmd, dt, limits);
  u.push_back(u_cmd);
  v.push_back(next.v);
  x.push_back(next.x);
}

void Trajectory::append(const Trajectory& tail) {
  if (tail.empty()) return;
  if (empty()) {
    *this = tail;
    return;
  }
  if (std::abs(tail.t0 - t_end()) > 1e-6 || std::abs(tail.dt - dt) > 1e-12)
    throw InputError("trajectory append: tail does not start at the end of this trajectory");
  u.insert(u.end(), tail.u.begin(), tail.u.end());
  v.insert(v.end(), tail.v.begin() + 1, tail.v.end());
  x.insert(x.end(), tail.x.begin() + 1, tail.x.end());
}

Trajectory Trajectory::slice(double t_from, double t_to) const {
  const auto a = index_of(std::max(t_from, t0));
  const auto b = index_of(std::min(t_to, t_end()));
  if (!a || !b || *b < *a) throw InputError("trajectory slice: interval off the grid");
  Trajectory out = start(time_at(*a), dt, state_at_index(*a));
  out.u.assign(u.begin() + static_cast<std::ptrdiff_t>(*a),
               u.begin() + static_cast<std::ptrdiff_t>(*b));
  out.v.assign(v.begin() + static_cast<std::ptrdiff_t>(*a),
               v.begin() + static_cast<std::ptrdiff_t>(*b) + 1);
  out.x.assign(x.begin() + static_cast<std::ptrdiff_t>(*a),
               x.begin() + static_cast<std::ptrdiff_t>(*b) + 1);
  return out;
}

State propagate(State s, double u, double dt, const KinematicLimits& limits) {
  const double v_end = s.v + u * dt;
  if (u > 0 && v_end > limits.v_max) {
    const double th = std::max(0.0, (limits.v_max - s.v) / u);
    if (th >= dt) return {s.x + s.v * dt + 0.5 * u * dt * dt, v_end};
    const double x_hit = s.x + s.v * th + 0.5 * u * th * th;
    return {x_hit + limits.v_max * (dt - th), limits.v_max};
  }
  if (u < 0 && v_end < 0) {
    const double th = std::max(0.0, -s.v / u);
    if (th >= dt) return {s.x + s.v * dt + 0.5 * u * dt * dt, v_end};
    return {s.x + s.v * th + 0.5 * u * th * th, 0.0};
  }
  return {s.x + s.v * dt + 0.5 * u * dt * dt, v_end};
}

double mbm_stop_distance(double v, double u_min) { return v * v / (-2.0 * u_min); }

double safe_following_distance(double v_follower, double v_leader,
                               double leader_length, double u_min) {
  const double diff = (v_follower * v_follower - v_leader * v_leader) / (-2.0 * u_min);
  return leader_length + std::max(0.0, diff);
}

bool rear_end_satisfied(State follower, State leader, double leader_length,
                        double u_min, double tol) {
  return leader.x - follower.x >=
         safe_following_distance(follower.v, leader.v, leader_length, u_min) - tol;
}

bool stoppable_before(double x, double v, double boundary, double u_min, double tol) {
  return v * v <= 2.0 * (-u_min) * (boundary - x) + tol;
}

double interpolate_crossing(double t_k, double dt, double x_k, double x_next,
                            double level) {
  if (x_k >= level) return t_k;
  const double frac = (level - x_k) / (x_next - x_k);
  return t_k + dt * std::clamp(frac, 0.0, 1.0);
}

CrossingTimes boundary_crossing_times(const Trajectory& traj, double span,
                                      double length) {
  CrossingTimes out;
  if (traj.empty()) return out;
  const double exit_level = span + length;
  if (traj.x[0] > kEntryTolerance) out.entry = traj.t0;
  if (traj.x[0] >= exit_level) out.exit = traj.t0;
  for (std::size_t k = 0; k < traj.steps() && !(out.entry && out.exit); ++k) {
    const double xk = traj.x[k];
    const double xn = traj.x[k + 1];
    if (!out.entry && xn > kEntryTolerance)
      out.entry = interpolate_crossing(traj.time_at(k), traj.dt, xk, xn, 0.0);
    if (!out.exit && xn >= exit_level)
      out.exit = interpolate_crossing(traj.time_at(k), traj.dt, xk, xn, exit_level);
  }
  return out;
}

CrossingTimes boundary_crossing_times(const Trajectory& traj, const LaneGeometry& geom,
                                      const Robot& robot) {
  return boundary_crossing_times(traj, geom.intersection_span[static_cast<std::size_t>(robot.lane)],
                                 robot.length);
}

}  // namespace intman
