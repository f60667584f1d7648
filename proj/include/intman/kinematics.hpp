#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace intman {

struct LaneGeometry;

struct KinematicLimits {
  double u_min = -2.0;
  double u_max = 2.0;
  double v_max = 1.5;
};

/// Longitudinal state of a robot's front end along its lane.
struct State {
  double x = 0.0;
  double v = 0.0;
};

struct Robot {
  int id = 0;
  int lane = 0;
  double length = 0.75;  ///< effective length used by every safety constraint
  double priority = 1.0;
  double v_max = 1.5;
  double u_min = -2.0;
  double u_max = 2.0;
  double arrival_time = 0.0;
  std::optional<double> coord_start;
  std::optional<double> entry_time;
  std::optional<double> exit_time;

  KinematicLimits limits() const { return {u_min, u_max, v_max}; }
  /// Throws InputError when a bound or weight is out of range.
  void validate() const;
};

/// Uniformly sampled acceleration/velocity/position profile.
///
/// u[k] is held over [t0 + k dt, t0 + (k+1) dt); v and x are exact
/// double-integrator states at the grid points, so v.size() == u.size() + 1.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.1;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> x;

  static Trajectory start(double t0, double dt, State initial);

  std::size_t steps() const { return u.size(); }
  bool empty() const { return v.empty(); }
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double t_end() const { return time_at(steps()); }
  State state_at_index(std::size_t k) const { return {x[k], v[k]}; }
  State final_state() const { return {x.back(), v.back()}; }

  /// Grid index for time t, if t lies on this trajectory's grid and span.
  std::optional<std::size_t> index_of(double t) const;
  /// State at grid time t. Before t0 returns the initial state, beyond the
  /// horizon the final state.
  State state_at(double t) const;
  bool covers(double t) const;

  /// Applies one control sample and records the resulting grid state.
  void push(double u_cmd, const KinematicLimits& limits);
  /// Appends `tail`, which must start at this trajectory's final grid time
  /// with a matching state.
  void append(const Trajectory& tail);
  /// Sub-trajectory over the grid interval [t_from, t_to].
  Trajectory slice(double t_from, double t_to) const;
};

/// Exact double-integrator step. When a velocity bound is reached inside the
/// step, the step is split at the hitting time so the position is exact.
State propagate(State s, double u, double dt, const KinematicLimits& limits);

/// Distance covered under maximum braking from speed v.
double mbm_stop_distance(double v, double u_min);

/// L_j + max{0, (v_i^2 - v_j^2) / (-2 u_min)}.
double safe_following_distance(double v_follower, double v_leader,
                               double leader_length, double u_min);

bool rear_end_satisfied(State follower, State leader, double leader_length,
                        double u_min, double tol = 0.0);

/// v^2 <= 2 (-u_min) (boundary - x) + tol.
bool stoppable_before(double x, double v, double boundary, double u_min,
                      double tol = 0.0);

struct CrossingTimes {
  std::optional<double> entry;
  std::optional<double> exit;
};

/// Positions within this distance of 0 count as "at", not "inside", the
/// intersection.
inline constexpr double kEntryTolerance = 1e-9;

/// Time the front crosses x = 0 and the time it reaches span + length (rear
/// clears the intersection), linearly interpolated within a step.
CrossingTimes boundary_crossing_times(const Trajectory& traj, double span,
                                      double length);
CrossingTimes boundary_crossing_times(const Trajectory& traj,
                                      const LaneGeometry& geom, const Robot& robot);

/// Interpolated time within [t_k, t_k + dt] at which the segment from x_k to
/// x_next reaches `level`.
double interpolate_crossing(double t_k, double dt, double x_k, double x_next,
                            double level);

}  // namespace intman
