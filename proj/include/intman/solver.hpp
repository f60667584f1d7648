#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "intman/instance.hpp"
#include "intman/kinematics.hpp"

namespace intman {

/// Committed trajectory of the robot immediately ahead on the same lane.
/// The referenced trajectory must outlive the request.
struct LeaderRef {
  const Trajectory* trajectory = nullptr;
  double length = 0.0;
  double span = 0.0;  ///< intersection span of the shared lane
};

inline constexpr double kForever = std::numeric_limits<double>::infinity();

/// Single-robot maximal-progress problem. `entry_gate` is the earliest
/// permitted intersection entry time; kForever forbids entry over the
/// whole horizon (provisional phase).
struct SolveRequest {
  Robot robot;
  State initial;
  double t_start = 0.0;
  double t_end = 0.0;
  double dt = 0.1;
  double intersection_span = 2.8;
  std::optional<LeaderRef> leader;
  std::optional<double> entry_gate;

  std::size_t num_steps() const;
};

enum class SolveStatus { OptimalGreedy, OracleExact };

struct SolveResult {
  Trajectory trajectory;
  double objective = 0.0;  ///< integral of v over the horizon
  bool crossed = false;    ///< exit time within the horizon
  CrossingTimes crossing;
  SolveStatus status = SolveStatus::OptimalGreedy;
};

/// Feasibility tolerances shared by the greedy solver and the DP oracle.
inline constexpr double kSolverTol = 1e-9;

/// Per-step constraint evaluation shared by the greedy solver and the oracle.
class StepChecker {
 public:
  explicit StepChecker(const SolveRequest& req);

  /// True iff moving from `cur` at step k to `next` at step k+1 keeps the
  /// rear-end, gate and stoppability constraints to within `tol`.
  bool admissible(std::size_t k, State cur, State next, double tol = kSolverTol) const;
  /// Rear-end slack at step k (+inf when no leader constraint applies).
  double rear_slack(std::size_t k, State s) const;
  /// Stoppability slack at step k (+inf when the gate does not apply).
  double gate_slack(std::size_t k, State s) const;
  /// Whether the initial state satisfies the entry conditions.
  bool initial_ok(double tol) const;

 private:
  bool leader_active(std::size_t k) const { return leader_on_[k]; }

  const SolveRequest& req_;
  double gate_;
  std::vector<State> leader_states_;
  std::vector<bool> leader_on_;
};

/// Greedy invariant-preserving maximal progress: at every step the largest
/// admissible acceleration, found by bisection to 1e-6 m/s^2.
/// Throws SolveError{InfeasibleEntry} when the initial state breaks the
/// entry conditions.
SolveResult solve_max_progress(const SolveRequest& req);

struct OracleOptions {
  int u_levels = 5;
  /// Merge resolution: states whose velocities agree within v_max / v_levels
  /// and positions within x_resolution are merged, keeping the better one.
  long v_levels = 1000000;
  double x_resolution = 1e-7;
  std::size_t frontier_cap = 400000;
  /// Exit-time bucket width when exit times are tracked.
  double exit_resolution = 0.1;
};

/// Exact DP over the quantized control set with the same constraint checks
/// as the greedy solver. Throws SolveError{StateExplosion} past the cap.
SolveResult oracle_exact(const SolveRequest& req, const OracleOptions& opts = {});

/// One point of the oracle's exit-time/progress trade-off.
struct ExitTradeoff {
  double exit_time = kForever;
  double objective = 0.0;
  Trajectory trajectory;
};

/// Pareto frontier (earlier exit, more progress) over crossing trajectories
/// of the quantized DP, at most `max_points` entries, earliest exit first.
std::vector<ExitTradeoff> oracle_exit_frontier(const SolveRequest& req,
                                               const OracleOptions& opts,
                                               std::size_t max_points);

struct Violation {
  std::size_t step = 0;
  std::string what;
};

/// Independent re-check of a trajectory against bounds, kinematic
/// consistency, rear-end safety and the entry gate at every grid point.
std::vector<Violation> certify_trajectory(const SolveRequest& req, const Trajectory& traj,
                                          double tol = 1e-6);

struct VirtualTimes {
  double entry = kForever;
  double exit = kForever;
};

/// Combined problem at the tick without intersection mutual exclusion:
/// per lane front-to-back ungated solves.
std::map<int, VirtualTimes> solve_relaxed_joint(const CoordinationInstance& instance);

/// Leader for `robot` among trajectories already fixed on its lane: the
/// latest arrival on the same lane.
std::optional<LeaderRef> lane_leader(const Robot& robot,
                                     const std::vector<const CommittedRobot*>& fixed,
                                     const LaneGeometry& geom);

}  // namespace intman
