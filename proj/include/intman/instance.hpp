#pragma once

#include <memory>
#include <vector>

#include "intman/geometry.hpp"
#include "intman/kinematics.hpp"

namespace intman {

/// A robot awaiting a coordinated trajectory at the current tick.
struct PendingRobot {
  Robot robot;
  State state;         ///< state at the tick
  Trajectory history;  ///< realized motion from arrival up to the tick
};

/// A robot executing a committed coordinated (or FCFS) trajectory.
struct CommittedRobot {
  Robot robot;
  Trajectory trajectory;  ///< realized history followed by the committed plan
  double exit_time = 0.0;
};

/// Snapshot handed to sequential optimization and to the policies:
/// V_p(k) with current states and V_s(k) with committed trajectories.
struct CoordinationInstance {
  int k = 0;
  double t_now = 0.0;  ///< k * T_c
  double T_c = 6.0;
  double T_h = 30.0;
  double dt = 0.1;
  std::shared_ptr<const LaneGeometry> geometry;
  std::vector<PendingRobot> pending;
  std::vector<CommittedRobot> committed;

  const LaneGeometry& geom() const { return *geometry; }
  const PendingRobot* find_pending(int id) const;
  /// Throws InputError if a pending robot is inside the intersection, if
  /// pending and committed overlap, or if lane ids are invalid.
  void validate() const;
};

}  // namespace intman
