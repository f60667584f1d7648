#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "intman/instance.hpp"
#include "intman/solver.hpp"

namespace intman {

/// Precedence index per pending robot id; larger crosses earlier.
using Precedence = std::map<int, double>;

/// Result of one sequential-optimization pass at a tick.
struct SequentialOutcome {
  std::vector<int> entered;   ///< granted coordinated trajectories, in order
  std::vector<int> deferred;  ///< a suffix of the processing order
  std::vector<int> order;     ///< entered followed by deferred
  std::map<int, Trajectory> trajectories;  ///< coordinated plans of entered robots
  std::size_t solves = 0;     ///< single-robot problems solved
};

/// Latest exit time among `fixed` robots on lanes conflicting with
/// `robot`; -infinity when there is none.
double min_wait_time(const Robot& robot, const std::vector<const CommittedRobot*>& fixed,
                     const LaneGeometry& geom);
double min_wait_time(const Robot& robot, const std::vector<CommittedRobot>& committed,
                     const LaneGeometry& geom);

/// Picks the highest-precedence robot among the per-lane front robots
/// (ties: earlier arrival, then lower id), solves its gated max-progress
/// problem and commits it if it exits by t_now + T_h; the first robot that
/// cannot is deferred together with all remaining ones.
SequentialOutcome sequential_optimization(const CoordinationInstance& instance,
                                          const Precedence& precedence);

/// Score of an outcome: priority-weighted progress of
/// entered robots over [t_now, t_now + T_h] plus, for deferred robots, the
/// progress of their next provisional phase over [t_now, t_now + T_c].
double sequence_objective(const CoordinationInstance& instance,
                          const SequentialOutcome& outcome);

/// Provisional (permanently gated) plans over [t_now, t_now + T_c] for the
/// deferred robots of `outcome`, front-to-back per lane.
std::map<int, Trajectory> deferred_provisional(const CoordinationInstance& instance,
                                               const SequentialOutcome& outcome);

/// Lane-consistent crossing orders: every interleaving of the per-lane
/// front-to-back queues.
std::vector<std::vector<int>> lane_consistent_orders(const CoordinationInstance& instance);

/// Precedence map realizing a crossing order.
Precedence precedence_from_order(const std::vector<int>& order);

struct BestSequenceResult {
  SequentialOutcome outcome;
  double objective = 0.0;
  std::size_t orders = 0;  ///< orders evaluated
};

/// Exhaustive search over lane-consistent orders (BESTSEQ). Shares solves
/// across common order prefixes. Throws SolveError{TooLarge} above `cap`.
BestSequenceResult best_sequence(const CoordinationInstance& instance, std::size_t cap = 8);

/// Reference implementation of best_sequence that runs
/// sequential_optimization once per enumerated order.
BestSequenceResult best_sequence_by_enumeration(const CoordinationInstance& instance,
                                                std::size_t cap = 8);

struct CombinedOracleOptions {
  OracleOptions dp{3, 300, 1e-3, 400000};
  std::size_t frontier_points = 3;  ///< exit/progress alternatives per robot
  std::size_t max_robots = 3;
};

/// Order enumeration over a joint quantized DP at toy scale. Each robot in
/// an order may take any point of its exit/progress frontier, so earlier
/// robots can trade progress for an earlier exit. Returns the best joint
/// score, never lower than best_sequence (its plan is feasible for the
/// combined problem). Throws SolveError{StateExplosion}/{TooLarge}.
double combined_toy_oracle(const CoordinationInstance& instance,
                           const CombinedOracleOptions& opts = {});

/// Hands out precedence indices at every tick.
class PrecedencePolicy {
 public:
  virtual ~PrecedencePolicy() = default;
  virtual std::string name() const = 0;
  virtual Precedence precedence(const CoordinationInstance& instance) = 0;
  /// FCFS bypasses the periodic coordinated phase entirely.
  virtual bool fcfs_mode() const { return false; }
  /// Called once before a stream; stochastic policies reseed here.
  virtual void reset(unsigned long long /*stream_seed*/) {}
};

}  // namespace intman
