#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "intman/coordination.hpp"

namespace intman {

/// A robot of a generated stream before admission into the region.
struct ArrivalSpec {
  int id = 0;
  int lane = 0;
  double tentative_time = 0.0;  ///< Poisson arrival, before the rear-end delay
  double v0 = 0.0;              ///< desired entry velocity
  double priority = 1.0;
  double v_max = 1.5;
  double length = 0.75;  ///< effective length for every safety constraint
  double u_min = -2.0;
  double u_max = 2.0;
};

struct StreamConfig {
  std::shared_ptr<const LaneGeometry> geometry;
  double T_c = 6.0;
  double T_h = 30.0;
  double dt = 0.1;
  double stream_length = 300.0;
  /// Simulated time allowed after stream_length for the region to empty.
  double drain_limit = 1200.0;
  std::vector<ArrivalSpec> arrivals;
};

/// Everything recorded about one robot of a stream.
struct RobotRecord {
  Robot robot;  ///< arrival, coordination start, entry and exit filled in
  double tentative_time = 0.0;
  int provisional_rounds = 0;  ///< provisional phases before coordination
  Trajectory trajectory;       ///< realized motion from arrival to plan end
};

struct CoordinationEvent {
  int k = 0;
  double t = 0.0;
  std::size_t pending = 0;
  std::size_t entered = 0;
  std::vector<int> order;
};

/// Wall-clock cost of one coordination tick (or one FCFS solve), kept out
/// of the deterministic log.
struct TickTiming {
  int k = 0;
  std::size_t pending = 0;
  std::size_t solves = 0;
  double policy_us = 0.0;
  double sequential_us = 0.0;
};

struct SimulationLog {
  std::string policy;
  double T_c = 0.0;
  double T_h = 0.0;
  double dt = 0.0;
  double stream_length = 0.0;
  std::vector<RobotRecord> robots;  ///< in admission order
  std::vector<CoordinationEvent> events;
  std::vector<TickTiming> timings;
};

/// Hook into the periodic loop; the learning module collects transitions
/// through it.
class StreamObserver {
 public:
  virtual ~StreamObserver() = default;
  virtual void on_tick(const CoordinationInstance& /*instance*/,
                       const Precedence& /*precedence*/,
                       const SequentialOutcome& /*outcome*/) {}
  virtual void on_finish(const SimulationLog& /*log*/) {}
};

/// The full coordination loop over a stream. Robots are admitted at the first grid time
/// at or after their tentative arrival where the rear-end condition holds
/// at the region entry, with entry velocity min(v0, v_max, sqrt(2 mu d)).
/// New and deferred robots run provisional phases up to the next tick;
/// every T_c the policy orders the pending robots for sequential
/// optimization. A policy in FCFS mode instead plans each robot completely
/// on arrival. Runs until every robot has a committed plan.
SimulationLog run_stream(const StreamConfig& config, PrecedencePolicy& policy,
                         StreamObserver* observer = nullptr);

/// Post-hoc safety check of a log, recomputing crossing times from the
/// recorded trajectories: conflicting-lane occupancy overlaps above
/// `time_tol` and rear-end violations above `dist_tol` at any grid time.
std::vector<std::string> audit_safety(const SimulationLog& log, const LaneGeometry& geom,
                                      double time_tol = 1e-6, double dist_tol = 1e-6);

inline constexpr int kLogFormatVersion = 1;

/// Line-delimited JSON: a header line, one line per robot, one per event.
void write_log(std::ostream& os, const SimulationLog& log);
SimulationLog read_log(std::istream& is);

/// CSV of the per-tick wall-clock measurements.
void write_timings(std::ostream& os, const SimulationLog& log);

}  // namespace intman
