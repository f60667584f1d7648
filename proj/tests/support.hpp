#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "intman/coordination.hpp"
#include "intman/geometry.hpp"
#include "intman/solver.hpp"

namespace testing_support {

using namespace intman;

/// Random single-robot request: optional wandering leader, random gate,
/// horizon up to 6 s. The leader trajectory lives in `leader_store`.
inline SolveRequest random_request(std::mt19937_64& rng, Trajectory& leader_store) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  SolveRequest r;
  r.robot.v_max = U(rng) < 0.5 ? 1.5 : 1.0;
  r.robot.length = 0.75;
  r.t_start = 0.0;
  r.t_end = std::round((2.0 + 4.0 * U(rng)) * 10.0) / 10.0;
  r.dt = 0.1;
  if (U(rng) < 0.6) {
    Robot lead;
    lead.v_max = r.robot.v_max;
    leader_store = Trajectory::start(0.0, 0.1, {-5.5 + 8.5 * U(rng), U(rng) * lead.v_max});
    const int n = static_cast<int>(r.t_end / 0.1) + 1;
    double u = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k % 10 == 0) u = -2.0 + 4.0 * U(rng);
      leader_store.push(u, lead.limits());
    }
    r.leader = LeaderRef{&leader_store, 0.75, 2.8};
  }
  const double g = U(rng);
  if (g < 0.3)
    r.entry_gate = kForever;
  else if (g < 0.8)
    r.entry_gate = U(rng) * r.t_end;
  for (int tries = 0;; ++tries) {
    r.initial = {-7.0 + 7.0 * U(rng), U(rng) * r.robot.v_max};
    if (StepChecker(r).initial_ok(0.0)) break;
    if (tries > 1000) {
      r.initial = {-7.0, 0.0};
      break;
    }
  }
  return r;
}

inline std::shared_ptr<const LaneGeometry> shared_default_geometry() {
  return std::make_shared<const LaneGeometry>(default_warehouse_geometry());
}

inline PendingRobot pending(int id, int lane, double x, double v, double arrival = 0.0,
                            double priority = 1.0) {
  PendingRobot p;
  p.robot.id = id;
  p.robot.lane = lane;
  p.robot.arrival_time = arrival;
  p.robot.priority = priority;
  p.state = {x, v};
  p.history = Trajectory::start(arrival, 0.1, {x, v});
  return p;
}

/// Random instance: up to `max_pending` robots on random lanes, placed
/// front to back with stoppable, rear-end-safe states.
inline CoordinationInstance random_instance(std::mt19937_64& rng, std::size_t max_pending,
                                            double T_h = 30.0) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  CoordinationInstance inst;
  inst.k = 1;
  inst.t_now = 6.0;
  inst.T_h = T_h;
  inst.geometry = shared_default_geometry();
  const std::size_t n = 1 + rng() % max_pending;
  std::vector<double> lane_back(8, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int lane = static_cast<int>(rng() % 8);
    const double x = lane_back[lane] - (lane_back[lane] < 0 ? 1.0 + 0.5 * U(rng) : 0.2 + 2.0 * U(rng));
    if (x < -7.0) continue;
    const double vmax_stop = std::sqrt(2.0 * 2.0 * -x);
    const double v = std::min({1.5, vmax_stop, lane_back[lane] < 0 ? 0.3 : 1.5}) * U(rng);
    lane_back[lane] = x;
    PendingRobot p = pending(static_cast<int>(i), lane, x, v, 0.5 * static_cast<double>(i));
    p.history = Trajectory::start(inst.t_now, 0.1, {x, v});
    inst.pending.push_back(std::move(p));
  }
  return inst;
}

}  // namespace testing_support
