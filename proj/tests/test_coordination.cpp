#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "intman/coordination.hpp"
#include "intman/errors.hpp"
#include "support.hpp"

using namespace intman;
using testing_support::pending;
using testing_support::random_instance;

namespace {

CoordinationInstance empty_instance(double T_h = 30.0) {
  CoordinationInstance inst;
  inst.geometry = testing_support::shared_default_geometry();
  inst.t_now = 0.0;
  inst.T_h = T_h;
  return inst;
}

CommittedRobot committed_on(int id, int lane, double exit) {
  CommittedRobot c;
  c.robot.id = id;
  c.robot.lane = lane;
  c.exit_time = exit;
  c.trajectory = Trajectory::start(0.0, 0.1, {5.0, 1.5});
  return c;
}

}  // namespace

TEST_CASE("minimum wait time") {
  const LaneGeometry g = default_warehouse_geometry();
  Robot r;
  r.lane = 0;
  CHECK(min_wait_time(r, std::vector<CommittedRobot>{}, g) == -kForever);
  CHECK(min_wait_time(r, {committed_on(1, 4, 20.0)}, g) == -kForever);  // parallel lane
  CHECK(min_wait_time(r, {committed_on(1, 1, 12.3)}, g) == 12.3);
  CHECK(min_wait_time(r, {committed_on(1, 1, 10.0), committed_on(2, 3, 14.0)}, g) == 14.0);
}

TEST_CASE("only front robots of each lane are candidates") {
  CoordinationInstance inst = empty_instance();
  inst.pending = {pending(0, 0, -2.0, 0.0, 0.0), pending(1, 0, -4.0, 0.0, 1.0)};
  const SequentialOutcome out = sequential_optimization(inst, {{0, 0.0}, {1, 10.0}});
  REQUIRE(out.order.size() == 2);
  CHECK(out.order[0] == 0);
}

TEST_CASE("single robot enters at its earliest arrival") {
  CoordinationInstance inst = empty_instance();
  inst.pending = {pending(0, 2, -7.0, 0.0)};
  const SequentialOutcome out = sequential_optimization(inst, {{0, 1.0}});
  REQUIRE(out.entered.size() == 1);
  SolveRequest req;
  req.initial = {-7.0, 0.0};
  req.t_end = 30.0;
  const SolveResult dp = oracle_exact(req);
  const auto ct = boundary_crossing_times(out.trajectories.at(0), 2.8, 0.75);
  CHECK(*ct.entry == doctest::Approx(*dp.crossing.entry).epsilon(1e-3));
}

TEST_CASE("robot that cannot exit within the horizon is deferred with everyone after it") {
  CoordinationInstance inst = empty_instance(10.0);
  inst.committed = {committed_on(9, 1, 9.0)};
  inst.pending = {pending(0, 0, -7.0, 0.0, 0.0), pending(1, 2, -7.0, 0.0, 1.0),
                  pending(2, 4, -7.0, 0.0, 2.0)};
  const SequentialOutcome out = sequential_optimization(inst, {{0, 3.0}, {1, 2.0}, {2, 1.0}});
  CHECK(out.entered.empty());
  CHECK(out.deferred == std::vector<int>{0, 1, 2});
}

TEST_CASE("deferred robots form a suffix and entered plus deferred is the pending set") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    CoordinationInstance inst = random_instance(rng, 6, 12.0);
    Precedence p;
    for (const PendingRobot& r : inst.pending) p[r.robot.id] = U(rng);
    const SequentialOutcome out = sequential_optimization(inst, p);
    std::vector<int> joined = out.entered;
    joined.insert(joined.end(), out.deferred.begin(), out.deferred.end());
    CHECK(joined == out.order);
    std::set<int> ids;
    for (const PendingRobot& r : inst.pending) ids.insert(r.robot.id);
    CHECK(std::set<int>(joined.begin(), joined.end()) == ids);
  }
}

TEST_CASE("strictly increasing relabeling leaves the outcome unchanged") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    CoordinationInstance inst = random_instance(rng, 5);
    Precedence p, q;
    for (const PendingRobot& r : inst.pending) {
      p[r.robot.id] = U(rng);
      q[r.robot.id] = std::exp(2.0 * p[r.robot.id]) + 7.0;
    }
    const SequentialOutcome a = sequential_optimization(inst, p);
    const SequentialOutcome b = sequential_optimization(inst, q);
    CHECK(a.order == b.order);
    CHECK(a.entered == b.entered);
    for (const auto& [id, t] : a.trajectories) CHECK(t.x == b.trajectories.at(id).x);
  }
}

TEST_CASE("granted trajectories keep conflicting lanes apart") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const LaneGeometry g = default_warehouse_geometry();
  for (int trial = 0; trial < 30; ++trial) {
    CoordinationInstance inst = random_instance(rng, 6);
    Precedence p;
    for (const PendingRobot& r : inst.pending) p[r.robot.id] = U(rng);
    const SequentialOutcome out = sequential_optimization(inst, p);
    for (int a : out.entered)
      for (int b : out.entered) {
        if (a >= b) continue;
        const Robot& ra = inst.find_pending(a)->robot;
        const Robot& rb = inst.find_pending(b)->robot;
        if (conflict_value(g, ra.lane, rb.lane) != -1) continue;
        const auto ca = boundary_crossing_times(out.trajectories.at(a), g, ra);
        const auto cb = boundary_crossing_times(out.trajectories.at(b), g, rb);
        const bool disjoint = *ca.exit <= *cb.entry + 1e-6 || *cb.exit <= *ca.entry + 1e-6;
        CHECK(disjoint);
      }
  }
}

TEST_CASE("lane-consistent orders are the multiset permutations") {
  CoordinationInstance inst = empty_instance();
  inst.pending = {pending(0, 0, -1.0, 0.0, 0.0), pending(1, 0, -3.0, 0.0, 1.0),
                  pending(2, 1, -2.0, 0.0, 0.5), pending(3, 2, -2.0, 0.0, 0.7)};
  const auto orders = lane_consistent_orders(inst);
  CHECK(orders.size() == 12);  // 4! / 2!
  for (const auto& o : orders) {
    const auto p0 = std::find(o.begin(), o.end(), 0);
    const auto p1 = std::find(o.begin(), o.end(), 1);
    CHECK(p0 < p1);
  }
}

TEST_CASE("best sequence examples") {
  SUBCASE("one robot") {
    CoordinationInstance inst = empty_instance();
    inst.pending = {pending(0, 0, -5.0, 0.5)};
    const auto bs = best_sequence(inst);
    CHECK(bs.orders == 1);
  }
  SUBCASE("closer robot first on conflicting lanes") {
    CoordinationInstance inst = empty_instance(15.0);
    inst.pending = {pending(0, 0, -6.0, 0.0), pending(1, 1, -5.0, 0.0)};
    const double first0 =
        sequence_objective(inst, sequential_optimization(inst, precedence_from_order({0, 1})));
    const double first1 =
        sequence_objective(inst, sequential_optimization(inst, precedence_from_order({1, 0})));
    CHECK(first1 > first0);
    const auto bs = best_sequence(inst);
    CHECK(bs.outcome.order.front() == 1);
    CHECK(bs.objective == doctest::Approx(first1));
  }
  SUBCASE("non-conflicting lanes are order independent") {
    CoordinationInstance inst = empty_instance(15.0);
    inst.pending = {pending(0, 0, -6.0, 0.0), pending(1, 4, -5.0, 0.0)};
    const double a =
        sequence_objective(inst, sequential_optimization(inst, precedence_from_order({0, 1})));
    const double b =
        sequence_objective(inst, sequential_optimization(inst, precedence_from_order({1, 0})));
    CHECK(std::abs(a - b) < 1e-6);
  }
}

TEST_CASE("best sequence agrees with plain enumeration") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 25; ++trial) {
    const CoordinationInstance inst = random_instance(rng, 5, 15.0);
    const auto fast = best_sequence(inst);
    const auto slow = best_sequence_by_enumeration(inst);
    CHECK(fast.objective == doctest::Approx(slow.objective).epsilon(1e-12));
    CHECK(fast.orders == slow.orders);
  }
}

TEST_CASE("best sequence refuses large instances") {
  std::mt19937_64 rng(35);
  CoordinationInstance inst = empty_instance();
  for (int i = 0; i < 9; ++i) inst.pending.push_back(pending(i, i % 8, -7.0 + 0.5 * (i / 8), 0.0, i));
  try {
    best_sequence(inst);
    FAIL("expected an exception");
  } catch (const SolveError& e) {
    CHECK(e.kind() == SolveErrorKind::TooLarge);
  }
}

TEST_CASE("combined toy oracle examples") {
  CombinedOracleOptions opts;
  SUBCASE("one robot") {
    CoordinationInstance inst = empty_instance(8.0);
    inst.pending = {pending(0, 0, -4.0, 0.8)};
    CHECK(combined_toy_oracle(inst, opts) == best_sequence(inst).objective);
  }
  SUBCASE("separable robots") {
    CoordinationInstance inst = empty_instance(8.0);
    inst.pending = {pending(0, 0, -4.0, 0.8, 0.0, 2.0), pending(1, 4, -3.0, 0.2)};
    double independent = 0.0;
    for (const PendingRobot& p : inst.pending) {
      SolveRequest r;
      r.robot = p.robot;
      r.initial = p.state;
      r.t_end = 8.0;
      independent += p.robot.priority * solve_max_progress(r).objective;
    }
    CHECK(combined_toy_oracle(inst, opts) == doctest::Approx(independent).epsilon(1e-9));
  }
  SUBCASE("symmetric conflicting pair") {
    CoordinationInstance inst = empty_instance(8.0);
    inst.pending = {pending(0, 0, -3.0, 0.5), pending(1, 1, -3.0, 0.5)};
    const double co = combined_toy_oracle(inst, opts);
    const double bs = best_sequence(inst).objective;
    CHECK(co >= bs);
    CHECK((co - bs) / co <= 0.05);
  }
  SUBCASE("too many robots") {
    CoordinationInstance inst = empty_instance(8.0);
    for (int i = 0; i < 4; ++i) inst.pending.push_back(pending(i, i, -3.0, 0.0));
    CHECK_THROWS_AS(combined_toy_oracle(inst, opts), SolveError);
  }
}

TEST_CASE("deferred robots get gated provisional plans") {
  CoordinationInstance inst = empty_instance(10.0);
  inst.T_c = 6.0;
  inst.committed = {committed_on(9, 1, 9.0)};
  inst.pending = {pending(0, 0, -7.0, 0.0, 0.0), pending(1, 0, -7.0 + 0.0, 0.0, 1.0)};
  inst.pending[1].state.x = -7.0;
  inst.pending[0].state.x = -5.0;
  const SequentialOutcome out = sequential_optimization(inst, {{0, 1.0}, {1, 0.0}});
  const auto prov = deferred_provisional(inst, out);
  for (int id : out.deferred) {
    const Trajectory& t = prov.at(id);
    CHECK(t.t_end() == doctest::Approx(6.0));
    CHECK(t.x.back() <= kEntryTolerance);
  }
}

TEST_CASE("invalid instances are rejected") {
  CoordinationInstance inst = empty_instance();
  inst.pending = {pending(0, 0, 0.5, 1.0)};
  CHECK_THROWS_AS(sequential_optimization(inst, {{0, 1.0}}), InputError);
  inst.pending = {pending(0, 9, -1.0, 0.0)};
  CHECK_THROWS_AS(sequential_optimization(inst, {{0, 1.0}}), InputError);
  inst.pending = {pending(0, 0, -1.0, 0.0)};
  CHECK_THROWS_AS(sequential_optimization(inst, {}), InputError);
}
