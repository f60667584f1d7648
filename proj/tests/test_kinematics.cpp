#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "intman/errors.hpp"
#include "intman/geometry.hpp"
#include "intman/kinematics.hpp"

using namespace intman;

namespace {

// Fine explicit integration with the velocity clamp applied per substep.
State integrate_fine(State s, double u, double dt, double v_max) {
  const int n = 20000;
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const double v_next = std::clamp(s.v + u * h, 0.0, v_max);
    s.x += 0.5 * (s.v + v_next) * h;
    s.v = v_next;
  }
  return s;
}

}  // namespace

TEST_CASE("propagate examples") {
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  State s = propagate({0.0, 1.0}, 0.0, 0.1, lim);
  CHECK(s.x == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.v == doctest::Approx(1.0));
  s = propagate({0.0, 0.0}, 2.0, 0.1, lim);
  CHECK(s.x == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.v == doctest::Approx(0.2).epsilon(1e-12));
  s = propagate({0.0, 1.5}, 2.0, 0.1, lim);
  CHECK(s.x == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(s.v == 1.5);
}

TEST_CASE("propagate splits the step at the velocity bounds") {
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  // stops after 0.05 s: x = 0.1 * 0.05 - 0.5 * 2 * 0.05^2
  State s = propagate({0.0, 0.1}, -2.0, 0.1, lim);
  CHECK(s.v == 0.0);
  CHECK(s.x == doctest::Approx(0.0025).epsilon(1e-12));
  // reaches 1.5 after 0.05 s, then cruises 0.05 s
  s = propagate({0.0, 1.4}, 2.0, 0.1, lim);
  CHECK(s.v == 1.5);
  CHECK(s.x == doctest::Approx(1.4 * 0.05 + 0.5 * 2 * 0.0025 + 1.5 * 0.05).epsilon(1e-12));
}

TEST_CASE("propagate matches fine integration on random steps") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const KinematicLimits lim{-2.0, 2.0, U(rng) < 0.5 ? 1.0 : 1.5};
    const State s0{-7.0 + 7.0 * U(rng), lim.v_max * U(rng)};
    const double u = lim.u_min + (lim.u_max - lim.u_min) * U(rng);
    const double dt = 0.05 + 0.5 * U(rng);
    const State a = propagate(s0, u, dt, lim);
    const State b = integrate_fine(s0, u, dt, lim.v_max);
    CHECK(a.v == doctest::Approx(b.v).epsilon(1e-6));
    CHECK(std::abs(a.x - b.x) < 1e-6);
  }
}

TEST_CASE("stored trajectories replay exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  for (int trial = 0; trial < 20; ++trial) {
    Trajectory t = Trajectory::start(1.0, 0.1, {-7.0, 0.3});
    for (int k = 0; k < 100; ++k) t.push(U(rng), lim);
    REQUIRE(t.v.size() == t.u.size() + 1);
    State s{t.x[0], t.v[0]};
    for (std::size_t k = 0; k < t.steps(); ++k) {
      s = propagate(s, t.u[k], t.dt, lim);
      CHECK(std::abs(s.x - t.x[k + 1]) < 1e-9);
      CHECK(std::abs(s.v - t.v[k + 1]) < 1e-9);
      CHECK(t.v[k + 1] >= 0.0);
      CHECK(t.v[k + 1] <= lim.v_max);
      CHECK(t.u[k] >= lim.u_min);
      CHECK(t.u[k] <= lim.u_max);
    }
  }
}

TEST_CASE("stop distance and safe following distance") {
  CHECK(mbm_stop_distance(0.0, -2.0) == 0.0);
  CHECK(mbm_stop_distance(1.5, -2.0) == doctest::Approx(0.5625));
  CHECK(mbm_stop_distance(1.0, -2.0) == doctest::Approx(0.25));
  CHECK(safe_following_distance(1.2, 1.2, 0.75, -2.0) == doctest::Approx(0.75));
  CHECK(safe_following_distance(1.5, 0.0, 0.75, -2.0) == doctest::Approx(1.3125));
  CHECK(safe_following_distance(0.5, 1.5, 0.75, -2.0) == doctest::Approx(0.75));
}

TEST_CASE("rear-end check") {
  CHECK(rear_end_satisfied({0.0, 1.0}, {0.75, 1.0}, 0.75, -2.0, 0.0));
  CHECK_FALSE(rear_end_satisfied({0.0, 1.5}, {1.0, 0.0}, 0.75, -2.0, 0.0));
  CHECK(rear_end_satisfied({0.0, 1.0}, {2.0, 1.0}, 0.75, -2.0, 0.0));
}

TEST_CASE("stoppability") {
  CHECK(stoppable_before(-3.0, 0.0, 0.0, -2.0));
  CHECK(stoppable_before(0.0, 0.0, 0.0, -2.0));
  CHECK(stoppable_before(-0.5625, 1.5, 0.0, -2.0, 1e-12));
  CHECK_FALSE(stoppable_before(-0.5, 1.5, 0.0, -2.0));
}

TEST_CASE("maximum braking keeps the following gap") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double L = 0.75;
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  for (int trial = 0; trial < 300; ++trial) {
    State f{-7.0 * U(rng), 1.5 * U(rng)};
    State l{0.0, 1.5 * U(rng)};
    l.x = f.x + safe_following_distance(f.v, l.v, L, lim.u_min) + 1e-9 + 0.5 * U(rng) * (trial % 2);
    REQUIRE(rear_end_satisfied(f, l, L, lim.u_min));
    for (int k = 0; k < 2000 && (f.v > 0 || l.v > 0); ++k) {
      f = propagate(f, lim.u_min, 0.01, lim);
      l = propagate(l, lim.u_min, 0.01, lim);
      CHECK(l.x - f.x >= L - 1e-6);
    }
  }
}

TEST_CASE("stoppability is preserved by one braking step") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const State s{-2.0 * U(rng), 1.5 * U(rng)};
    if (!stoppable_before(s.x, s.v, 0.0, lim.u_min)) continue;
    ++checked;
    const State n = propagate(s, lim.u_min, 0.02 + 0.3 * U(rng), lim);
    CHECK(stoppable_before(n.x, n.v, 0.0, lim.u_min, 1e-12));
  }
  CHECK(checked > 200);
}

TEST_CASE("boundary crossing times") {
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  Trajectory t = Trajectory::start(2.0, 0.1, {-1.0, 1.0});
  for (int k = 0; k < 30; ++k) t.push(0.0, lim);
  CrossingTimes c = boundary_crossing_times(t, 2.8, 0.75);
  REQUIRE(c.entry);
  CHECK(*c.entry == doctest::Approx(3.0));
  CHECK_FALSE(c.exit);

  Trajectory short_t = Trajectory::start(0.0, 0.1, {-1.0, 1.0});
  for (int k = 0; k < 9; ++k) short_t.push(0.0, lim);
  CHECK_FALSE(boundary_crossing_times(short_t, 2.8, 0.75).entry);

  Trajectory e = Trajectory::start(1.0, 0.1, {0.0, 1.0});
  for (int k = 0; k < 40; ++k) e.push(0.0, lim);
  c = boundary_crossing_times(e, 2.8, 0.75);
  REQUIRE(c.exit);
  CHECK(*c.exit == doctest::Approx(4.55));

  const LaneGeometry g = default_warehouse_geometry();
  Robot r;
  r.lane = 2;
  c = boundary_crossing_times(e, g, r);
  CHECK(*c.exit == doctest::Approx(4.55));
}

TEST_CASE("trajectory lookup, slicing and appending") {
  const KinematicLimits lim{-2.0, 2.0, 1.5};
  Trajectory t = Trajectory::start(0.0, 0.1, {-7.0, 0.0});
  for (int k = 0; k < 30; ++k) t.push(1.0, lim);
  CHECK(t.index_of(1.0).value() == 10);
  CHECK_FALSE(t.index_of(1.05));
  CHECK(t.state_at(-5.0).x == -7.0);
  CHECK(t.state_at(100.0).x == t.x.back());
  const Trajectory a = t.slice(0.0, 1.0);
  Trajectory b = t.slice(1.0, 3.0);
  Trajectory joined = a;
  joined.append(b);
  CHECK(joined.x == t.x);
  CHECK(joined.u == t.u);
  Trajectory off = Trajectory::start(5.0, 0.1, {0.0, 0.0});
  off.push(0.0, lim);
  CHECK_THROWS_AS(joined.append(off), InputError);
}

TEST_CASE("robot parameter validation") {
  Robot r;
  CHECK_NOTHROW(r.validate());
  r.u_min = 0.5;
  CHECK_THROWS_AS(r.validate(), InputError);
  r = Robot{};
  r.priority = 0.0;
  CHECK_THROWS_AS(r.validate(), InputError);
}
