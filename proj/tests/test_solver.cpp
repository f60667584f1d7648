#include <doctest.h>

#include <cmath>
#include <random>

#include "intman/errors.hpp"
#include "intman/solver.hpp"
#include "support.hpp"

using namespace intman;
using testing_support::random_request;

namespace {

SolveRequest provisional_7m() {
  SolveRequest r;
  r.initial = {-7.0, 0.0};
  r.t_start = 0.0;
  r.t_end = 6.0;
  r.entry_gate = kForever;
  return r;
}

}  // namespace

TEST_CASE("provisional phase on an empty lane stops at the boundary") {
  const SolveResult res = solve_max_progress(provisional_7m());
  const State f = res.trajectory.final_state();
  // bang-bang: 0.75 s up, 3.92 s cruise, 0.75 s down fits in 6 s
  CHECK(f.x == doctest::Approx(0.0).epsilon(1e-6).scale(1.0));
  CHECK(std::abs(f.x) < 1e-6);
  CHECK(f.v < 1e-3);
  CHECK(res.objective == doctest::Approx(7.0).epsilon(1e-6));
  CHECK_FALSE(res.crossed);
  CHECK(certify_trajectory(provisional_7m(), res.trajectory).empty());
}

TEST_CASE("ungated cruise") {
  SolveRequest r;
  r.initial = {0.0, 1.5};
  r.t_end = 4.0;
  const SolveResult res = solve_max_progress(r);
  CHECK(res.objective == doctest::Approx(1.5 * 4.0).epsilon(1e-12));
  CHECK(res.crossed);
}

TEST_CASE("follower at the safe distance behind a stopped leader stays put") {
  Trajectory lead = Trajectory::start(0.0, 0.1, {-2.0, 0.0});
  for (int k = 0; k < 60; ++k) lead.push(0.0, {-2.0, 2.0, 1.5});
  SolveRequest r;
  r.initial = {-2.75, 0.0};
  r.t_end = 6.0;
  r.leader = LeaderRef{&lead, 0.75, 2.8};
  r.entry_gate = kForever;
  const SolveResult res = solve_max_progress(r);
  for (double v : res.trajectory.v) CHECK(v < 1e-9);
  CHECK(res.objective < 1e-9);
}

TEST_CASE("objective equals progress") {
  std::mt19937_64 rng(21);
  Trajectory store;
  for (int i = 0; i < 50; ++i) {
    const SolveRequest r = random_request(rng, store);
    const SolveResult res = solve_max_progress(r);
    CHECK(std::abs(res.objective - (res.trajectory.x.back() - res.trajectory.x.front())) < 1e-9);
  }
}

TEST_CASE("infeasible entry is reported") {
  SolveRequest r;
  r.initial = {-0.1, 1.5};
  r.t_end = 2.0;
  r.entry_gate = kForever;
  CHECK_THROWS_AS(solve_max_progress(r), SolveError);
  try {
    solve_max_progress(r);
  } catch (const SolveError& e) {
    CHECK(e.kind() == SolveErrorKind::InfeasibleEntry);
  }
}

TEST_CASE("oracle examples") {
  SolveRequest zero;
  zero.initial = {-3.0, 1.0};
  zero.t_end = 0.0;
  CHECK(oracle_exact(zero).objective == 0.0);

  OracleOptions three;
  three.u_levels = 3;
  const SolveResult prov = oracle_exact(provisional_7m(), three);
  CHECK(prov.objective >= 0.98 * 7.0);
  CHECK(prov.objective <= 7.0 + 1e-6);

  SolveRequest cruise;
  cruise.initial = {-1.0, 1.5};
  cruise.t_end = 3.0;
  CHECK(oracle_exact(cruise).objective == doctest::Approx(solve_max_progress(cruise).objective).epsilon(1e-12));
}

TEST_CASE("greedy is never worse than the DP oracle and always certifies") {
  std::mt19937_64 rng(1);
  Trajectory store;
  OracleOptions opts;
  opts.v_levels = 300;
  opts.x_resolution = 1e-3;
  for (int i = 0; i < 25; ++i) {
    const SolveRequest r = random_request(rng, store);
    const SolveResult g = solve_max_progress(r);
    const SolveResult d = oracle_exact(r, opts);
    CHECK(g.objective >= d.objective - 0.01 * std::abs(d.objective) - 1e-9);
    CHECK(certify_trajectory(r, g.trajectory).empty());
    CHECK(certify_trajectory(r, d.trajectory).empty());
  }
}

TEST_CASE("greedy trajectories certify on random requests") {
  std::mt19937_64 rng(2);
  Trajectory store;
  for (int i = 0; i < 300; ++i) {
    const SolveRequest r = random_request(rng, store);
    const auto v = certify_trajectory(r, solve_max_progress(r).trajectory);
    CHECK(v.empty());
  }
}

TEST_CASE("an earlier gate never lowers the objective") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Trajectory store;
  for (int i = 0; i < 100; ++i) {
    SolveRequest r = random_request(rng, store);
    const double g1 = U(rng) * r.t_end;
    const double g2 = g1 + U(rng) * (r.t_end - g1);
    r.entry_gate = g2;
    if (!StepChecker(r).initial_ok(0.0)) continue;
    const double later = solve_max_progress(r).objective;
    r.entry_gate = g1;
    const double earlier = solve_max_progress(r).objective;
    r.entry_gate.reset();
    const double none = solve_max_progress(r).objective;
    CHECK(earlier >= later - 1e-6);
    CHECK(none >= earlier - 1e-6);
  }
}

TEST_CASE("entry respects the gate") {
  std::mt19937_64 rng(6);
  Trajectory store;
  for (int i = 0; i < 200; ++i) {
    const SolveRequest r = random_request(rng, store);
    const SolveResult res = solve_max_progress(r);
    if (r.entry_gate && res.crossing.entry && r.initial.x <= kEntryTolerance)
      CHECK(*res.crossing.entry >= *r.entry_gate - r.dt);
  }
}

TEST_CASE("certifier flags broken trajectories") {
  SolveRequest r = provisional_7m();
  SolveResult res = solve_max_progress(r);
  Trajectory bad = res.trajectory;
  bad.x[10] += 0.5;
  CHECK_FALSE(certify_trajectory(r, bad).empty());
  Trajectory fast = Trajectory::start(0.0, 0.1, {-7.0, 0.0});
  for (int k = 0; k < 60; ++k) fast.push(2.0, r.robot.limits());
  CHECK_FALSE(certify_trajectory(r, fast).empty());
}

TEST_CASE("relaxed joint solve") {
  using testing_support::pending;
  CoordinationInstance inst;
  inst.geometry = testing_support::shared_default_geometry();
  inst.t_now = 0.0;
  inst.T_h = 30.0;

  SUBCASE("single robot reaches the line as early as it can") {
    inst.pending = {pending(0, 0, -7.0, 0.0)};
    const auto vt = solve_relaxed_joint(inst);
    // 0.75 s to reach 1.5 m/s over 0.5625 m, then cruise 6.4375 m
    CHECK(vt.at(0).entry == doctest::Approx(0.75 + 6.4375 / 1.5).epsilon(1e-3));
  }
  SUBCASE("conflicting robots do not interact") {
    inst.pending = {pending(0, 0, -7.0, 0.0), pending(1, 1, -7.0, 0.0)};
    const auto vt = solve_relaxed_joint(inst);
    CHECK(vt.at(0).entry == doctest::Approx(vt.at(1).entry));
  }
  SUBCASE("same-lane follower enters later") {
    inst.pending = {pending(0, 0, -5.0, 0.0, 0.0), pending(1, 0, -6.0, 0.0, 1.0)};
    const auto vt = solve_relaxed_joint(inst);
    CHECK(vt.at(1).entry > vt.at(0).entry);
  }
}
