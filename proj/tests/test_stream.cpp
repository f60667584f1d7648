#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "intman/errors.hpp"
#include "intman/policies.hpp"
#include "intman/scenario.hpp"
#include "intman/stream.hpp"
#include "support.hpp"

using namespace intman;

namespace {

StreamConfig config_with(std::vector<ArrivalSpec> arrivals, double T_h = 30.0) {
  StreamConfig c;
  c.geometry = testing_support::shared_default_geometry();
  c.T_h = T_h;
  c.stream_length = 60.0;
  c.arrivals = std::move(arrivals);
  return c;
}

ArrivalSpec arrival(int id, int lane, double t, double v0 = 0.5) {
  ArrivalSpec a;
  a.id = id;
  a.lane = lane;
  a.tentative_time = t;
  a.v0 = v0;
  return a;
}

Scenario small_scenario(double rate) {
  Scenario s = with_rate(Scenario{}, rate);
  s.stream_length = 90.0;
  s.transient_cutoff = 0.0;
  return s;
}

std::string dump(const SimulationLog& log) {
  std::ostringstream os;
  write_log(os, log);
  return os.str();
}

class CountingObserver : public StreamObserver {
 public:
  int ticks = 0;
  int finished = 0;
  void on_tick(const CoordinationInstance&, const Precedence&, const SequentialOutcome&) override {
    ++ticks;
  }
  void on_finish(const SimulationLog&) override { ++finished; }
};

}  // namespace

TEST_CASE("no arrivals give an empty log") {
  HeuristicPolicy ttr(HeuristicKind::TTR);
  const SimulationLog log = run_stream(config_with({}), ttr);
  CHECK(log.robots.empty());
  CHECK(log.events.empty());
  FcfsPolicy fcfs;
  CHECK(run_stream(config_with({}), fcfs).robots.empty());
}

TEST_CASE("a lone robot is planned the same way by every periodic policy") {
  const StreamConfig cfg = config_with({arrival(0, 3, 2.35, 1.0)});
  std::vector<std::unique_ptr<PrecedencePolicy>> policies;
  policies.push_back(std::make_unique<HeuristicPolicy>(HeuristicKind::TTR));
  policies.push_back(std::make_unique<HeuristicPolicy>(HeuristicKind::PDT));
  policies.push_back(std::make_unique<HeuristicPolicy>(HeuristicKind::CDT));
  policies.push_back(std::make_unique<OcpPolicy>());
  policies.push_back(std::make_unique<RandomPolicy>(5));
  policies.push_back(std::make_unique<BestSeqPolicy>());
  const SimulationLog ref = run_stream(cfg, *policies[0]);
  REQUIRE(ref.robots.size() == 1);
  for (auto& p : policies) {
    const SimulationLog log = run_stream(cfg, *p);
    CHECK(log.robots[0].trajectory.x == ref.robots[0].trajectory.x);
    CHECK(log.robots[0].robot.exit_time == ref.robots[0].robot.exit_time);
  }
}

TEST_CASE("fcfs plans a lone robot with the ungated optimum") {
  FcfsPolicy fcfs;
  const SimulationLog log = run_stream(config_with({arrival(0, 0, 1.0, 1.2)}), fcfs);
  REQUIRE(log.robots.size() == 1);
  const RobotRecord& r = log.robots[0];
  SolveRequest req;
  req.robot = r.robot;
  req.initial = {-7.0, 1.2};
  req.t_start = r.robot.arrival_time;
  req.t_end = req.t_start + r.trajectory.t_end() - r.trajectory.t0;
  const SolveResult solo = solve_max_progress(req);
  CHECK(r.trajectory.x == solo.trajectory.x);
  CHECK(r.provisional_rounds == 0);
}

TEST_CASE("fcfs gates a conflicting follower by the first exit") {
  FcfsPolicy fcfs;
  const SimulationLog log = run_stream(config_with({arrival(0, 0, 1.0), arrival(1, 1, 1.1)}), fcfs);
  REQUIRE(log.robots.size() == 2);
  const auto& a = log.robots[0].robot;
  const auto& b = log.robots[1].robot;
  CHECK(*b.entry_time >= *a.exit_time - 1e-6);
}

TEST_CASE("fcfs leaves non-conflicting robots ungated") {
  FcfsPolicy fcfs;
  const SimulationLog both = run_stream(config_with({arrival(0, 0, 1.0), arrival(1, 2, 1.1)}), fcfs);
  const SimulationLog alone = run_stream(config_with({arrival(1, 2, 1.1)}), fcfs);
  REQUIRE(both.robots.size() == 2);
  CHECK(both.robots[1].trajectory.x == alone.robots[0].trajectory.x);
}

TEST_CASE("streams are safe, lane ordered and well formed") {
  const Scenario s = small_scenario(0.12);
  std::vector<std::unique_ptr<PrecedencePolicy>> policies;
  policies.push_back(std::make_unique<FcfsPolicy>());
  policies.push_back(std::make_unique<HeuristicPolicy>(HeuristicKind::TTR));
  policies.push_back(std::make_unique<OcpPolicy>());
  policies.push_back(std::make_unique<RandomPolicy>(3));
  for (auto& p : policies)
    for (unsigned long long seed : {1ULL, 2ULL}) {
      p->reset(seed);
      const StreamConfig cfg = stream_config(s, seed);
      const SimulationLog log = run_stream(cfg, *p);
      CHECK(log.robots.size() == cfg.arrivals.size());
      CHECK(audit_safety(log, *cfg.geometry).empty());
      std::map<int, double> last_exit, last_arrival;
      for (const RobotRecord& r : log.robots) {
        REQUIRE(r.robot.exit_time);
        CHECK(r.robot.arrival_time >= r.tentative_time - 1e-9);
        if (last_arrival.count(r.robot.lane)) {
          CHECK(r.robot.arrival_time >= last_arrival[r.robot.lane]);
          CHECK(*r.robot.exit_time >= last_exit[r.robot.lane]);
        }
        last_arrival[r.robot.lane] = r.robot.arrival_time;
        last_exit[r.robot.lane] = *r.robot.exit_time;
        if (!p->fcfs_mode()) {
          REQUIRE(r.robot.coord_start);
          const double k = *r.robot.coord_start / cfg.T_c;
          CHECK(std::abs(k - std::round(k)) < 1e-9);
          CHECK(*r.robot.coord_start >= r.robot.arrival_time);
          CHECK(r.provisional_rounds >= 1);
        }
        // admission state
        const double d = cfg.geometry->approach_length[r.robot.lane];
        CHECK(r.trajectory.x.front() == -d);
        CHECK(r.trajectory.v.front() * r.trajectory.v.front() <= 2.0 * 2.0 * d + 1e-12);
      }
    }
}

TEST_CASE("the audit catches overlapping occupancy and rear-end violations") {
  const Scenario s = small_scenario(0.1);
  HeuristicPolicy ttr(HeuristicKind::TTR);
  const StreamConfig cfg = stream_config(s, 4);
  SimulationLog log = run_stream(cfg, ttr);
  REQUIRE(log.robots.size() >= 2);
  CHECK(audit_safety(log, *cfg.geometry).empty());
  // Put a conflicting copy of robot 0 in the intersection at the same time.
  SimulationLog bad = log;
  RobotRecord copy = bad.robots[0];
  copy.robot.id = 999;
  copy.robot.lane = (copy.robot.lane + 1) % 8;
  bad.robots.push_back(copy);
  CHECK_FALSE(audit_safety(bad, *cfg.geometry).empty());
  // A same-lane copy 0.1 m behind.
  bad = log;
  copy = bad.robots[0];
  copy.robot.id = 998;
  copy.robot.arrival_time += 0.1;
  for (double& x : copy.trajectory.x) x -= 0.1;
  bad.robots.push_back(copy);
  CHECK_FALSE(audit_safety(bad, *cfg.geometry).empty());
}

TEST_CASE("streams are deterministic and logs round trip") {
  const Scenario s = small_scenario(0.1);
  RandomPolicy a(1), b(1);
  a.reset(9);
  b.reset(9);
  const SimulationLog l1 = run_stream(stream_config(s, 9), a);
  const SimulationLog l2 = run_stream(stream_config(s, 9), b);
  const std::string d1 = dump(l1);
  CHECK(d1 == dump(l2));
  std::istringstream is(d1);
  const SimulationLog back = read_log(is);
  CHECK(dump(back) == d1);
  CHECK(back.robots.size() == l1.robots.size());
}

TEST_CASE("log header is versioned") {
  std::istringstream bad("{\"format\":\"intman-log\",\"version\":99}\n");
  CHECK_THROWS_AS(read_log(bad), InputError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_log(empty), InputError);
}

TEST_CASE("observer sees every tick") {
  const Scenario s = small_scenario(0.05);
  HeuristicPolicy ttr(HeuristicKind::TTR);
  CountingObserver obs;
  const SimulationLog log = run_stream(stream_config(s, 3), ttr, &obs);
  CHECK(obs.finished == 1);
  CHECK(obs.ticks >= static_cast<int>(log.events.size()));
  CHECK(obs.ticks > 0);
}

TEST_CASE("tick period must be a multiple of the step") {
  StreamConfig c = config_with({arrival(0, 0, 1.0)});
  c.T_c = 6.05;
  HeuristicPolicy ttr(HeuristicKind::TTR);
  CHECK_THROWS_AS(run_stream(c, ttr), InputError);
  c = config_with({arrival(0, 11, 1.0)});
  CHECK_THROWS_AS(run_stream(c, ttr), InputError);
}
