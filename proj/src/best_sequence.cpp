#include <algorithm>
#include <deque>
#include <functional>

#include "intman/coordination.hpp"
#include "intman/errors.hpp"

namespace intman {
namespace {

struct SearchFrame {
  std::vector<const CommittedRobot*> fixed;
  std::deque<CommittedRobot> granted;
};

std::vector<std::vector<const PendingRobot*>> queues_of(const CoordinationInstance& inst) {
  std::map<int, std::vector<const PendingRobot*>> by_lane;
  for (const PendingRobot& p : inst.pending) by_lane[p.robot.lane].push_back(&p);
  std::vector<std::vector<const PendingRobot*>> out;
  for (auto& [lane, q] : by_lane) {
    std::sort(q.begin(), q.end(), [](const PendingRobot* a, const PendingRobot* b) {
      if (a->state.x != b->state.x) return a->state.x > b->state.x;
      if (a->robot.arrival_time != b->robot.arrival_time)
        return a->robot.arrival_time < b->robot.arrival_time;
      return a->robot.id < b->robot.id;
    });
    out.push_back(std::move(q));
  }
  return out;
}

SolveRequest gated_request(const CoordinationInstance& inst, const PendingRobot& p,
                           const std::vector<const CommittedRobot*>& fixed) {
  const LaneGeometry& geom = inst.geom();
  SolveRequest req;
  req.robot = p.robot;
  req.initial = p.state;
  req.t_start = inst.t_now;
  req.t_end = inst.t_now + inst.T_h;
  req.dt = inst.dt;
  req.intersection_span = geom.intersection_span[static_cast<std::size_t>(p.robot.lane)];
  req.leader = lane_leader(p.robot, fixed, geom);
  const double tau = min_wait_time(p.robot, fixed, geom);
  if (tau > inst.t_now) req.entry_gate = tau;
  return req;
}

/// Remaining robots in the order the lexicographically first completion
/// of the current prefix would list them (lanes ascending).
void append_remaining(const std::vector<std::vector<const PendingRobot*>>& queues,
                      const std::vector<std::size_t>& head, std::vector<int>& ids) {
  for (std::size_t q = 0; q < queues.size(); ++q)
    for (std::size_t i = head[q]; i < queues[q].size(); ++i) ids.push_back(queues[q][i]->robot.id);
}

/// Depth-first walk over lane-consistent orders. `choose` yields the
/// alternative trajectories for the robot at the head of a lane (empty when
/// it cannot cross); `leaf` scores a complete outcome.
class OrderSearch {
 public:
  using Alternatives = std::function<std::vector<SolveResult>(
      const PendingRobot&, const std::vector<const CommittedRobot*>&)>;

  OrderSearch(const CoordinationInstance& inst, Alternatives choose)
      : inst_(inst), queues_(queues_of(inst)), head_(queues_.size(), 0),
        choose_(std::move(choose)) {
    for (const CommittedRobot& c : inst.committed) fixed_.push_back(&c);
  }

  BestSequenceResult run() {
    recurse();
    return best_;
  }

 private:
  void score_leaf() {
    const double obj = sequence_objective(inst_, current_);
    ++best_.orders;
    if (!have_ || obj > best_.objective) {
      best_.objective = obj;
      best_.outcome = current_;
      have_ = true;
    }
  }

  void recurse() {
    if (current_.order.size() == inst_.pending.size()) {
      score_leaf();
      return;
    }
    for (std::size_t q = 0; q < queues_.size(); ++q) {
      if (head_[q] == queues_[q].size()) continue;
      const PendingRobot& p = *queues_[q][head_[q]];
      std::vector<SolveResult> alts = choose_(p, fixed_);
      ++current_.solves;
      if (alts.empty()) {
        const SequentialOutcome saved = current_;
        current_.order.push_back(p.robot.id);
        current_.deferred.push_back(p.robot.id);
        ++head_[q];
        std::vector<int> rest;
        append_remaining(queues_, head_, rest);
        --head_[q];
        current_.order.insert(current_.order.end(), rest.begin(), rest.end());
        current_.deferred.insert(current_.deferred.end(), rest.begin(), rest.end());
        score_leaf();
        current_ = saved;
        continue;
      }
      for (SolveResult& alt : alts) {
        CommittedRobot c;
        c.robot = p.robot;
        c.robot.coord_start = inst_.t_now;
        c.robot.entry_time = alt.crossing.entry;
        c.robot.exit_time = alt.crossing.exit;
        c.exit_time = alt.crossing.exit.value_or(kForever);
        c.trajectory = alt.trajectory;
        granted_.push_back(std::move(c));
        fixed_.push_back(&granted_.back());
        current_.order.push_back(p.robot.id);
        current_.entered.push_back(p.robot.id);
        current_.trajectories[p.robot.id] = std::move(alt.trajectory);
        ++head_[q];
        recurse();
        --head_[q];
        current_.trajectories.erase(p.robot.id);
        current_.entered.pop_back();
        current_.order.pop_back();
        fixed_.pop_back();
        granted_.pop_back();
      }
    }
  }

  const CoordinationInstance& inst_;
  std::vector<std::vector<const PendingRobot*>> queues_;
  std::vector<std::size_t> head_;
  Alternatives choose_;
  std::vector<const CommittedRobot*> fixed_;
  std::deque<CommittedRobot> granted_;
  SequentialOutcome current_;
  BestSequenceResult best_;
  bool have_ = false;
};

}  // namespace

BestSequenceResult best_sequence(const CoordinationInstance& instance, std::size_t cap) {
  instance.validate();
  if (instance.pending.size() > cap)
    throw SolveError(SolveErrorKind::TooLarge, "best_sequence: too many pending robots");
  OrderSearch search(instance, [&](const PendingRobot& p,
                                   const std::vector<const CommittedRobot*>& fixed) {
    std::vector<SolveResult> out;
    SolveResult res = solve_max_progress(gated_request(instance, p, fixed));
    if (res.crossed) out.push_back(std::move(res));
    return out;
  });
  return search.run();
}

double combined_toy_oracle(const CoordinationInstance& instance,
                           const CombinedOracleOptions& opts) {
  instance.validate();
  if (instance.pending.size() > opts.max_robots)
    throw SolveError(SolveErrorKind::TooLarge, "combined_toy_oracle: too many pending robots");
  const double seq = best_sequence(instance, opts.max_robots).objective;
  // A lone robot has nothing to trade an earlier exit for.
  if (instance.pending.size() <= 1) return seq;
  OrderSearch search(instance, [&](const PendingRobot& p,
                                   const std::vector<const CommittedRobot*>& fixed) {
    const SolveRequest req = gated_request(instance, p, fixed);
    std::vector<SolveResult> out;
    for (ExitTradeoff& e : oracle_exit_frontier(req, opts.dp, opts.frontier_points)) {
      SolveResult r;
      r.crossing = boundary_crossing_times(e.trajectory, req.intersection_span, p.robot.length);
      r.objective = e.objective;
      r.crossed = true;
      r.trajectory = std::move(e.trajectory);
      r.status = SolveStatus::OracleExact;
      out.push_back(std::move(r));
    }
    return out;
  });
  return std::max(seq, search.run().objective);
}

}  // namespace intman
