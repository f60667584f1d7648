#include "intman/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>

#include "intman/errors.hpp"

namespace intman {

const PendingRobot* CoordinationInstance::find_pending(int id) const {
  for (const PendingRobot& p : pending)
    if (p.robot.id == id) return &p;
  return nullptr;
}

void CoordinationInstance::validate() const {
  if (!geometry) throw InputError("instance: missing geometry");
  for (const PendingRobot& p : pending) {
    if (!geometry->lane_valid(p.robot.lane)) throw InputError("instance: invalid lane id");
    if (p.state.x > kEntryTolerance)
      throw InputError("instance: pending robot " + std::to_string(p.robot.id) +
                       " is already inside the intersection");
    for (const CommittedRobot& c : committed)
      if (c.robot.id == p.robot.id)
        throw InputError("instance: robot " + std::to_string(p.robot.id) +
                         " is both pending and committed");
  }
}

double min_wait_time(const Robot& robot, const std::vector<const CommittedRobot*>& fixed,
                     const LaneGeometry& geom) {
  double tau = -kForever;
  for (const CommittedRobot* c : fixed)
    if (conflict_value(geom, robot.lane, c->robot.lane) == -1) tau = std::max(tau, c->exit_time);
  return tau;
}

double min_wait_time(const Robot& robot, const std::vector<CommittedRobot>& committed,
                     const LaneGeometry& geom) {
  std::vector<const CommittedRobot*> fixed;
  for (const CommittedRobot& c : committed) fixed.push_back(&c);
  return min_wait_time(robot, fixed, geom);
}

namespace {

SolveRequest coordinated_request(const CoordinationInstance& inst, const PendingRobot& p,
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

bool front_before(const PendingRobot* a, const PendingRobot* b) {
  if (a->state.x != b->state.x) return a->state.x > b->state.x;
  if (a->robot.arrival_time != b->robot.arrival_time)
    return a->robot.arrival_time < b->robot.arrival_time;
  return a->robot.id < b->robot.id;
}

/// Index into `queue` of the robot processed next.
std::size_t select_next(const std::vector<const PendingRobot*>& queue,
                        const Precedence& precedence) {
  // F-set: front robot of every lane present in the queue.
  std::map<int, std::size_t> front;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    auto it = front.find(queue[i]->robot.lane);
    if (it == front.end() || front_before(queue[i], queue[it->second]))
      front[queue[i]->robot.lane] = i;
  }
  std::size_t best = front.begin()->second;
  for (const auto& [lane, i] : front) {
    const PendingRobot* c = queue[i];
    const PendingRobot* b = queue[best];
    const double pc = precedence.at(c->robot.id);
    const double pb = precedence.at(b->robot.id);
    if (pc > pb || (pc == pb && (c->robot.arrival_time < b->robot.arrival_time ||
                                 (c->robot.arrival_time == b->robot.arrival_time &&
                                  c->robot.id < b->robot.id))))
      best = i;
  }
  return best;
}

CommittedRobot make_committed(const PendingRobot& p, Trajectory traj, double t_now,
                              const CrossingTimes& ct) {
  CommittedRobot c;
  c.robot = p.robot;
  c.robot.coord_start = t_now;
  c.robot.entry_time = ct.entry;
  c.robot.exit_time = ct.exit;
  c.exit_time = ct.exit.value_or(kForever);
  c.trajectory = std::move(traj);
  return c;
}

}  // namespace

SequentialOutcome sequential_optimization(const CoordinationInstance& instance,
                                          const Precedence& precedence) {
  instance.validate();
  for (const PendingRobot& p : instance.pending)
    if (!precedence.count(p.robot.id))
      throw InputError("sequential_optimization: no precedence for robot " +
                       std::to_string(p.robot.id));

  SequentialOutcome out;
  std::vector<const CommittedRobot*> fixed;
  for (const CommittedRobot& c : instance.committed) fixed.push_back(&c);
  std::deque<CommittedRobot> granted;
  std::vector<const PendingRobot*> queue;
  for (const PendingRobot& p : instance.pending) queue.push_back(&p);

  bool deferring = false;
  while (!queue.empty()) {
    const std::size_t idx = select_next(queue, precedence);
    const PendingRobot* p = queue[idx];
    queue.erase(queue.begin() + static_cast<std::ptrdiff_t>(idx));
    out.order.push_back(p->robot.id);
    if (deferring) {
      out.deferred.push_back(p->robot.id);
      continue;
    }
    const SolveRequest req = coordinated_request(instance, *p, fixed);
    SolveResult res = solve_max_progress(req);
    ++out.solves;
    if (!res.crossed) {
      deferring = true;
      out.deferred.push_back(p->robot.id);
      continue;
    }
    out.entered.push_back(p->robot.id);
    out.trajectories[p->robot.id] = res.trajectory;
    granted.push_back(make_committed(*p, std::move(res.trajectory), instance.t_now, res.crossing));
    fixed.push_back(&granted.back());
  }
  return out;
}

std::map<int, Trajectory> deferred_provisional(const CoordinationInstance& instance,
                                               const SequentialOutcome& outcome) {
  const LaneGeometry& geom = instance.geom();
  std::vector<const CommittedRobot*> fixed;
  for (const CommittedRobot& c : instance.committed) fixed.push_back(&c);
  std::deque<CommittedRobot> extra;
  for (const auto& [id, traj] : outcome.trajectories) {
    const PendingRobot* p = instance.find_pending(id);
    extra.push_back({p->robot, traj, kForever});
    fixed.push_back(&extra.back());
  }
  std::vector<const PendingRobot*> deferred;
  for (int id : outcome.deferred) deferred.push_back(instance.find_pending(id));
  std::sort(deferred.begin(), deferred.end(), front_before);

  std::map<int, Trajectory> out;
  for (const PendingRobot* p : deferred) {
    SolveRequest req;
    req.robot = p->robot;
    req.initial = p->state;
    req.t_start = instance.t_now;
    req.t_end = instance.t_now + instance.T_c;
    req.dt = instance.dt;
    req.intersection_span = geom.intersection_span[static_cast<std::size_t>(p->robot.lane)];
    req.leader = lane_leader(p->robot, fixed, geom);
    req.entry_gate = kForever;
    SolveResult res = solve_max_progress(req);
    extra.push_back({p->robot, res.trajectory, kForever});
    fixed.push_back(&extra.back());
    out[p->robot.id] = std::move(res.trajectory);
  }
  return out;
}

double sequence_objective(const CoordinationInstance& instance,
                          const SequentialOutcome& outcome) {
  std::map<int, double> score;
  for (const auto& [id, traj] : outcome.trajectories)
    score[id] = instance.find_pending(id)->robot.priority * (traj.x.back() - traj.x.front());
  for (const auto& [id, traj] : deferred_provisional(instance, outcome))
    score[id] = instance.find_pending(id)->robot.priority * (traj.x.back() - traj.x.front());
  double total = 0.0;
  for (const auto& [id, s] : score) total += s;
  return total;
}

namespace {

/// Per-lane queues of pending robots, front first; lanes ascending.
std::vector<std::vector<const PendingRobot*>> lane_queues(const CoordinationInstance& inst) {
  std::map<int, std::vector<const PendingRobot*>> by_lane;
  for (const PendingRobot& p : inst.pending) by_lane[p.robot.lane].push_back(&p);
  std::vector<std::vector<const PendingRobot*>> out;
  for (auto& [lane, q] : by_lane) {
    std::sort(q.begin(), q.end(), front_before);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> lane_consistent_orders(const CoordinationInstance& instance) {
  const auto queues = lane_queues(instance);
  std::vector<std::size_t> head(queues.size(), 0);
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  std::function<void()> rec = [&]() {
    if (current.size() == instance.pending.size()) {
      out.push_back(current);
      return;
    }
    for (std::size_t q = 0; q < queues.size(); ++q) {
      if (head[q] == queues[q].size()) continue;
      current.push_back(queues[q][head[q]]->robot.id);
      ++head[q];
      rec();
      --head[q];
      current.pop_back();
    }
  };
  rec();
  return out;
}

Precedence precedence_from_order(const std::vector<int>& order) {
  Precedence p;
  const auto n = static_cast<double>(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) p[order[i]] = n - static_cast<double>(i);
  return p;
}

BestSequenceResult best_sequence_by_enumeration(const CoordinationInstance& instance,
                                                std::size_t cap) {
  if (instance.pending.size() > cap)
    throw SolveError(SolveErrorKind::TooLarge, "best_sequence: too many pending robots");
  BestSequenceResult best;
  bool have = false;
  for (const auto& order : lane_consistent_orders(instance)) {
    SequentialOutcome outcome = sequential_optimization(instance, precedence_from_order(order));
    const double obj = sequence_objective(instance, outcome);
    ++best.orders;
    if (!have || obj > best.objective) {
      best.objective = obj;
      best.outcome = std::move(outcome);
      have = true;
    }
  }
  return best;
}

}  // namespace intman
