#include "intman/policies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "intman/errors.hpp"

namespace intman {

const PendingRobot& TrafficView::self(int id) const {
  const PendingRobot* p = inst_.find_pending(id);
  if (!p) throw InputError("features: robot " + std::to_string(id) + " is not pending");
  return *p;
}

std::vector<const PendingRobot*> TrafficView::lane_followers(int id) const {
  const PendingRobot& me = self(id);
  std::vector<const PendingRobot*> out;
  for (const PendingRobot& p : inst_.pending) {
    if (p.robot.id == id || p.robot.lane != me.robot.lane) continue;
    if (p.robot.arrival_time > me.robot.arrival_time ||
        (p.robot.arrival_time == me.robot.arrival_time && p.robot.id > id))
      out.push_back(&p);
  }
  std::sort(out.begin(), out.end(), [](const PendingRobot* a, const PendingRobot* b) {
    return a->robot.arrival_time != b->robot.arrival_time
               ? a->robot.arrival_time < b->robot.arrival_time
               : a->robot.id < b->robot.id;
  });
  return out;
}

std::vector<double> TrafficView::committed_exit_times() const {
  std::vector<double> out;
  for (const CommittedRobot& c : inst_.committed) out.push_back(c.exit_time);
  return out;
}

FeatureVector features(int id, const TrafficView& view) {
  const PendingRobot& me = view.self(id);
  const auto lane = static_cast<std::size_t>(me.robot.lane);
  FeatureVector f{};
  f[kDistanceTraveled] = me.state.x + view.geom().approach_length[lane];
  f[kVelocity] = me.state.v;
  f[kPriority] = me.robot.priority;
  f[kLane] = me.robot.lane;
  f[kSpeedBound] = me.robot.v_max;
  f[kAccelBound] = me.robot.u_max;
  f[kTimeSinceArrival] = view.t_now() - me.robot.arrival_time;
  double latest = view.t_now();
  for (double t : view.committed_exit_times())
    if (std::isfinite(t)) latest = std::max(latest, t);
  f[kMinWait] = latest - view.t_now();
  const auto followers = view.lane_followers(id);
  f[kFollowerCount] = static_cast<double>(followers.size());
  if (followers.size() >= 2) {
    double ahead = me.state.x;
    double sum = 0.0;
    for (const PendingRobot* p : followers) {
      sum += ahead - p->state.x;
      ahead = p->state.x;
    }
    f[kFollowerGap] = sum / static_cast<double>(followers.size());
  }
  return f;
}

FeatureVector features(int id, const CoordinationInstance& instance) {
  return features(id, TrafficView(instance));
}

FeatureScaler FeatureScaler::for_scenario(const LaneGeometry& geom, double max_priority,
                                          double max_accel, double T_h, double robot_length) {
  const double d = geom.max_approach();
  double v = 0.0;
  for (double s : geom.lane_speed_limit) v = std::max(v, s);
  FeatureScaler s;
  s.hi[kDistanceTraveled] = d;
  s.hi[kVelocity] = v;
  s.hi[kPriority] = max_priority;
  s.hi[kLane] = std::max(1, geom.num_lanes - 1);
  s.hi[kSpeedBound] = v;
  s.hi[kAccelBound] = max_accel;
  s.hi[kTimeSinceArrival] = T_h;
  s.hi[kMinWait] = T_h;
  s.hi[kFollowerCount] = std::ceil(d / robot_length);
  s.hi[kFollowerGap] = d;
  return s;
}

FeatureVector FeatureScaler::apply(const FeatureVector& raw) const {
  FeatureVector out{};
  for (int i = 0; i < kNumFeatures; ++i) {
    const double span = hi[i] - lo[i];
    out[i] = span > 0 ? std::clamp((raw[i] - lo[i]) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

FeatureVector pseudo_features() {
  FeatureVector f{};
  f[kDistanceTraveled] = -10.0;
  return f;
}

double heuristic_precedence(HeuristicKind kind, const PendingRobot& robot) {
  const double dist = -robot.state.x;
  const double ttr = dist / std::max(robot.state.v, kVelocityGuard);
  switch (kind) {
    case HeuristicKind::TTR: return -ttr;
    case HeuristicKind::PDT: return -dist * ttr;
    case HeuristicKind::CDT: return -(0.5 * dist + 0.5 * ttr);
    case HeuristicKind::FcfsOrder: return -robot.robot.arrival_time;
  }
  return 0.0;
}

Precedence ocp_precedence(const CoordinationInstance& instance) {
  const auto vt = solve_relaxed_joint(instance);
  std::vector<const PendingRobot*> order;
  for (const PendingRobot& p : instance.pending) order.push_back(&p);
  std::sort(order.begin(), order.end(), [&](const PendingRobot* a, const PendingRobot* b) {
    const VirtualTimes& ta = vt.at(a->robot.id);
    const VirtualTimes& tb = vt.at(b->robot.id);
    if (ta.entry != tb.entry) return ta.entry < tb.entry;
    if (ta.exit != tb.exit) return ta.exit < tb.exit;
    if (a->robot.arrival_time != b->robot.arrival_time)
      return a->robot.arrival_time < b->robot.arrival_time;
    return a->robot.id < b->robot.id;
  });
  std::vector<int> ids;
  for (const PendingRobot* p : order) ids.push_back(p->robot.id);
  return precedence_from_order(ids);
}

double neural_precedence(const Mlp& net, const FeatureVector& normalized) {
  Eigen::VectorXd in(kNumFeatures);
  for (int i = 0; i < kNumFeatures; ++i) in(i) = normalized[static_cast<std::size_t>(i)];
  return net.forward_scalar(in);
}

std::string HeuristicPolicy::name() const {
  switch (kind_) {
    case HeuristicKind::TTR: return "ttr";
    case HeuristicKind::PDT: return "pdt";
    case HeuristicKind::CDT: return "cdt";
    case HeuristicKind::FcfsOrder: return "arrival";
  }
  return "heuristic";
}

Precedence HeuristicPolicy::precedence(const CoordinationInstance& instance) {
  Precedence p;
  for (const PendingRobot& r : instance.pending) p[r.robot.id] = heuristic_precedence(kind_, r);
  return p;
}

Precedence FcfsPolicy::precedence(const CoordinationInstance& instance) {
  return HeuristicPolicy(HeuristicKind::FcfsOrder).precedence(instance);
}

Precedence RandomPolicy::precedence(const CoordinationInstance& instance) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Precedence p;
  for (const PendingRobot& r : instance.pending) p[r.robot.id] = U(rng_);
  return p;
}

void RandomPolicy::reset(unsigned long long stream_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(stream_seed),
                    static_cast<std::uint32_t>(stream_seed >> 32)};
  rng_.seed(seq);
}

Precedence BestSeqPolicy::precedence(const CoordinationInstance& instance) {
  if (instance.pending.size() > cap_) {
    ++fallbacks_;
    return HeuristicPolicy(HeuristicKind::FcfsOrder).precedence(instance);
  }
  return precedence_from_order(best_sequence(instance, cap_).outcome.order);
}

Precedence NeuralPolicy::precedence(const CoordinationInstance& instance) {
  Precedence p;
  const TrafficView view(instance);
  for (const PendingRobot& r : instance.pending)
    p[r.robot.id] = neural_precedence(net_, scaler_.apply(features(r.robot.id, view)));
  return p;
}

}  // namespace intman
