#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "intman/errors.hpp"
#include "intman/solver.hpp"

namespace intman {
namespace {

struct Node {
  double x;
  double v;
  double exit;  // kForever until the rear end clears the intersection
  int parent;
  int control;
};

struct NodeKey {
  long long x, v, e;
  bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const noexcept {
    std::size_t h = std::hash<long long>{}(k.x);
    h ^= std::hash<long long>{}(k.v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<long long>{}(k.e) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

bool better(const Node& a, const Node& b) {
  if (a.x != b.x) return a.x > b.x;
  if (a.v != b.v) return a.v > b.v;
  return a.exit < b.exit;
}

/// Layered reachable-state DP. With `track_exit` the exit time is part of
/// the state so that different exit times survive merging.
class ReachableDp {
 public:
  ReachableDp(const SolveRequest& req, const OracleOptions& opts, bool track_exit)
      : req_(req), opts_(opts), track_exit_(track_exit), checker_(req) {
    if (opts.u_levels < 2) throw InputError("oracle: u_levels must be at least 2");
    if (!(opts.exit_resolution > 0)) throw InputError("oracle: exit_resolution must be positive");
    const KinematicLimits lim = req.robot.limits();
    for (int j = 0; j < opts.u_levels; ++j)
      controls_.push_back(lim.u_min + j * (lim.u_max - lim.u_min) / (opts.u_levels - 1));
  }

  void run() {
    if (!checker_.initial_ok(1e-6))
      throw SolveError(SolveErrorKind::InfeasibleEntry,
                       "oracle: robot " + std::to_string(req_.robot.id) +
                           " violates the entry conditions");
    const KinematicLimits lim = req_.robot.limits();
    const double exit_level = req_.intersection_span + req_.robot.length;
    const std::size_t n = req_.num_steps();
    layers_.assign(1, {Node{req_.initial.x, req_.initial.v,
                            req_.initial.x >= exit_level ? req_.t_start : kForever, -1, -1}});
    for (std::size_t k = 0; k < n; ++k) {
      const auto& layer = layers_.back();
      const double t_k = req_.t_start + static_cast<double>(k) * req_.dt;
      std::vector<Node> next;
      std::unordered_map<NodeKey, std::size_t, NodeKeyHash> index;
      next.reserve(layer.size() * 2);
      for (std::size_t i = 0; i < layer.size(); ++i) {
        const State cur{layer[i].x, layer[i].v};
        for (int j = 0; j < static_cast<int>(controls_.size()); ++j) {
          const State s = propagate(cur, controls_[static_cast<std::size_t>(j)], req_.dt, lim);
          if (!checker_.admissible(k, cur, s)) continue;
          double exit = layer[i].exit;
          if (exit == kForever && s.x >= exit_level)
            exit = interpolate_crossing(t_k, req_.dt, cur.x, s.x, exit_level);
          const Node node{s.x, s.v, exit, static_cast<int>(i), j};
          const NodeKey key{std::llround(s.x / opts_.x_resolution),
                            std::llround(s.v / req_.robot.v_max * static_cast<double>(opts_.v_levels)),
                            track_exit_ && exit != kForever ? exit_bucket(exit) : -1};
          auto [it, inserted] = index.try_emplace(key, next.size());
          if (inserted) {
            next.push_back(node);
          } else if (better(node, next[it->second])) {
            next[it->second] = node;
          }
        }
      }
      prune(k + 1, next);
      if (next.size() > opts_.frontier_cap)
        throw SolveError(SolveErrorKind::StateExplosion,
                         "oracle: frontier of " + std::to_string(next.size()) +
                             " states exceeds the cap");
      layers_.push_back(std::move(next));
    }
  }

  const std::vector<Node>& final_layer() const { return layers_.back(); }

  Trajectory rebuild(int final_index) const {
    std::vector<int> controls(layers_.size() - 1);
    int idx = final_index;
    for (std::size_t k = layers_.size() - 1; k > 0; --k) {
      const Node& nd = layers_[k][static_cast<std::size_t>(idx)];
      controls[k - 1] = nd.control;
      idx = nd.parent;
    }
    Trajectory traj = Trajectory::start(req_.t_start, req_.dt, req_.initial);
    for (int c : controls) traj.push(controls_[static_cast<std::size_t>(c)], req_.robot.limits());
    return traj;
  }

 private:
  /// A state dominates another when its position, velocity and both
  /// constraint slacks are all at least as large (and its exit no later).
  /// Slacks shrink as x and v grow, so only states with no active
  /// constraint can dominate; those are pruned to their (x, v) front.
  void prune(std::size_t k, std::vector<Node>& nodes) const {
    std::vector<Node> kept;
    std::vector<Node> free;
    kept.reserve(nodes.size());
    for (const Node& nd : nodes) {
      const State s{nd.x, nd.v};
      const bool unconstrained =
          checker_.rear_slack(k, s) == kForever && checker_.gate_slack(k, s) == kForever;
      (unconstrained ? free : kept).push_back(nd);
    }
    if (free.empty()) return;
    auto group = [this](const Node& n) {
      return track_exit_ && n.exit != kForever ? exit_bucket(n.exit) : -1;
    };
    std::sort(free.begin(), free.end(), [&](const Node& a, const Node& b) {
      if (group(a) != group(b)) return group(a) < group(b);
      if (a.v != b.v) return a.v > b.v;
      return a.x > b.x;
    });
    double best_x = -kForever;
    for (std::size_t i = 0; i < free.size(); ++i) {
      if (i > 0 && group(free[i]) != group(free[i - 1])) best_x = -kForever;
      if (free[i].x > best_x) {
        kept.push_back(free[i]);
        best_x = free[i].x;
      }
    }
    nodes = std::move(kept);
  }

  long long exit_bucket(double exit) const {
    return static_cast<long long>(std::floor(exit / opts_.exit_resolution));
  }

  const SolveRequest& req_;
  OracleOptions opts_;
  bool track_exit_;
  StepChecker checker_;
  std::vector<double> controls_;
  std::vector<std::vector<Node>> layers_;
};

SolveResult to_result(const SolveRequest& req, Trajectory traj) {
  SolveResult out;
  out.crossing = boundary_crossing_times(traj, req.intersection_span, req.robot.length);
  out.objective = traj.x.back() - traj.x.front();
  out.crossed = out.crossing.exit && *out.crossing.exit <= req.t_end + 1e-9;
  out.trajectory = std::move(traj);
  out.status = SolveStatus::OracleExact;
  return out;
}

}  // namespace

SolveResult oracle_exact(const SolveRequest& req, const OracleOptions& opts) {
  ReachableDp dp(req, opts, false);
  dp.run();
  const auto& fin = dp.final_layer();
  int best = 0;
  for (std::size_t i = 1; i < fin.size(); ++i)
    if (better(fin[i], fin[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
  return to_result(req, dp.rebuild(best));
}

std::vector<ExitTradeoff> oracle_exit_frontier(const SolveRequest& req,
                                               const OracleOptions& opts,
                                               std::size_t max_points) {
  ReachableDp dp(req, opts, true);
  dp.run();
  const auto& fin = dp.final_layer();
  std::vector<int> crossing;
  for (std::size_t i = 0; i < fin.size(); ++i)
    if (fin[i].exit <= req.t_end + 1e-9) crossing.push_back(static_cast<int>(i));
  std::sort(crossing.begin(), crossing.end(), [&](int a, int b) {
    const Node& na = fin[static_cast<std::size_t>(a)];
    const Node& nb = fin[static_cast<std::size_t>(b)];
    return na.exit != nb.exit ? na.exit < nb.exit : na.x > nb.x;
  });
  std::vector<int> front;
  double best_x = -kForever;
  for (int i : crossing) {
    if (fin[static_cast<std::size_t>(i)].x > best_x + 1e-12) {
      front.push_back(i);
      best_x = fin[static_cast<std::size_t>(i)].x;
    }
  }
  std::vector<int> chosen;
  if (front.size() <= max_points || max_points < 2) {
    chosen = front;
    if (max_points == 1 && !front.empty()) chosen = {front.back()};
  } else {
    for (std::size_t p = 0; p < max_points; ++p) {
      const std::size_t idx = p * (front.size() - 1) / (max_points - 1);
      if (chosen.empty() || chosen.back() != front[idx]) chosen.push_back(front[idx]);
    }
  }
  std::vector<ExitTradeoff> out;
  for (int i : chosen) {
    const Node& nd = fin[static_cast<std::size_t>(i)];
    Trajectory traj = dp.rebuild(i);
    out.push_back({nd.exit, traj.x.back() - traj.x.front(), std::move(traj)});
  }
  return out;
}

}  // namespace intman
