#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intman/coordination.hpp"
#include "intman/nn.hpp"

namespace intman {

inline constexpr int kNumFeatures = 10;
using FeatureVector = std::array<double, kNumFeatures>;

/// Feature slots.
enum Feature : int {
  kDistanceTraveled = 0,
  kVelocity,
  kPriority,
  kLane,
  kSpeedBound,
  kAccelBound,
  kTimeSinceArrival,
  kMinWait,
  kFollowerCount,
  kFollowerGap,
};

/// What a robot can know locally at a tick: its own state, the robots
/// behind it on its lane and the committed exit times. Virtual so tests
/// can track accesses.
class TrafficView {
 public:
  explicit TrafficView(const CoordinationInstance& instance) : inst_(instance) {}
  virtual ~TrafficView() = default;

  double t_now() const { return inst_.t_now; }
  const LaneGeometry& geom() const { return inst_.geom(); }

  virtual const PendingRobot& self(int id) const;
  /// Pending robots behind `id` on its lane, nearest first.
  virtual std::vector<const PendingRobot*> lane_followers(int id) const;
  virtual std::vector<double> committed_exit_times() const;

 private:
  const CoordinationInstance& inst_;
};

/// Raw features of pending robot `id`. The minimum-wait estimate is the
/// latest committed exit over all lanes, relative to the tick and floored
/// at 0. The follower gap is the mean of the front-to-front gaps along the
/// chain robot, follower 1, follower 2, ...; 0 with fewer than 2 followers.
FeatureVector features(int id, const TrafficView& view);
FeatureVector features(int id, const CoordinationInstance& instance);

/// Min-max scaling of features to [0, 1] with clamping.
struct FeatureScaler {
  FeatureVector lo{};
  FeatureVector hi{};

  /// Bounds from the geometry and scenario limits.
  static FeatureScaler for_scenario(const LaneGeometry& geom, double max_priority,
                                    double max_accel, double T_h, double robot_length);
  FeatureVector apply(const FeatureVector& raw) const;
};

/// Normalized features of a padding entry: distance traveled at ten
/// approach lengths behind the RoI entry, everything else 0.
FeatureVector pseudo_features();

enum class HeuristicKind { TTR, PDT, CDT, FcfsOrder };

inline constexpr double kVelocityGuard = 1e-3;

double heuristic_precedence(HeuristicKind kind, const PendingRobot& robot);

/// Orders robots by relaxed-joint virtual entry time (earlier entry gets a
/// larger index, ties by virtual exit).
Precedence ocp_precedence(const CoordinationInstance& instance);

double neural_precedence(const Mlp& net, const FeatureVector& normalized);

class HeuristicPolicy : public PrecedencePolicy {
 public:
  explicit HeuristicPolicy(HeuristicKind kind) : kind_(kind) {}
  std::string name() const override;
  Precedence precedence(const CoordinationInstance& instance) override;

 private:
  HeuristicKind kind_;
};

/// Plans each robot completely on arrival.
class FcfsPolicy : public PrecedencePolicy {
 public:
  std::string name() const override { return "fcfs"; }
  Precedence precedence(const CoordinationInstance& instance) override;
  bool fcfs_mode() const override { return true; }
};

class OcpPolicy : public PrecedencePolicy {
 public:
  std::string name() const override { return "ocp-approx"; }
  Precedence precedence(const CoordinationInstance& instance) override {
    return ocp_precedence(instance);
  }
};

/// Uniform random indices, reseeded per stream.
class RandomPolicy : public PrecedencePolicy {
 public:
  explicit RandomPolicy(unsigned long long seed = 0) : seed_(seed), rng_(seed) {}
  std::string name() const override { return "random"; }
  Precedence precedence(const CoordinationInstance& instance) override;
  void reset(unsigned long long stream_seed) override;

 private:
  unsigned long long seed_;
  std::mt19937_64 rng_;
};

/// Best lane-consistent order; above `cap` pending robots it falls back to
/// arrival order.
class BestSeqPolicy : public PrecedencePolicy {
 public:
  explicit BestSeqPolicy(std::size_t cap = 8) : cap_(cap) {}
  std::string name() const override { return "bestseq"; }
  Precedence precedence(const CoordinationInstance& instance) override;
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  std::size_t cap_;
  std::size_t fallbacks_ = 0;
};

/// Shared actor applied to every pending robot's normalized features.
class NeuralPolicy : public PrecedencePolicy {
 public:
  NeuralPolicy(Mlp net, FeatureScaler scaler, std::string label = "neural")
      : net_(std::move(net)), scaler_(scaler), label_(std::move(label)) {}
  std::string name() const override { return label_; }
  Precedence precedence(const CoordinationInstance& instance) override;
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  FeatureScaler scaler_;
  std::string label_;
};

}  // namespace intman
