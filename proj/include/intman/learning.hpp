#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intman/coordination.hpp"
#include "intman/nn.hpp"
#include "intman/policies.hpp"
#include "intman/stream.hpp"

namespace intman {

/// One MDP step over N_r padded robot slots.
struct Transition {
  Eigen::VectorXd state;  ///< N_r * 10 normalized features
  Eigen::VectorXd action;  ///< N_r indices
  double reward = 0.0;
  Eigen::VectorXd next_state;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1000000, int slots = 40)
      : capacity_(capacity), slots_(slots) {}

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  int slots() const { return slots_; }
  bool empty() const { return data_.empty(); }
  const Transition& operator[](std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

  /// Drops the oldest transition when full.
  void add(Transition t);
  /// `n` distinct transitions (all of them if fewer are stored).
  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

  /// Concatenation in argument order.
  static ReplayBuffer merge(const std::vector<ReplayBuffer>& parts);

  void save(std::ostream& os) const;
  static ReplayBuffer load(std::istream& is);
  void save_file(const std::string& path) const;
  static ReplayBuffer load_file(const std::string& path);

 private:
  std::size_t capacity_;
  int slots_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;  // index of the oldest entry once full
};

inline constexpr int kBufferFormatVersion = 1;

enum class PenaltyForm {
  DistanceCovered,  ///< (d + x)^2
  AsPrinted,        ///< (d - x)^2
};

/// Reward of a coordinated phase: mean over pending robots of the weighted
/// progress of entered robots during [t^A, t^A + T_r], minus r_bar times the
/// squared distance covered so far by deferred robots.
double reward(const CoordinationInstance& instance, const SequentialOutcome& outcome,
              double T_r, double r_bar, PenaltyForm form = PenaltyForm::DistanceCovered);

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& z);

/// Mean-reverting exploration noise per action slot.
class OuNoise {
 public:
  OuNoise(int dim, double theta = 0.15, double dt = 1.0) : theta_(theta), dt_(dt), n_(Eigen::VectorXd::Zero(dim)) {}
  /// n <- n - theta n dt + sigma sqrt(dt) N(0, 1), per component.
  const Eigen::VectorXd& step(double sigma, std::mt19937_64& rng);
  const Eigen::VectorXd& value() const { return n_; }
  void reset() { n_.setZero(); }
  void set(const Eigen::VectorXd& n) { n_ = n; }

 private:
  double theta_;
  double dt_;
  Eigen::VectorXd n_;
};

/// Linear decay from sigma_start to sigma_end over `total` steps.
double decayed_sigma(double sigma_start, double sigma_end, std::size_t step, std::size_t total);

enum class OptimizerKind { Adam, Sgd };

/// Minimizes; call with the gradient of the loss.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr, std::size_t dim);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  double lr() const { return lr_; }

 private:
  OptimizerKind kind_ = OptimizerKind::Adam;
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct TrainerConfig {
  int slots = 40;  ///< N_r
  int critic_hidden = 64;
  double gamma = 0.99;
  double polyak = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::size_t batch = 64;
  OptimizerKind optimizer = OptimizerKind::Adam;
  unsigned long long seed = 1;
};

/// Actor, critic and their targets.
class Trainer {
 public:
  explicit Trainer(const TrainerConfig& cfg);

  const TrainerConfig& config() const { return cfg_; }
  Mlp actor, actor_target, critic, critic_target;
  std::mt19937_64 rng;
  std::size_t iterations = 0;

  /// Shared actor on every slot of a joint state: N_r raw indices.
  Eigen::VectorXd raw_indices(const Eigen::VectorXd& state, bool target = false) const;
  /// softmax of the raw indices.
  Eigen::VectorXd joint_action(const Eigen::VectorXd& state, bool target = false) const;
  double q_value(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                 bool target = false) const;

  /// Critic loss over the batch and its gradient w.r.t. the critic parameters.
  double critic_loss(const std::vector<const Transition*>& batch, Eigen::VectorXd* grad) const;
  /// Mean Q(s, G(s)) over the batch and its gradient w.r.t. the actor
  /// parameters, flowing through all N_r slots of the joint action.
  double actor_objective(const std::vector<const Transition*>& batch, Eigen::VectorXd* grad) const;

  /// One descent step on the critic; returns the loss before the step.
  double critic_update(const std::vector<const Transition*>& batch);
  /// One ascent step on the actor; returns the gradient norm.
  double actor_update(const std::vector<const Transition*>& batch);
  /// target <- (1 - rho) target + rho main, both networks.
  void polyak_update(double rho);
  void polyak_update() { polyak_update(cfg_.polyak); }

  /// critic, actor and target updates on one sampled mini-batch.
  struct StepStats {
    double critic_loss = 0.0;
    double mean_reward = 0.0;
  };
  StepStats train_step(const ReplayBuffer& buffer);

 private:
  TrainerConfig cfg_;
  Optimizer actor_opt_, critic_opt_;
};

/// Padded joint state: real robots front-most first (distance traveled
/// descending, then arrival, then id), then pseudo robots. Throws
/// InputError when more than `slots` robots are pending.
struct SlotAssignment {
  Eigen::VectorXd state;
  std::vector<int> ids;  ///< robot id per real slot
};
SlotAssignment padded_state(const CoordinationInstance& instance, const FeatureScaler& scaler,
                            int slots);

struct LearnerConfig {
  double T_r = 20.0;
  double r_bar = 5.0;
  PenaltyForm penalty = PenaltyForm::DistanceCovered;
  double ou_theta = 0.15;
  double sigma_start = 0.2;
  double sigma_end = 0.01;
  std::size_t sigma_steps = 2000;  ///< ticks over which sigma decays
  bool online_updates = false;     ///< update the networks after every tick
};

/// Shared actor with softmax and exploration noise as the precedence
/// policy, collecting one transition per coordination tick.
class OnlineLearner : public PrecedencePolicy, public StreamObserver {
 public:
  OnlineLearner(Trainer& trainer, ReplayBuffer& buffer, FeatureScaler scaler,
                LearnerConfig cfg, unsigned long long noise_seed);

  std::string name() const override { return "learner"; }
  Precedence precedence(const CoordinationInstance& instance) override;
  void on_tick(const CoordinationInstance& instance, const Precedence& precedence,
               const SequentialOutcome& outcome) override;
  void on_finish(const SimulationLog& log) override;

  /// One tick of the online algorithm on a prepared instance and its
  /// outcome: completes the previous transition with this tick's state,
  /// stores it, optionally learns, and opens the next one. Returns the
  /// transition opened at this tick (next_state still empty).
  Transition step(const CoordinationInstance& instance, const SequentialOutcome& outcome);

  std::size_t ticks() const { return ticks_; }

 private:
  void act(const CoordinationInstance& instance);
  void close_open(const Eigen::VectorXd& next_state);

  Trainer& trainer_;
  ReplayBuffer& buffer_;
  FeatureScaler scaler_;
  LearnerConfig cfg_;
  std::mt19937_64 noise_rng_;
  OuNoise noise_;
  std::size_t ticks_ = 0;
  // Action chosen at the current tick.
  std::optional<int> acted_k_;
  SlotAssignment slots_;
  Eigen::VectorXd action_;
  std::optional<Transition> open_;
};

struct TrainingCurvePoint {
  std::size_t iteration = 0;
  double critic_loss = 0.0;
  double mean_reward = 0.0;
};

struct TrainResult {
  Mlp actor;
  std::vector<TrainingCurvePoint> curve;
};

/// Offline updates on a merged buffer.
TrainResult cml_train(const ReplayBuffer& merged, const TrainerConfig& cfg,
                      std::size_t iterations, std::size_t curve_every = 100);

/// One trained actor per initialization seed.
std::vector<TrainResult> cml_train_ensemble(const ReplayBuffer& merged, TrainerConfig cfg,
                                            std::size_t iterations,
                                            const std::vector<unsigned long long>& seeds);

}  // namespace intman
