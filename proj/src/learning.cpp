#include "intman/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "intman/errors.hpp"

namespace intman {

// ---- replay buffer --------------------------------------------------------

void ReplayBuffer::add(Transition t) {
  if (capacity_ == 0) return;
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    return;
  }
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<const Transition*> out;
  if (n >= data_.size()) {
    for (std::size_t i = 0; i < data_.size(); ++i) out.push_back(&(*this)[i]);
    return out;
  }
  std::uniform_int_distribution<std::size_t> U(0, data_.size() - 1);
  std::vector<std::size_t> chosen;
  while (chosen.size() < n) {
    const std::size_t i = U(rng);
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
  }
  for (std::size_t i : chosen) out.push_back(&data_[i]);
  return out;
}

ReplayBuffer ReplayBuffer::merge(const std::vector<ReplayBuffer>& parts) {
  if (parts.empty()) throw InputError("merge: no buffers");
  std::size_t total = 0;
  for (const ReplayBuffer& b : parts) {
    if (b.slots() != parts.front().slots()) throw InputError("merge: slot counts differ");
    total += b.size();
  }
  ReplayBuffer out(std::max<std::size_t>(total, 1), parts.front().slots());
  for (const ReplayBuffer& b : parts)
    for (std::size_t i = 0; i < b.size(); ++i) out.add(b[i]);
  return out;
}

namespace {

void put_values(std::ostream& os, const Eigen::VectorXd& v) {
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.17g", v(i));
    os << buf;
  }
}

Eigen::VectorXd get_values(std::istream& is, Eigen::Index n) {
  Eigen::VectorXd v(n);
  std::string tok;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(is >> tok)) throw InputError("buffer: truncated record");
    v(i) = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace

void ReplayBuffer::save(std::ostream& os) const {
  os << "intman-buffer " << kBufferFormatVersion << '\n'
     << "slots " << slots_ << " features " << kNumFeatures << '\n'
     << "capacity " << capacity_ << " count " << size() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < size(); ++i) {
    const Transition& t = (*this)[i];
    std::snprintf(buf, sizeof buf, "%.17g", t.reward);
    os << buf;
    put_values(os, t.state);
    put_values(os, t.action);
    put_values(os, t.next_state);
    os << '\n';
  }
}

ReplayBuffer ReplayBuffer::load(std::istream& is) {
  std::string magic, w1, w2, w3, w4;
  int version = 0, slots = 0, features = 0;
  std::size_t capacity = 0, count = 0;
  if (!(is >> magic >> version) || magic != "intman-buffer")
    throw InputError("buffer: not a replay buffer file");
  if (version != kBufferFormatVersion) throw InputError("buffer: unsupported format version");
  if (!(is >> w1 >> slots >> w2 >> features >> w3 >> capacity >> w4 >> count) || slots <= 0)
    throw InputError("buffer: bad header");
  if (features != kNumFeatures) throw InputError("buffer: feature count mismatch");
  ReplayBuffer out(std::max(capacity, count), slots);
  const Eigen::Index ns = static_cast<Eigen::Index>(slots) * kNumFeatures;
  for (std::size_t i = 0; i < count; ++i) {
    Transition t;
    t.reward = get_values(is, 1)(0);
    t.state = get_values(is, ns);
    t.action = get_values(is, slots);
    t.next_state = get_values(is, ns);
    out.add(std::move(t));
  }
  return out;
}

void ReplayBuffer::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  save(os);
}

ReplayBuffer ReplayBuffer::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  return load(is);
}

// ---- reward, softmax, noise ----------------------------------------------

double reward(const CoordinationInstance& instance, const SequentialOutcome& outcome, double T_r,
              double r_bar, PenaltyForm form) {
  if (instance.pending.empty()) return 0.0;
  const double n = static_cast<double>(instance.pending.size());
  double r = 0.0;
  for (int id : outcome.entered) {
    const PendingRobot* p = instance.find_pending(id);
    Trajectory full = p->history;
    full.append(outcome.trajectories.at(id));
    const double t_a = full.t0;
    r += p->robot.priority * (full.state_at(t_a + T_r).x - full.x.front()) / n;
  }
  for (int id : outcome.deferred) {
    const PendingRobot* p = instance.find_pending(id);
    const double d = instance.geom().approach_length[static_cast<std::size_t>(p->robot.lane)];
    const double dist = form == PenaltyForm::DistanceCovered ? d + p->state.x : d - p->state.x;
    r -= r_bar * dist * dist / n;
  }
  return r;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  if (z.size() == 0) return z;
  const Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

const Eigen::VectorXd& OuNoise::step(double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  const double s = sigma * std::sqrt(dt_);
  for (Eigen::Index i = 0; i < n_.size(); ++i) n_(i) += -theta_ * n_(i) * dt_ + s * N(rng);
  return n_;
}

double decayed_sigma(double sigma_start, double sigma_end, std::size_t step, std::size_t total) {
  if (total == 0 || step >= total) return sigma_end;
  const double f = static_cast<double>(step) / static_cast<double>(total);
  return sigma_start + (sigma_end - sigma_start) * f;
}

// ---- optimizer --------------------------------------------------------------

Optimizer::Optimizer(OptimizerKind kind, double lr, std::size_t dim)
    : kind_(kind), lr_(lr),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (kind_ == OptimizerKind::Sgd) {
    params -= lr_ * grad;
    return;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

// ---- trainer ----------------------------------------------------------------

Trainer::Trainer(const TrainerConfig& cfg) : rng(cfg.seed), cfg_(cfg) {
  if (cfg.slots <= 0) throw InputError("trainer: slots must be positive");
  actor = Mlp::policy_net(kNumFeatures);
  critic = Mlp::critic_net(cfg.slots * (kNumFeatures + 1), cfg.critic_hidden);
  actor.init(rng);
  critic.init(rng);
  actor_target = actor;
  critic_target = critic;
  actor_opt_ = Optimizer(cfg.optimizer, cfg.actor_lr, actor.num_params());
  critic_opt_ = Optimizer(cfg.optimizer, cfg.critic_lr, critic.num_params());
}

namespace {

/// Slots of a batch of joint states as columns of a 10 x (N * N_r) matrix.
Eigen::MatrixXd slot_columns(const std::vector<const Eigen::VectorXd*>& states, int slots) {
  Eigen::MatrixXd out(kNumFeatures, static_cast<Eigen::Index>(states.size()) * slots);
  for (std::size_t m = 0; m < states.size(); ++m)
    out.middleCols(static_cast<Eigen::Index>(m) * slots, slots) =
        Eigen::Map<const Eigen::MatrixXd>(states[m]->data(), kNumFeatures, slots);
  return out;
}

Eigen::MatrixXd critic_inputs(const std::vector<const Eigen::VectorXd*>& states,
                              const Eigen::MatrixXd& actions, int slots) {
  const Eigen::Index ns = static_cast<Eigen::Index>(slots) * kNumFeatures;
  Eigen::MatrixXd in(ns + slots, static_cast<Eigen::Index>(states.size()));
  for (std::size_t m = 0; m < states.size(); ++m) {
    const auto c = static_cast<Eigen::Index>(m);
    in.col(c).head(ns) = *states[m];
    in.col(c).tail(slots) = actions.col(c);
  }
  return in;
}

}  // namespace

Eigen::VectorXd Trainer::raw_indices(const Eigen::VectorXd& state, bool target) const {
  const Mlp& net = target ? actor_target : actor;
  return net.forward(Eigen::Map<const Eigen::MatrixXd>(state.data(), kNumFeatures, cfg_.slots))
      .transpose();
}

Eigen::VectorXd Trainer::joint_action(const Eigen::VectorXd& state, bool target) const {
  return softmax(raw_indices(state, target));
}

double Trainer::q_value(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                        bool target) const {
  Eigen::VectorXd in(state.size() + action.size());
  in << state, action;
  return (target ? critic_target : critic).forward_scalar(in);
}

double Trainer::critic_loss(const std::vector<const Transition*>& batch,
                            Eigen::VectorXd* grad) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) return 0.0;
  const int S = cfg_.slots;
  std::vector<const Eigen::VectorXd*> s, s2;
  for (const Transition* t : batch) {
    s.push_back(&t->state);
    s2.push_back(&t->next_state);
  }
  // Targets from the target actor (softmax over slots) and target critic.
  const Eigen::MatrixXd raw2 = actor_target.forward(slot_columns(s2, S));
  Eigen::MatrixXd a2(S, n);
  for (Eigen::Index m = 0; m < n; ++m)
    a2.col(m) = softmax(raw2.middleCols(m * S, S).transpose());
  const Eigen::MatrixXd q2 = critic_target.forward(critic_inputs(s2, a2, S));

  Eigen::MatrixXd a(S, n);
  for (Eigen::Index m = 0; m < n; ++m) a.col(m) = batch[static_cast<std::size_t>(m)]->action;
  Mlp::Cache cache;
  const Eigen::MatrixXd q = critic.forward(critic_inputs(s, a, S), &cache);

  Eigen::MatrixXd d(1, n);
  double loss = 0.0;
  for (Eigen::Index m = 0; m < n; ++m) {
    const double y = batch[static_cast<std::size_t>(m)]->reward + cfg_.gamma * q2(0, m);
    const double e = q(0, m) - y;
    loss += e * e;
    d(0, m) = 2.0 * e / static_cast<double>(n);
  }
  if (grad) {
    *grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(critic.num_params()));
    critic.backward(cache, d, grad);
  }
  return loss / static_cast<double>(n);
}

double Trainer::actor_objective(const std::vector<const Transition*>& batch,
                                Eigen::VectorXd* grad) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) return 0.0;
  const int S = cfg_.slots;
  std::vector<const Eigen::VectorXd*> s;
  for (const Transition* t : batch) s.push_back(&t->state);
  Mlp::Cache actor_cache;
  const Eigen::MatrixXd raw = actor.forward(slot_columns(s, S), &actor_cache);
  Eigen::MatrixXd a(S, n);
  for (Eigen::Index m = 0; m < n; ++m) a.col(m) = softmax(raw.middleCols(m * S, S).transpose());
  Mlp::Cache critic_cache;
  const Eigen::MatrixXd q = critic.forward(critic_inputs(s, a, S), &critic_cache);
  const double objective = q.mean();
  if (grad) {
    const Eigen::MatrixXd d_q = Eigen::MatrixXd::Constant(1, n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd d_in = critic.backward(critic_cache, d_q, nullptr);
    Eigen::MatrixXd d_raw(1, n * S);
    for (Eigen::Index m = 0; m < n; ++m) {
      const Eigen::VectorXd g = d_in.col(m).tail(S);
      const Eigen::VectorXd am = a.col(m);
      // Softmax Jacobian: diag(a) - a a^T.
      const Eigen::VectorXd dz = am.cwiseProduct(g.array().matrix() - Eigen::VectorXd::Constant(S, am.dot(g)));
      d_raw.middleCols(m * S, S) = dz.transpose();
    }
    *grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(actor.num_params()));
    actor.backward(actor_cache, d_raw, grad);
  }
  return objective;
}

double Trainer::critic_update(const std::vector<const Transition*>& batch) {
  Eigen::VectorXd g;
  const double loss = critic_loss(batch, &g);
  Eigen::VectorXd p = critic.params();
  critic_opt_.step(p, g);
  critic.set_params(p);
  return loss;
}

double Trainer::actor_update(const std::vector<const Transition*>& batch) {
  Eigen::VectorXd g;
  actor_objective(batch, &g);
  Eigen::VectorXd p = actor.params();
  actor_opt_.step(p, -g);
  actor.set_params(p);
  return g.norm();
}

void Trainer::polyak_update(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw InputError("polyak factor must lie in (0, 1]");
  actor_target.set_params((1.0 - rho) * actor_target.params() + rho * actor.params());
  critic_target.set_params((1.0 - rho) * critic_target.params() + rho * critic.params());
}

Trainer::StepStats Trainer::train_step(const ReplayBuffer& buffer) {
  StepStats st;
  const auto batch = buffer.sample(cfg_.batch, rng);
  if (batch.empty()) return st;
  for (const Transition* t : batch) st.mean_reward += t->reward;
  st.mean_reward /= static_cast<double>(batch.size());
  st.critic_loss = critic_update(batch);
  actor_update(batch);
  polyak_update();
  ++iterations;
  return st;
}

// ---- MDP wrapper -------------------------------------------------------------

SlotAssignment padded_state(const CoordinationInstance& instance, const FeatureScaler& scaler,
                            int slots) {
  if (instance.pending.size() > static_cast<std::size_t>(slots))
    throw InputError("padded_state: " + std::to_string(instance.pending.size()) +
                     " pending robots exceed " + std::to_string(slots) + " slots");
  const TrafficView view(instance);
  struct Entry {
    int id;
    double arrival;
    FeatureVector raw;
  };
  std::vector<Entry> entries;
  for (const PendingRobot& p : instance.pending)
    entries.push_back({p.robot.id, p.robot.arrival_time, features(p.robot.id, view)});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.raw[kDistanceTraveled] != b.raw[kDistanceTraveled])
      return a.raw[kDistanceTraveled] > b.raw[kDistanceTraveled];
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.id < b.id;
  });
  SlotAssignment out;
  out.state.resize(static_cast<Eigen::Index>(slots) * kNumFeatures);
  const FeatureVector pseudo = pseudo_features();
  for (int j = 0; j < slots; ++j) {
    const FeatureVector f = static_cast<std::size_t>(j) < entries.size()
                                ? scaler.apply(entries[static_cast<std::size_t>(j)].raw)
                                : pseudo;
    for (int i = 0; i < kNumFeatures; ++i)
      out.state(j * kNumFeatures + i) = f[static_cast<std::size_t>(i)];
  }
  for (const Entry& e : entries) out.ids.push_back(e.id);
  return out;
}

namespace {

Eigen::VectorXd empty_state(int slots) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(slots) * kNumFeatures);
  const FeatureVector pseudo = pseudo_features();
  for (int j = 0; j < slots; ++j)
    for (int i = 0; i < kNumFeatures; ++i) s(j * kNumFeatures + i) = pseudo[static_cast<std::size_t>(i)];
  return s;
}

}  // namespace

OnlineLearner::OnlineLearner(Trainer& trainer, ReplayBuffer& buffer, FeatureScaler scaler,
                             LearnerConfig cfg, unsigned long long noise_seed)
    : trainer_(trainer), buffer_(buffer), scaler_(scaler), cfg_(cfg), noise_rng_(noise_seed),
      noise_(trainer.config().slots, cfg.ou_theta) {
  if (buffer.slots() != trainer.config().slots)
    throw InputError("learner: buffer and trainer slot counts differ");
}

void OnlineLearner::act(const CoordinationInstance& instance) {
  slots_ = padded_state(instance, scaler_, trainer_.config().slots);
  const double sigma = decayed_sigma(cfg_.sigma_start, cfg_.sigma_end, ticks_, cfg_.sigma_steps);
  action_ = trainer_.joint_action(slots_.state) + noise_.step(sigma, noise_rng_);
  acted_k_ = instance.k;
}

Precedence OnlineLearner::precedence(const CoordinationInstance& instance) {
  act(instance);
  Precedence p;
  for (std::size_t j = 0; j < slots_.ids.size(); ++j)
    p[slots_.ids[j]] = action_(static_cast<Eigen::Index>(j));
  return p;
}

void OnlineLearner::close_open(const Eigen::VectorXd& next_state) {
  if (!open_) return;
  open_->next_state = next_state;
  buffer_.add(std::move(*open_));
  open_.reset();
  if (cfg_.online_updates && buffer_.size() >= trainer_.config().batch) trainer_.train_step(buffer_);
}

Transition OnlineLearner::step(const CoordinationInstance& instance,
                               const SequentialOutcome& outcome) {
  if (!acted_k_ || *acted_k_ != instance.k) act(instance);
  close_open(slots_.state);
  Transition t;
  t.state = slots_.state;
  t.action = action_;
  t.reward = reward(instance, outcome, cfg_.T_r, cfg_.r_bar, cfg_.penalty);
  open_ = t;
  ++ticks_;
  acted_k_.reset();
  return t;
}

void OnlineLearner::on_tick(const CoordinationInstance& instance, const Precedence&,
                            const SequentialOutcome& outcome) {
  step(instance, outcome);
}

void OnlineLearner::on_finish(const SimulationLog&) { close_open(empty_state(trainer_.config().slots)); }

// ---- CML ---------------------------------------------------------------------

TrainResult cml_train(const ReplayBuffer& merged, const TrainerConfig& cfg, std::size_t iterations,
                      std::size_t curve_every) {
  if (merged.empty()) throw InputError("cml_train: empty buffer");
  if (merged.slots() != cfg.slots) throw InputError("cml_train: slot count mismatch");
  Trainer tr(cfg);
  TrainResult out;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Trainer::StepStats st = tr.train_step(merged);
    if (curve_every && (it % curve_every == 0 || it + 1 == iterations))
      out.curve.push_back({it, st.critic_loss, st.mean_reward});
  }
  out.actor = tr.actor;
  return out;
}

std::vector<TrainResult> cml_train_ensemble(const ReplayBuffer& merged, TrainerConfig cfg,
                                            std::size_t iterations,
                                            const std::vector<unsigned long long>& seeds) {
  std::vector<TrainResult> out;
  for (unsigned long long s : seeds) {
    cfg.seed = s;
    out.push_back(cml_train(merged, cfg, iterations));
  }
  return out;
}

}  // namespace intman
