#pragma once

// Training: centralized-critic DDPG for the particle worlds, REINFORCE with a
// batch-mean baseline for traffic junction, and the self-supervised two-hop
// controller. Histories are stored with each sample and treated as inputs
// (no backpropagation through time).

#include "ac2c/envs.hpp"
#include "ac2c/protocol.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace ac2c::learning {

using diff::Matrix;
using diff::ParamStore;
using diff::Value;
using protocol::ControllerModel;
using protocol::PolicyModel;
using ac2c::ProtocolMode;

// splitmix64 over (base, stream, index); independent seeds per purpose.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

struct LearnerConfig {
  ProtocolMode mode = ProtocolMode::AC2C;
  double range = 1.0;
  double threshold = 0.5;
  std::int64_t bits_per_message = 4096;
  int width = neural::kDefaultWidth;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double controller_lr = 1e-4;
  double clip_norm = 0.1;
  double gamma = 0.99;
  double tau = 0.01;
  int hard_update_period = 200;
  std::size_t replay_capacity = 1'000'000;
  int batch_size = 128;
  // DDPG update cycles run after each episode; <= 0 means one per env step.
  int updates_per_episode = 0;
  double noise_start = 0.1;
  double noise_end = 0.01;
  int reinforce_episodes = 4;  // episodes per REINFORCE update (baseline batch)
};

// ---- replay ----------------------------------------------------------------

struct Transition {
  Matrix obs;        // N x obs_dim
  Matrix hist;       // N x width
  Matrix actions;    // N x action_dim, as executed
  double reward = 0.0;
  Matrix next_obs;
  Matrix next_hist;
  bool done = false;
  std::vector<comm::Point> positions;
  std::vector<comm::Point> next_positions;
  std::vector<bool> active;
  std::vector<bool> next_active;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  // Uniform with replacement; DomainError if empty or n == 0.
  std::vector<const Transition*> sample(std::size_t n);

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
  std::mt19937_64 rng_;
};

// Stacked samples: row b * N + i is agent i of sample b.
struct Batch {
  int n_agents = 0;
  int samples = 0;
  Matrix obs, hist, actions, next_obs, next_hist;
  std::vector<double> rewards;  // per sample
  std::vector<bool> dones;      // per sample
  protocol::CommBatch comm;
  protocol::CommBatch next_comm;
};

Batch make_batch(std::span<const Transition* const> items, double range);

// ---- models ----------------------------------------------------------------

struct CriticModel {
  static CriticModel create(int n_agents, int width, int obs_dim, int action_dim, neural::Rng& rng);
  CriticModel(int n_agents, int width, int obs_dim, int action_dim, ParamStore store);
  CriticModel(const CriticModel& other)
      : CriticModel(other.n_agents, other.width, other.obs_dim, other.action_dim, other.store.clone()) {}
  CriticModel& operator=(const CriticModel&) = delete;
  CriticModel(CriticModel&&) = default;

  int n_agents, width, obs_dim, action_dim;
  ParamStore store;
  neural::CriticNet net;
};

struct TargetNets {
  PolicyModel policy;
  CriticModel critic;
  int updates = 0;
};

// target <- tau * online + (1 - tau) * target. ShapeError on layout mismatch.
void soft_update(ParamStore& target, const ParamStore& online, double tau);
// Soft update of both targets, plus an exact copy every `hard_period` calls.
void update_targets(TargetNets& targets, const PolicyModel& policy, const CriticModel& critic,
                    double tau, int hard_period);

// ---- DDPG ------------------------------------------------------------------

// y = r + gamma * (1 - done) * q_next, row-wise over (B * N) x 1 values with
// per-sample rewards.
Matrix td_targets(std::span<const double> rewards, const std::vector<bool>& dones,
                  const Matrix& q_next, int n_agents, double gamma);

// Evaluates the target actor on next states and the target critic on the
// resulting joint actions.
Matrix td_targets(const Batch& batch, const TargetNets& targets, const ControllerModel& controller,
                  const LearnerConfig& cfg);

// Mean squared TD error; one clipped Adam step on the critic. Returns the
// pre-step loss.
double critic_update(const Batch& batch, const Matrix& targets, CriticModel& critic,
                     const LearnerConfig& cfg);

// Q(hist, obs, actions) -> (B * N) x 1.
using QFunction = std::function<Value(const Value& hist, const Value& obs, const Value& actions)>;

// Scalar mean critic value of the current policy's actions (the objective
// being maximized), built as a differentiable graph.
Value ddpg_objective(const Batch& batch, const PolicyModel& policy, const ControllerModel& controller,
                     const QFunction& q, const LearnerConfig& cfg);
Value ddpg_objective(const Batch& batch, const PolicyModel& policy, const ControllerModel& controller,
                     const CriticModel& critic, const LearnerConfig& cfg);

// One clipped Adam ascent step on the policy; the critic is not stepped.
// Returns the pre-step objective.
double actor_update_ddpg(const Batch& batch, PolicyModel& policy, const ControllerModel& controller,
                         const QFunction& q, const LearnerConfig& cfg);
double actor_update_ddpg(const Batch& batch, PolicyModel& policy, const ControllerModel& controller,
                         const CriticModel& critic, const LearnerConfig& cfg);

// ---- controller ------------------------------------------------------------

struct ControllerLabels {
  Matrix c0, c1;               // controller inputs, R x width
  Matrix action_one_round;     // a^I  = act(c0, c1, 0)
  Matrix action_two_round;     // a^II = act(c0, c1, c2) with every gate open
  std::vector<int> labels;     // 1[ ||a^I - a^II||_2 > T ]
};

// 1[ ||a_one - a_two||_2 > threshold ]
int controller_label(const Eigen::RowVectorXd& a_one, const Eigen::RowVectorXd& a_two, double threshold);

// Replays the batch's current states through the policy with all gates open.
ControllerLabels controller_labels(const Matrix& obs, const Matrix& hist,
                                   const protocol::CommBatch& comm, const PolicyModel& policy,
                                   double threshold);

// Binary cross-entropy between the controller score and the labels, through
// the logit. One clipped Adam step on the controller only; returns pre-step
// loss.
Value controller_loss(const ControllerLabels& labeled, const ControllerModel& controller);
double controller_update(const ControllerLabels& labeled, ControllerModel& controller,
                         const LearnerConfig& cfg);

// ---- REINFORCE -------------------------------------------------------------

// One episode's decision points. Groups are timesteps.
struct EpisodeSamples {
  int n_agents = 0;
  Matrix obs;                          // (T * N) x obs_dim
  Matrix hist;                         // (T * N) x width
  std::vector<int> actions;            // chosen discrete action per row
  std::vector<bool> active;            // rows that acted
  std::vector<comm::Topology> topologies;
  std::vector<double> rewards;         // per timestep
};

double discounted_return(std::span<const double> rewards, double gamma);

// Sum over episodes of (G_e - b) * sum_{active rows} log pi(a | s), divided by
// the episode count, as a differentiable scalar.
Value reinforce_objective(std::span<const EpisodeSamples> episodes, std::span<const double> returns,
                          double baseline, const PolicyModel& policy, const ControllerModel& controller,
                          const LearnerConfig& cfg);

// Ascends reinforce_objective with baseline = mean return of the batch.
// ConfigError for continuous-action policies. Returns the pre-step objective.
double reinforce_update(std::span<const EpisodeSamples> episodes, PolicyModel& policy,
                        const ControllerModel& controller, const LearnerConfig& cfg);

// ---- rollouts --------------------------------------------------------------

enum class ActionSelection { Greedy, Explore };

struct EpisodeStats {
  int steps = 0;
  double total_reward = 0.0;
  double reward_per_step_per_agent = 0.0;
  std::int64_t round1_bits = 0;
  std::int64_t round2_bits = 0;
  double opening_rate = 0.0;  // mean over steps of the open-gate fraction of active agents
  int collisions = 0;
  bool success = false;  // traffic junction only
};

struct Rollout {
  EpisodeStats stats;
  std::vector<Transition> transitions;
  EpisodeSamples samples;  // discrete environments
};

// One episode under the protocol. Continuous actions: Explore adds
// N(0, noise_sigma^2) noise and clips to [-1, 1]. Discrete actions: Explore
// samples the softmax policy, Greedy takes the arg max.
Rollout run_episode(envs::Environment& env, std::uint64_t seed, const PolicyModel& policy,
                    const ControllerModel& controller, const LearnerConfig& cfg,
                    ActionSelection selection, double noise_sigma, std::mt19937_64& rng,
                    envs::TraceWriter* trace = nullptr);

// ---- trainers --------------------------------------------------------------

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  double controller_loss = 0.0;
  int updates = 0;
};

class Trainer {
 public:
  virtual ~Trainer() = default;
  // Runs one training episode (and any updates it triggers).
  virtual EpisodeStats train_episode(envs::Environment& env, int episode, int total_episodes) = 0;
  virtual const UpdateStats& last_update() const = 0;
  virtual const PolicyModel& policy() const = 0;
  virtual const ControllerModel& controller() const = 0;
  virtual diff::MutableNamedStores stores() = 0;
  virtual std::string name() const = 0;
};

class DdpgTrainer : public Trainer {
 public:
  DdpgTrainer(const envs::EnvSpec& spec, const LearnerConfig& cfg, std::uint64_t seed);

  EpisodeStats train_episode(envs::Environment& env, int episode, int total_episodes) override;
  const UpdateStats& last_update() const override { return last_; }
  const PolicyModel& policy() const override { return policy_; }
  const ControllerModel& controller() const override { return controller_; }
  diff::MutableNamedStores stores() override;
  std::string name() const override { return "ddpg"; }

  UpdateStats update_cycle();
  const ReplayBuffer& replay() const { return replay_; }
  const CriticModel& critic() const { return critic_; }

 private:
  LearnerConfig cfg_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  PolicyModel policy_;
  ControllerModel controller_;
  CriticModel critic_;
  TargetNets targets_;
  ReplayBuffer replay_;
  UpdateStats last_;
};

class ReinforceTrainer : public Trainer {
 public:
  ReinforceTrainer(const envs::EnvSpec& spec, const LearnerConfig& cfg, std::uint64_t seed);

  EpisodeStats train_episode(envs::Environment& env, int episode, int total_episodes) override;
  const UpdateStats& last_update() const override { return last_; }
  const PolicyModel& policy() const override { return policy_; }
  const ControllerModel& controller() const override { return controller_; }
  diff::MutableNamedStores stores() override;
  std::string name() const override { return "reinforce"; }

 private:
  LearnerConfig cfg_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  PolicyModel policy_;
  ControllerModel controller_;
  std::vector<EpisodeSamples> pending_;
  UpdateStats last_;
};

// Exploration noise scale, decaying linearly from start to end over training.
double noise_schedule(const LearnerConfig& cfg, int episode, int total_episodes);

}  // namespace ac2c::learning
