#include "ac2c/error.hpp"
#include "ac2c/learning.hpp"

#include <cmath>
#include <numeric>

namespace ac2c::learning {

namespace {

double finite_or_throw(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(std::string(what) + " is not finite");
  return x;
}

}  // namespace

// ---- critic model and targets ----------------------------------------------

CriticModel CriticModel::create(int n_agents, int width, int obs_dim, int action_dim, neural::Rng& rng) {
  ParamStore store;
  neural::CriticNet::init(store, "critic", n_agents, width, obs_dim, action_dim, rng);
  return CriticModel(n_agents, width, obs_dim, action_dim, std::move(store));
}

CriticModel::CriticModel(int n_agents_, int width_, int obs_dim_, int action_dim_, ParamStore store_)
    : n_agents(n_agents_),
      width(width_),
      obs_dim(obs_dim_),
      action_dim(action_dim_),
      store(std::move(store_)),
      net(store, "critic", n_agents_, width_, obs_dim_, action_dim_) {}

void soft_update(ParamStore& target, const ParamStore& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("soft_update: tau must lie in [0, 1]");
  target.blend_from(online, tau);
}

void update_targets(TargetNets& targets, const PolicyModel& policy, const CriticModel& critic,
                    double tau, int hard_period) {
  targets.updates += 1;
  const bool hard = hard_period > 0 && targets.updates % hard_period == 0;
  soft_update(targets.policy.store(), policy.store(), hard ? 1.0 : tau);
  soft_update(targets.critic.store, critic.store, hard ? 1.0 : tau);
}

// ---- DDPG ------------------------------------------------------------------

Matrix td_targets(std::span<const double> rewards, const std::vector<bool>& dones,
                  const Matrix& q_next, int n_agents, double gamma) {
  if (q_next.cols() != 1 || q_next.rows() != static_cast<Eigen::Index>(rewards.size()) * n_agents ||
      dones.size() != rewards.size()) {
    throw ShapeError("td_targets: " + std::to_string(rewards.size()) + " rewards, " +
                     std::to_string(dones.size()) + " done flags and q_next " + diff::shape_string(q_next));
  }
  Matrix y(q_next.rows(), 1);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const std::size_t b = static_cast<std::size_t>(r / n_agents);
    y(r, 0) = rewards[b] + (dones[b] ? 0.0 : gamma * q_next(r, 0));
  }
  return y;
}

Matrix td_targets(const Batch& batch, const TargetNets& targets, const ControllerModel& controller,
                  const LearnerConfig& cfg) {
  const auto next = protocol::forward(cfg.mode, targets.policy, controller.net(), batch.next_comm,
                                      Value::constant(batch.next_obs), Value::constant(batch.next_hist),
                                      cfg.threshold);
  const Value q = targets.critic.net.value(Value::constant(batch.next_hist), Value::constant(batch.next_obs),
                                           diff::detach(next.actions));
  return td_targets(batch.rewards, batch.dones, q.data(), batch.n_agents, cfg.gamma);
}

double critic_update(const Batch& batch, const Matrix& targets, CriticModel& critic,
                     const LearnerConfig& cfg) {
  critic.store.zero_grads();
  const Value q = critic.net.value(Value::constant(batch.hist), Value::constant(batch.obs),
                                   Value::constant(batch.actions));
  const Value loss = diff::mean(diff::square(diff::sub(q, Value::constant(targets))));
  const double value = finite_or_throw(loss.item(), "critic loss");
  diff::backward(loss);
  diff::adam_step(critic.store, cfg.critic_lr, cfg.clip_norm);
  critic.store.zero_grads();
  return value;
}

namespace {

QFunction critic_fn(const CriticModel& critic) {
  return [&critic](const Value& hist, const Value& obs, const Value& actions) {
    return critic.net.value(hist, obs, actions);
  };
}

}  // namespace

Value ddpg_objective(const Batch& batch, const PolicyModel& policy, const ControllerModel& controller,
                     const QFunction& q, const LearnerConfig& cfg) {
  const Value obs = Value::constant(batch.obs);
  const Value hist = Value::constant(batch.hist);
  const auto fwd = protocol::forward(cfg.mode, policy, controller.net(), batch.comm, obs, hist, cfg.threshold);
  return diff::mean(q(hist, obs, fwd.actions));
}

Value ddpg_objective(const Batch& batch, const PolicyModel& policy, const ControllerModel& controller,
                     const CriticModel& critic, const LearnerConfig& cfg) {
  return ddpg_objective(batch, policy, controller, critic_fn(critic), cfg);
}

double actor_update_ddpg(const Batch& batch, PolicyModel& policy, const ControllerModel& controller,
                         const CriticModel& critic, const LearnerConfig& cfg) {
  return actor_update_ddpg(batch, policy, controller, critic_fn(critic), cfg);
}

double actor_update_ddpg(const Batch& batch, PolicyModel& policy, const ControllerModel& controller,
                         const QFunction& q, const LearnerConfig& cfg) {
  policy.store().zero_grads();
  const Value objective = ddpg_objective(batch, policy, controller, q, cfg);
  const double value = finite_or_throw(objective.item(), "actor objective");
  diff::backward(diff::scale(objective, -1.0));
  diff::adam_step(policy.store(), cfg.actor_lr, cfg.clip_norm);
  policy.store().zero_grads();
  return value;
}

// ---- controller ------------------------------------------------------------

int controller_label(const Eigen::RowVectorXd& a_one, const Eigen::RowVectorXd& a_two, double threshold) {
  return (a_one - a_two).norm() > threshold ? 1 : 0;
}

ControllerLabels controller_labels(const Matrix& obs, const Matrix& hist,
                                   const protocol::CommBatch& comm, const PolicyModel& policy,
                                   double threshold) {
  const auto encoded = policy.encoder().encode(Value::constant(obs), Value::constant(hist));
  const Value c1 = protocol::run_round1(policy.round1(), comm, encoded.c0);
  const std::vector<int> open(static_cast<std::size_t>(c1.rows()), 1);
  const Value c2 = protocol::run_round2(ProtocolMode::AC2C, policy.round2(), comm, c1, open);
  const Value zero = Value::constant(Matrix::Zero(c1.rows(), c1.cols()));
  ControllerLabels out;
  out.c0 = encoded.c0.data();
  out.c1 = c1.data();
  out.action_one_round = policy.actor().act(encoded.c0, c1, zero).data();
  out.action_two_round = policy.actor().act(encoded.c0, c1, c2).data();
  out.labels.resize(static_cast<std::size_t>(c1.rows()));
  for (Eigen::Index r = 0; r < c1.rows(); ++r) {
    out.labels[static_cast<std::size_t>(r)] =
        controller_label(out.action_one_round.row(r), out.action_two_round.row(r), threshold);
  }
  return out;
}

Value controller_loss(const ControllerLabels& labeled, const ControllerModel& controller) {
  const Value logit = controller.net().logit(Value::constant(labeled.c0), Value::constant(labeled.c1));
  Matrix y(logit.rows(), 1);
  for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, 0) = labeled.labels[static_cast<std::size_t>(r)];
  // -[y log s + (1 - y) log(1 - s)] = softplus(x) - y x for s = sigmoid(x)
  return diff::mean(diff::sub(diff::softplus(logit), diff::mul(logit, Value::constant(y))));
}

double controller_update(const ControllerLabels& labeled, ControllerModel& controller,
                         const LearnerConfig& cfg) {
  if (labeled.labels.empty()) return 0.0;
  controller.store().zero_grads();
  const Value loss = controller_loss(labeled, controller);
  const double value = finite_or_throw(loss.item(), "controller loss");
  diff::backward(loss);
  diff::adam_step(controller.store(), cfg.controller_lr, cfg.clip_norm);
  controller.store().zero_grads();
  return value;
}

// ---- REINFORCE -------------------------------------------------------------

double discounted_return(std::span<const double> rewards, double gamma) {
  double g = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) g = *it + gamma * g;
  return g;
}

Value reinforce_objective(std::span<const EpisodeSamples> episodes, std::span<const double> returns,
                          double baseline, const PolicyModel& policy, const ControllerModel& controller,
                          const LearnerConfig& cfg) {
  if (episodes.empty() || returns.size() != episodes.size()) {
    throw DomainError("reinforce: need one return per episode and at least one episode");
  }
  const int n = episodes.front().n_agents;
  Eigen::Index rows = 0;
  std::vector<comm::Topology> topologies;
  for (const auto& e : episodes) {
    if (e.n_agents != n) throw ShapeError("reinforce: episodes with different agent counts");
    rows += e.obs.rows();
    topologies.insert(topologies.end(), e.topologies.begin(), e.topologies.end());
  }
  Matrix obs(rows, episodes.front().obs.cols());
  Matrix hist(rows, episodes.front().hist.cols());
  Matrix coef = Matrix::Zero(rows, policy.dims().action_dim);
  const double scale = 1.0 / static_cast<double>(episodes.size());
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const auto& e = episodes[k];
    obs.middleRows(offset, e.obs.rows()) = e.obs;
    hist.middleRows(offset, e.hist.rows()) = e.hist;
    const double advantage = returns[k] - baseline;
    for (Eigen::Index r = 0; r < e.obs.rows(); ++r) {
      if (e.active[static_cast<std::size_t>(r)]) coef(offset + r, e.actions[static_cast<std::size_t>(r)]) = advantage * scale;
    }
    offset += e.obs.rows();
  }
  const protocol::CommBatch comm(n, std::move(topologies));
  const auto fwd = protocol::forward(cfg.mode, policy, controller.net(), comm, Value::constant(obs),
                                     Value::constant(hist), cfg.threshold);
  return diff::sum(diff::mul(diff::log_softmax_rows(fwd.actions), Value::constant(coef)));
}

double reinforce_update(std::span<const EpisodeSamples> episodes, PolicyModel& policy,
                        const ControllerModel& controller, const LearnerConfig& cfg) {
  if (policy.dims().action_kind != neural::ActionKind::Discrete) {
    throw ConfigError("REINFORCE requires a discrete-action environment");
  }
  if (episodes.size() < 2) {
    throw ConfigError("REINFORCE with a batch-mean baseline needs at least 2 episodes per update");
  }
  std::vector<double> returns;
  for (const auto& e : episodes) returns.push_back(discounted_return(e.rewards, cfg.gamma));
  const double baseline = std::accumulate(returns.begin(), returns.end(), 0.0) / returns.size();
  policy.store().zero_grads();
  const Value objective = reinforce_objective(episodes, returns, baseline, policy, controller, cfg);
  const double value = finite_or_throw(objective.item(), "REINFORCE objective");
  diff::backward(diff::scale(objective, -1.0));
  diff::adam_step(policy.store(), cfg.actor_lr, cfg.clip_norm);
  policy.store().zero_grads();
  return value;
}

}  // namespace ac2c::learning
