#include "ac2c/error.hpp"
#include "ac2c/learning.hpp"

namespace ac2c::learning {

namespace {

// Seed streams, one per purpose.
enum Stream : std::uint64_t { kInit = 1, kExplore = 2, kReplay = 3, kEpisode = 4 };

protocol::ModelDims dims_for(const envs::EnvSpec& spec, const LearnerConfig& cfg) {
  return {spec.obs_dim, spec.action_dim, spec.action_kind, cfg.width};
}

PolicyModel make_policy(const envs::EnvSpec& spec, const LearnerConfig& cfg, neural::Rng& rng) {
  return PolicyModel::create(dims_for(spec, cfg), rng);
}

ControllerLabels keep_rows(const ControllerLabels& in, const std::vector<bool>& keep) {
  std::vector<Eigen::Index> rows;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (keep[r]) rows.push_back(static_cast<Eigen::Index>(r));
  }
  const auto pick = [&](const Matrix& m) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    return out;
  };
  ControllerLabels out;
  out.c0 = pick(in.c0);
  out.c1 = pick(in.c1);
  out.action_one_round = pick(in.action_one_round);
  out.action_two_round = pick(in.action_two_round);
  for (Eigen::Index r : rows) out.labels.push_back(in.labels[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace

// ---- DDPG ------------------------------------------------------------------

DdpgTrainer::DdpgTrainer(const envs::EnvSpec& spec, const LearnerConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      rng_(derive_seed(seed, kExplore, 0)),
      policy_([&] {
        neural::Rng init(derive_seed(seed, kInit, 0));
        return make_policy(spec, cfg, init);
      }()),
      controller_([&] {
        neural::Rng init(derive_seed(seed, kInit, 1));
        return ControllerModel::create(cfg.width, init);
      }()),
      critic_([&] {
        neural::Rng init(derive_seed(seed, kInit, 2));
        return CriticModel::create(spec.n_agents, cfg.width, spec.obs_dim, spec.action_dim, init);
      }()),
      targets_{PolicyModel(policy_), CriticModel(critic_), 0},
      replay_(cfg.replay_capacity, derive_seed(seed, kReplay, 0)) {
  if (spec.action_kind != neural::ActionKind::Continuous) {
    throw ConfigError("DDPG requires a continuous-action environment, got " + spec.name);
  }
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
}

UpdateStats DdpgTrainer::update_cycle() {
  const auto items = replay_.sample(static_cast<std::size_t>(cfg_.batch_size));
  const Batch batch = make_batch(items, cfg_.range);
  UpdateStats s;
  const Matrix y = td_targets(batch, targets_, controller_, cfg_);
  s.critic_loss = critic_update(batch, y, critic_, cfg_);
  s.actor_objective = actor_update_ddpg(batch, policy_, controller_, critic_, cfg_);
  if (cfg_.mode == ProtocolMode::AC2C) {
    const auto labeled = controller_labels(batch.obs, batch.hist, batch.comm, policy_, cfg_.threshold);
    s.controller_loss = controller_update(labeled, controller_, cfg_);
  }
  update_targets(targets_, policy_, critic_, cfg_.tau, cfg_.hard_update_period);
  s.updates = 1;
  return s;
}

EpisodeStats DdpgTrainer::train_episode(envs::Environment& env, int episode, int total_episodes) {
  const double sigma = noise_schedule(cfg_, episode, total_episodes);
  Rollout rollout = run_episode(env, derive_seed(seed_, kEpisode, static_cast<std::uint64_t>(episode)),
                                policy_, controller_, cfg_, ActionSelection::Explore, sigma, rng_);
  for (auto& t : rollout.transitions) replay_.push(std::move(t));

  const int cycles = cfg_.updates_per_episode > 0 ? cfg_.updates_per_episode : rollout.stats.steps;
  UpdateStats total;
  if (replay_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
    for (int k = 0; k < cycles; ++k) {
      const UpdateStats s = update_cycle();
      total.critic_loss += s.critic_loss;
      total.actor_objective += s.actor_objective;
      total.controller_loss += s.controller_loss;
      total.updates += 1;
    }
  }
  if (total.updates > 0) {
    total.critic_loss /= total.updates;
    total.actor_objective /= total.updates;
    total.controller_loss /= total.updates;
  }
  last_ = total;
  return rollout.stats;
}

diff::MutableNamedStores DdpgTrainer::stores() {
  return {{"policy", &policy_.store()},
          {"controller", &controller_.store()},
          {"critic", &critic_.store},
          {"target_policy", &targets_.policy.store()},
          {"target_critic", &targets_.critic.store}};
}

// ---- REINFORCE -------------------------------------------------------------

ReinforceTrainer::ReinforceTrainer(const envs::EnvSpec& spec, const LearnerConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      rng_(derive_seed(seed, kExplore, 0)),
      policy_([&] {
        neural::Rng init(derive_seed(seed, kInit, 0));
        return make_policy(spec, cfg, init);
      }()),
      controller_([&] {
        neural::Rng init(derive_seed(seed, kInit, 1));
        return ControllerModel::create(cfg.width, init);
      }()) {
  if (spec.action_kind != neural::ActionKind::Discrete) {
    throw ConfigError("REINFORCE requires a discrete-action environment, got " + spec.name);
  }
  if (cfg.reinforce_episodes < 2) {
    throw ConfigError("reinforce_episodes must be at least 2 for the batch-mean baseline");
  }
}

EpisodeStats ReinforceTrainer::train_episode(envs::Environment& env, int episode, int /*total_episodes*/) {
  Rollout rollout = run_episode(env, derive_seed(seed_, kEpisode, static_cast<std::uint64_t>(episode)),
                                policy_, controller_, cfg_, ActionSelection::Explore, 0.0, rng_);
  pending_.push_back(std::move(rollout.samples));
  last_ = {};
  if (static_cast<int>(pending_.size()) >= cfg_.reinforce_episodes) {
    if (cfg_.mode == ProtocolMode::AC2C) {
      // Labels come from the policy that generated the batch.
      double loss = 0.0;
      int used = 0;
      for (const auto& e : pending_) {
        const protocol::CommBatch comm(e.n_agents, e.topologies);
        const auto labeled = keep_rows(controller_labels(e.obs, e.hist, comm, policy_, cfg_.threshold), e.active);
        if (labeled.labels.empty()) continue;
        loss += controller_update(labeled, controller_, cfg_);
        ++used;
      }
      last_.controller_loss = used > 0 ? loss / used : 0.0;
    }
    last_.actor_objective = reinforce_update(pending_, policy_, controller_, cfg_);
    last_.updates = 1;
    pending_.clear();
  }
  return rollout.stats;
}

diff::MutableNamedStores ReinforceTrainer::stores() {
  return {{"policy", &policy_.store()}, {"controller", &controller_.store()}};
}

}  // namespace ac2c::learning
