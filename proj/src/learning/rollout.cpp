#include "ac2c/error.hpp"
#include "ac2c/learning.hpp"

#include <algorithm>
#include <cmath>

namespace ac2c::learning {

namespace {

void zero_rows(Matrix& m, const std::vector<bool>& rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r]) m.row(static_cast<Eigen::Index>(r)).setZero();
  }
}

int sample_softmax(const Eigen::RowVectorXd& logits, std::mt19937_64& rng) {
  const double top = logits.maxCoeff();
  std::vector<double> w(static_cast<std::size_t>(logits.size()));
  for (Eigen::Index k = 0; k < logits.size(); ++k) w[static_cast<std::size_t>(k)] = std::exp(logits(k) - top);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  return pick(rng);
}

}  // namespace

double noise_schedule(const LearnerConfig& cfg, int episode, int total_episodes) {
  if (total_episodes <= 1) return cfg.noise_start;
  const double frac = std::clamp(static_cast<double>(episode) / (total_episodes - 1), 0.0, 1.0);
  return cfg.noise_start + (cfg.noise_end - cfg.noise_start) * frac;
}

Rollout run_episode(envs::Environment& env, std::uint64_t seed, const PolicyModel& policy,
                    const ControllerModel& controller, const LearnerConfig& cfg,
                    ActionSelection selection, double noise_sigma, std::mt19937_64& rng,
                    envs::TraceWriter* trace) {
  const envs::EnvSpec& spec = env.spec();
  const int n = spec.n_agents;
  const bool discrete = spec.action_kind == neural::ActionKind::Discrete;
  if (policy.dims().obs_dim != spec.obs_dim || policy.dims().action_dim != spec.action_dim) {
    throw ShapeError("run_episode: policy dims (" + std::to_string(policy.dims().obs_dim) + ", " +
                     std::to_string(policy.dims().action_dim) + ") do not match environment " + spec.name);
  }

  Rollout out;
  out.samples.n_agents = n;
  std::vector<Matrix> sample_obs, sample_hist;
  std::normal_distribution<double> noise(0.0, 1.0);

  Matrix obs = env.reset(seed);
  Matrix hist = Matrix::Zero(n, policy.dims().width);
  double open_fraction_sum = 0.0;
  int gated_steps = 0;
  bool done = false;

  while (!done) {
    const auto positions = env.positions();
    const auto active = env.active();
    const auto topo = comm::Topology::build(positions, cfg.range, active);
    const auto step = protocol::step_protocol(cfg.mode, policy, controller.net(), topo, obs, hist,
                                              cfg.threshold, cfg.bits_per_message);

    Matrix env_actions;
    Matrix stored_actions;
    std::vector<int> chosen;
    if (discrete) {
      env_actions = Matrix::Zero(n, 1);
      chosen.assign(static_cast<std::size_t>(n), 0);
      for (int i = 0; i < n; ++i) {
        const Eigen::RowVectorXd logits = step.actions.row(i);
        int a = 0;
        if (selection == ActionSelection::Explore) {
          a = sample_softmax(logits, rng);
        } else {
          logits.maxCoeff(&a);
        }
        chosen[static_cast<std::size_t>(i)] = a;
        env_actions(i, 0) = active[static_cast<std::size_t>(i)] ? a : 0;
      }
      stored_actions = env_actions;
    } else {
      env_actions = step.actions;
      if (selection == ActionSelection::Explore && noise_sigma > 0.0) {
        for (Eigen::Index r = 0; r < env_actions.rows(); ++r) {
          for (Eigen::Index c = 0; c < env_actions.cols(); ++c) {
            env_actions(r, c) = std::clamp(env_actions(r, c) + noise_sigma * noise(rng), -1.0, 1.0);
          }
        }
      }
      stored_actions = env_actions;
    }

    int n_active = 0, n_open = 0;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      ++n_active;
      n_open += step.rounds.gates[static_cast<std::size_t>(i)];
    }
    if (n_active > 0) {
      open_fraction_sum += static_cast<double>(n_open) / n_active;
      ++gated_steps;
    }

    const auto result = env.step(env_actions);
    done = result.done;

    Matrix next_hist = step.next_histories;
    const auto next_active = env.active();
    std::vector<bool> reset_rows(static_cast<std::size_t>(n));
    const auto spawned = env.spawned();
    for (std::size_t i = 0; i < reset_rows.size(); ++i) reset_rows[i] = !next_active[i] || spawned[i];
    zero_rows(next_hist, reset_rows);

    out.stats.steps += 1;
    out.stats.total_reward += result.reward;
    out.stats.round1_bits += step.cost.round1_bits;
    out.stats.round2_bits += step.cost.round2_bits;
    out.stats.collisions += result.collisions;

    if (trace != nullptr) {
      trace->write(out.stats.steps - 1, positions, env_actions, result.reward, result.collisions,
                   step.rounds.gates);
    }

    if (discrete) {
      sample_obs.push_back(obs);
      sample_hist.push_back(hist);
      out.samples.actions.insert(out.samples.actions.end(), chosen.begin(), chosen.end());
      out.samples.active.insert(out.samples.active.end(), active.begin(), active.end());
      out.samples.topologies.push_back(topo);
      out.samples.rewards.push_back(result.reward);
    } else {
      Transition t;
      t.obs = obs;
      t.hist = hist;
      t.actions = stored_actions;
      t.reward = result.reward;
      t.next_obs = result.observations;
      t.next_hist = next_hist;
      t.done = result.done;
      t.positions = positions;
      t.next_positions = env.positions();
      t.active = active;
      t.next_active = next_active;
      out.transitions.push_back(std::move(t));
    }

    obs = result.observations;
    hist = std::move(next_hist);
  }

  if (discrete) {
    Matrix all_obs(static_cast<Eigen::Index>(sample_obs.size()) * n, spec.obs_dim);
    Matrix all_hist(static_cast<Eigen::Index>(sample_hist.size()) * n, policy.dims().width);
    for (std::size_t t = 0; t < sample_obs.size(); ++t) {
      all_obs.middleRows(static_cast<Eigen::Index>(t) * n, n) = sample_obs[t];
      all_hist.middleRows(static_cast<Eigen::Index>(t) * n, n) = sample_hist[t];
    }
    out.samples.obs = std::move(all_obs);
    out.samples.hist = std::move(all_hist);
  }

  out.stats.reward_per_step_per_agent = out.stats.total_reward / (static_cast<double>(out.stats.steps) * n);
  out.stats.opening_rate = gated_steps > 0 ? open_fraction_sum / gated_steps : 0.0;
  out.stats.success = spec.kind == envs::EnvKind::TrafficJunction && out.stats.collisions == 0;
  return out;
}

}  // namespace ac2c::learning
