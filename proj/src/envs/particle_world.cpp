#include "ac2c/envs.hpp"
#include "ac2c/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ac2c::envs {

namespace {

constexpr int kNavigationNeighborSlots = 2;
constexpr int kPredatorPreySlots = 3;
constexpr double kShapingScale = 0.01;
constexpr double kNearTier = 0.1;
constexpr double kNearReward = 1.0;
constexpr double kFarTier = 0.2;
constexpr double kFarReward = 0.5;
constexpr double kCrowdingDistance = 0.5;
constexpr double kCrowdingPenalty = -0.25;

Vec2 uniform_point(std::mt19937_64& rng, double half_extent) {
  std::uniform_real_distribution<double> dist(-half_extent, half_extent);
  const double x = dist(rng);
  const double y = dist(rng);
  return {x, y};
}

// Indices of `points` sorted by distance to `from`, ties by index, skipping `skip`.
std::vector<int> nearest(const Vec2& from, std::span<const Vec2> points, int skip) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    if (i != skip) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return (points[a] - from).norm() < (points[b] - from).norm();
  });
  return order;
}

// Keeps a body inside the box; the velocity component into the wall is dropped.
void confine(Vec2& pos, Vec2& vel, double half_extent) {
  for (int axis = 0; axis < 2; ++axis) {
    if (pos[axis] > half_extent) {
      pos[axis] = half_extent;
      vel[axis] = std::min(vel[axis], 0.0);
    } else if (pos[axis] < -half_extent) {
      pos[axis] = -half_extent;
      vel[axis] = std::max(vel[axis], 0.0);
    }
  }
}

void cap_speed(Vec2& vel, double max_speed) {
  const double speed = vel.norm();
  if (max_speed > 0 && speed > max_speed) vel *= max_speed / speed;
}

}  // namespace

ParticleRewards particle_rewards(std::span<const Vec2> agents, std::span<const Vec2> targets) {
  const int n = static_cast<int>(agents.size());
  ParticleRewards out;
  double coverage = 0.0;
  for (const auto& target : targets) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& agent : agents) closest = std::min(closest, (agent - target).norm());
    if (n > 0) coverage -= closest;
  }
  out.shaping = kShapingScale * coverage;
  out.detection.assign(n, 0.0);
  out.collision.assign(n, 0.0);
  out.per_agent.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& target : targets) closest = std::min(closest, (agents[i] - target).norm());
    // Tiers are exclusive: the tighter one wins.
    if (closest < kNearTier) {
      out.detection[i] = kNearReward;
    } else if (closest < kFarTier) {
      out.detection[i] = kFarReward;
    }
    for (int j = 0; j < n; ++j) {
      if (j != i && (agents[i] - agents[j]).norm() < kCrowdingDistance) {
        out.collision[i] += kCrowdingPenalty;
      }
    }
    out.per_agent[i] = out.shaping + out.detection[i] + out.collision[i];
    out.total += out.per_agent[i];
  }
  return out;
}

ParticleWorld::ParticleWorld(EnvKind kind, const ParticleConfig& config)
    : kind_(kind), config_(config) {
  if (kind == EnvKind::TrafficJunction) throw ConfigError("ParticleWorld: traffic junction kind");
  if (config.n_agents < 1 || config.n_targets < 1) {
    throw ConfigError("ParticleWorld: need at least one agent and one target");
  }
  spec_.kind = kind;
  spec_.name = to_string(kind);
  spec_.n_agents = config.n_agents;
  spec_.episode_length = config.episode_length;
  spec_.action_kind = neural::ActionKind::Continuous;
  spec_.action_dim = 2;
  // Own position and velocity, then relative positions of targets and peers.
  spec_.obs_dim = kind == EnvKind::CooperativeNavigation
                      ? 4 + 2 * config.n_targets + 2 * kNavigationNeighborSlots
                      : 4 + 2 * kPredatorPreySlots + 2 * kPredatorPreySlots;
  if (config.fixed_landmarks) {
    std::mt19937_64 layout(config.layout_seed);
    for (int k = 0; k < config.n_targets; ++k) {
      fixed_targets_.push_back(uniform_point(layout, config.half_extent));
    }
  }
}

int ParticleWorld::closest_slots() const {
  return kind_ == EnvKind::CooperativeNavigation ? kNavigationNeighborSlots : kPredatorPreySlots;
}

Matrix ParticleWorld::reset(std::uint64_t seed) {
  rng_.seed(seed);
  ParticleState s;
  for (int i = 0; i < config_.n_agents; ++i) {
    s.agent_pos.push_back(uniform_point(rng_, config_.half_extent));
    s.agent_vel.push_back(Vec2::Zero());
  }
  const bool keep_layout = kind_ == EnvKind::CooperativeNavigation && config_.fixed_landmarks;
  for (int k = 0; k < config_.n_targets; ++k) {
    s.target_pos.push_back(keep_layout ? fixed_targets_[k]
                                       : uniform_point(rng_, config_.half_extent));
    s.target_vel.push_back(Vec2::Zero());
  }
  state_ = std::move(s);
  return observe();
}

void ParticleWorld::set_state(ParticleState state) {
  if (static_cast<int>(state.agent_pos.size()) != config_.n_agents ||
      static_cast<int>(state.target_pos.size()) != config_.n_targets ||
      state.agent_vel.size() != state.agent_pos.size() ||
      state.target_vel.size() != state.target_pos.size()) {
    throw DomainError("ParticleWorld::set_state: entity counts do not match the configuration");
  }
  state_ = std::move(state);
}

void ParticleWorld::move_preys() {
  const double max_speed = config_.prey_speed_factor * config_.predator_max_speed;
  for (std::size_t k = 0; k < state_.target_pos.size(); ++k) {
    Vec2& pos = state_.target_pos[k];
    Vec2& vel = state_.target_vel[k];
    const auto order = nearest(pos, state_.agent_pos, -1);
    Vec2 away = pos - state_.agent_pos[order.front()];
    if (away.norm() > 0) away.normalize();
    vel = vel * (1.0 - config_.damping) + away * config_.sensitivity * config_.dt;
    cap_speed(vel, max_speed);
    pos += vel * config_.dt;
    confine(pos, vel, config_.half_extent);
  }
}

StepResult ParticleWorld::step(const Matrix& actions) {
  if (actions.rows() != config_.n_agents || actions.cols() != 2) {
    throw DomainError("step: expected " + std::to_string(config_.n_agents) +
                      "x2 actions, got " + diff::shape_string(actions));
  }
  if (!actions.allFinite() || actions.cwiseAbs().maxCoeff() > 1.0 + 1e-9) {
    throw DomainError("step: continuous actions must be finite and inside [-1, 1]");
  }
  const bool predator = kind_ == EnvKind::PredatorPrey;
  for (int i = 0; i < config_.n_agents; ++i) {
    Vec2& vel = state_.agent_vel[i];
    const Vec2 force(actions(i, 0), actions(i, 1));
    vel = vel * (1.0 - config_.damping) + force * config_.sensitivity * config_.dt;
    if (predator) cap_speed(vel, config_.predator_max_speed);
    state_.agent_pos[i] += vel * config_.dt;
    confine(state_.agent_pos[i], vel, config_.half_extent);
  }
  if (predator) move_preys();
  state_.step += 1;

  const auto rewards = particle_rewards(state_.agent_pos, state_.target_pos);
  StepResult result;
  result.reward = rewards.total;
  result.agent_rewards = rewards.per_agent;
  for (int i = 0; i < config_.n_agents; ++i) {
    for (int j = i + 1; j < config_.n_agents; ++j) {
      if ((state_.agent_pos[i] - state_.agent_pos[j]).norm() < kCrowdingDistance) {
        result.collisions += 1;
      }
    }
  }
  result.done = state_.step >= config_.episode_length;
  result.observations = observe();
  return result;
}

Matrix ParticleWorld::observe() const {
  Matrix obs = Matrix::Zero(config_.n_agents, spec_.obs_dim);
  const int slots = closest_slots();
  for (int i = 0; i < config_.n_agents; ++i) {
    const Vec2& pos = state_.agent_pos[i];
    int col = 0;
    obs(i, col++) = pos.x();
    obs(i, col++) = pos.y();
    obs(i, col++) = state_.agent_vel[i].x();
    obs(i, col++) = state_.agent_vel[i].y();
    if (kind_ == EnvKind::CooperativeNavigation) {
      for (const auto& target : state_.target_pos) {
        obs(i, col++) = target.x() - pos.x();
        obs(i, col++) = target.y() - pos.y();
      }
    } else {
      const auto order = nearest(pos, state_.target_pos, -1);
      for (int s = 0; s < slots; ++s, col += 2) {
        if (s >= static_cast<int>(order.size())) continue;
        obs(i, col) = state_.target_pos[order[s]].x() - pos.x();
        obs(i, col + 1) = state_.target_pos[order[s]].y() - pos.y();
      }
    }
    const auto peers = nearest(pos, state_.agent_pos, i);
    for (int s = 0; s < slots; ++s, col += 2) {
      if (s >= static_cast<int>(peers.size())) continue;
      obs(i, col) = state_.agent_pos[peers[s]].x() - pos.x();
      obs(i, col + 1) = state_.agent_pos[peers[s]].y() - pos.y();
    }
  }
  return obs;
}

std::vector<comm::Point> ParticleWorld::positions() const {
  std::vector<comm::Point> out;
  for (const auto& p : state_.agent_pos) out.push_back({p.x(), p.y()});
  return out;
}

std::vector<bool> ParticleWorld::active() const { return std::vector<bool>(config_.n_agents, true); }

}  // namespace ac2c::envs
