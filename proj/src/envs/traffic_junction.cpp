#include "ac2c/envs.hpp"
#include "ac2c/error.hpp"

#include <map>

namespace ac2c::envs {

namespace {

constexpr double kTimePenalty = -0.01;
constexpr double kCollisionPenalty = -20.0;

// First row/column index of each two-lane road.
std::vector<int> road_offsets(Difficulty difficulty) {
  return difficulty == Difficulty::Medium ? std::vector<int>{2} : std::vector<int>{2, 5};
}

}  // namespace

TrafficJunctionConfig TrafficJunctionConfig::medium() { return {}; }

TrafficJunctionConfig TrafficJunctionConfig::hard() {
  TrafficJunctionConfig c;
  c.difficulty = Difficulty::Hard;
  c.max_agents = 20;
  c.entries = 16;
  c.routes = 8;
  c.junctions = 4;
  c.grid_dim = 9;
  c.episode_length = 80;
  return c;
}

TrafficJunctionConfig TrafficJunctionConfig::for_difficulty(Difficulty difficulty) {
  return difficulty == Difficulty::Medium ? medium() : hard();
}

TrafficJunction::TrafficJunction(const TrafficJunctionConfig& config) : config_(config) {
  const int dim = config.grid_dim;
  // Each road has two opposite lanes; every lane is one straight route.
  for (int r : road_offsets(config.difficulty)) {
    std::vector<Cell> east, west, south, north;
    for (int k = 0; k < dim; ++k) {
      east.push_back({k, r + 1});
      west.push_back({dim - 1 - k, r});
      south.push_back({r, k});
      north.push_back({r + 1, dim - 1 - k});
    }
    routes_.push_back(east);
    routes_.push_back(west);
    routes_.push_back(south);
    routes_.push_back(north);
  }
  if (static_cast<int>(routes_.size()) != config.routes || config.entries != 2 * config.routes ||
      junction_count() != config.junctions) {
    throw ConfigError("traffic junction: routes/entries/junctions do not match the " +
                      to_string(config.difficulty) + " layout");
  }
  if (!(config.p_arrive >= 0.0 && config.p_arrive <= 1.0) || config.max_agents < 1) {
    throw ConfigError("traffic junction: p_arrive must be in [0, 1] and max_agents positive");
  }
  spec_.kind = EnvKind::TrafficJunction;
  spec_.name = to_string(EnvKind::TrafficJunction);
  spec_.n_agents = config.max_agents;
  spec_.episode_length = config.episode_length;
  spec_.action_kind = neural::ActionKind::Discrete;
  spec_.action_dim = 2;
  // [active, last gas, route one-hot, x, y, route progress]
  spec_.obs_dim = 5 + config.routes;
  state_.cars.assign(config.max_agents, Car{});
  spawned_.assign(config.max_agents, false);
}

int TrafficJunction::junction_count() const {
  const int roads = static_cast<int>(road_offsets(config_.difficulty).size());
  return roads * roads;
}

int TrafficJunction::active_count() const {
  int n = 0;
  for (const auto& car : state_.cars) n += car.active ? 1 : 0;
  return n;
}

void TrafficJunction::spawn() {
  spawned_.assign(config_.max_agents, false);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int route = 0; route < static_cast<int>(routes_.size()); ++route) {
    const bool arrives = coin(rng_) < config_.p_arrive;
    if (!arrives || !spawning_ || active_count() >= config_.max_agents) continue;
    for (int i = 0; i < config_.max_agents; ++i) {
      if (state_.cars[i].active) continue;
      state_.cars[i] = Car{true, route, 0, 0, 0};
      spawned_[i] = true;
      break;
    }
  }
}

Matrix TrafficJunction::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = JunctionState{};
  state_.cars.assign(config_.max_agents, Car{});
  spawn();
  return observe();
}

void TrafficJunction::set_state(JunctionState state) {
  if (static_cast<int>(state.cars.size()) != config_.max_agents) {
    throw DomainError("TrafficJunction::set_state: expected " + std::to_string(config_.max_agents) +
                      " car slots");
  }
  for (const auto& car : state.cars) {
    if (car.active && (car.route < 0 || car.route >= static_cast<int>(routes_.size()) ||
                       car.progress < 0 ||
                       car.progress >= static_cast<int>(routes_[car.route].size()))) {
      throw DomainError("TrafficJunction::set_state: car off its route");
    }
  }
  state_ = std::move(state);
  spawned_.assign(config_.max_agents, false);
}

StepResult TrafficJunction::step(const Matrix& actions) {
  if (actions.rows() != config_.max_agents || actions.cols() != 1) {
    throw DomainError("step: expected " + std::to_string(config_.max_agents) +
                      "x1 gas/brake actions, got " + diff::shape_string(actions));
  }
  StepResult result;
  result.agent_rewards.assign(config_.max_agents, 0.0);
  for (int i = 0; i < config_.max_agents; ++i) {
    Car& car = state_.cars[i];
    if (!car.active) continue;
    const double a = actions(i, 0);
    if (a != 0.0 && a != 1.0) {
      throw DomainError("step: action " + std::to_string(a) + " for car " + std::to_string(i) +
                        " is neither brake (0) nor gas (1)");
    }
    car.last_action = static_cast<int>(a);
    if (car.last_action == 1) car.progress += 1;
    if (car.progress >= static_cast<int>(routes_[car.route].size())) {
      car = Car{};  // arrived
      continue;
    }
    car.age += 1;
    result.agent_rewards[i] += kTimePenalty * car.age;
  }

  std::map<std::pair<int, int>, std::vector<int>> occupancy;
  for (int i = 0; i < config_.max_agents; ++i) {
    const Car& car = state_.cars[i];
    if (!car.active) continue;
    const Cell cell = routes_[car.route][car.progress];
    occupancy[{cell.col, cell.row}].push_back(i);
  }
  for (const auto& [_, slots] : occupancy) {
    if (slots.size() < 2) continue;
    for (int i : slots) {
      result.agent_rewards[i] += kCollisionPenalty;
      result.collisions += 1;
    }
  }
  state_.total_collisions += result.collisions;

  spawn();
  state_.step += 1;
  for (double r : result.agent_rewards) result.reward += r;
  result.done = state_.step >= config_.episode_length;
  result.observations = observe();
  return result;
}

Matrix TrafficJunction::observe() const {
  Matrix obs = Matrix::Zero(config_.max_agents, spec_.obs_dim);
  for (int i = 0; i < config_.max_agents; ++i) {
    const Car& car = state_.cars[i];
    if (!car.active) continue;
    const auto& route = routes_[car.route];
    const comm::Point p = cell_position(route[car.progress]);
    obs(i, 0) = 1.0;
    obs(i, 1) = car.last_action;
    obs(i, 2 + car.route) = 1.0;
    obs(i, 2 + config_.routes) = p.x;
    obs(i, 3 + config_.routes) = p.y;
    obs(i, 4 + config_.routes) =
        static_cast<double>(car.progress) / static_cast<double>(route.size() - 1);
  }
  return obs;
}

comm::Point TrafficJunction::cell_position(const Cell& cell) const {
  const double dim = config_.grid_dim;
  return {(cell.col + 0.5) / dim * 2.0 - 1.0, (cell.row + 0.5) / dim * 2.0 - 1.0};
}

std::vector<comm::Point> TrafficJunction::positions() const {
  std::vector<comm::Point> out;
  for (const auto& car : state_.cars) {
    out.push_back(car.active ? cell_position(routes_[car.route][car.progress]) : comm::Point{});
  }
  return out;
}

std::vector<bool> TrafficJunction::active() const {
  std::vector<bool> out;
  for (const auto& car : state_.cars) out.push_back(car.active);
  return out;
}

}  // namespace ac2c::envs
