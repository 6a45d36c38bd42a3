#pragma once

// Benchmark environments exposing a Dec-POMDP step interface plus the agent
// positions the communication topology is built from.

#include "ac2c/commgraph.hpp"
#include "ac2c/diffmath.hpp"
#include "ac2c/neural.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ac2c::envs {

using diff::Matrix;
using Vec2 = Eigen::Vector2d;

enum class EnvKind { TrafficJunction, CooperativeNavigation, PredatorPrey };
enum class Difficulty { Medium, Hard };

std::string to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view text);
std::string to_string(Difficulty difficulty);
Difficulty parse_difficulty(std::string_view text);

struct TrafficJunctionConfig {
  Difficulty difficulty = Difficulty::Medium;
  double p_arrive = 0.2;
  int max_agents = 10;
  int entries = 8;
  int routes = 4;
  int junctions = 1;
  int grid_dim = 6;
  int episode_length = 60;

  static TrafficJunctionConfig medium();
  static TrafficJunctionConfig hard();
  static TrafficJunctionConfig for_difficulty(Difficulty difficulty);
};

// Shared by cooperative navigation (targets = landmarks) and predator prey
// (agents = predators, targets = preys).
struct ParticleConfig {
  int n_agents = 3;
  int n_targets = 3;
  int episode_length = 50;
  double damping = 0.25;
  double dt = 0.1;
  double sensitivity = 5.0;  // action in [-1, 1]^2 times this is the force
  double half_extent = 1.0;  // world box [-1, 1]^2
  // Landmarks drawn once from layout_seed and kept across episodes.
  bool fixed_landmarks = true;
  std::uint64_t layout_seed = 0;
  double predator_max_speed = 1.0;
  double prey_speed_factor = 1.3;
};

struct EnvConfig {
  EnvKind kind = EnvKind::CooperativeNavigation;
  ParticleConfig particle;
  TrafficJunctionConfig junction;
};

struct EnvSpec {
  EnvKind kind = EnvKind::CooperativeNavigation;
  int n_agents = 0;  // agent slots (max_agents for traffic junction)
  int episode_length = 0;
  neural::ActionKind action_kind = neural::ActionKind::Continuous;
  int action_dim = 0;       // network output width (2 logits for gas/brake)
  int obs_dim = 0;
  std::string name;
};

struct StepResult {
  Matrix observations;
  double reward = 0.0;                // shared cooperative reward
  std::vector<double> agent_rewards;  // per-slot components summing to reward
  int collisions = 0;                 // colliding agents (TJ) or close pairs (CN/PP)
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  // Deterministic given the seed.
  virtual Matrix reset(std::uint64_t seed) = 0;
  // Continuous envs take an N x 2 action matrix in [-1, 1]; traffic junction
  // takes N x 1 with 1 = gas, 0 = brake (ignored for inactive slots).
  virtual StepResult step(const Matrix& actions) = 0;
  virtual Matrix observe() const = 0;
  virtual std::vector<comm::Point> positions() const = 0;
  virtual std::vector<bool> active() const = 0;
  virtual int step_count() const = 0;
  // Slots whose agent appeared in the last reset/step (fresh history).
  virtual std::vector<bool> spawned() const { return std::vector<bool>(spec().n_agents, false); }

  Eigen::RowVectorXd observe(int agent) const;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

// ---- particle worlds -------------------------------------------------------

struct ParticleState {
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
  std::vector<Vec2> target_pos;
  std::vector<Vec2> target_vel;
  int step = 0;
};

struct ParticleRewards {
  double shaping = 0.0;                 // 0.01 * (-sum_targets min_agent distance)
  std::vector<double> detection;        // +1 below 0.1, else +0.5 below 0.2
  std::vector<double> collision;        // -0.25 per agent closer than 0.5
  std::vector<double> per_agent;        // shaping + detection + collision
  double total = 0.0;                   // sum of per_agent
};

ParticleRewards particle_rewards(std::span<const Vec2> agents, std::span<const Vec2> targets);

class ParticleWorld : public Environment {
 public:
  ParticleWorld(EnvKind kind, const ParticleConfig& config);

  const EnvSpec& spec() const override { return spec_; }
  Matrix reset(std::uint64_t seed) override;
  StepResult step(const Matrix& actions) override;
  Matrix observe() const override;
  std::vector<comm::Point> positions() const override;
  std::vector<bool> active() const override;
  int step_count() const override { return state_.step; }

  const ParticleState& state() const { return state_; }
  // Scripted scenarios in tests.
  void set_state(ParticleState state);
  const ParticleConfig& config() const { return config_; }

 private:
  int closest_slots() const;
  void move_preys();

  EnvKind kind_;
  ParticleConfig config_;
  EnvSpec spec_;
  ParticleState state_;
  std::vector<Vec2> fixed_targets_;
  std::mt19937_64 rng_;
};

// ---- traffic junction ------------------------------------------------------

struct Cell {
  int col = 0;
  int row = 0;
  bool operator==(const Cell&) const = default;
};

struct Car {
  bool active = false;
  int route = -1;
  int progress = 0;     // index into the route's cell list
  int age = 0;          // timesteps since becoming active
  int last_action = 0;  // 1 = gas
};

struct JunctionState {
  std::vector<Car> cars;  // one per slot
  int step = 0;
  int total_collisions = 0;
};

class TrafficJunction : public Environment {
 public:
  explicit TrafficJunction(const TrafficJunctionConfig& config);

  const EnvSpec& spec() const override { return spec_; }
  Matrix reset(std::uint64_t seed) override;
  StepResult step(const Matrix& actions) override;
  Matrix observe() const override;
  std::vector<comm::Point> positions() const override;
  std::vector<bool> active() const override;
  int step_count() const override { return state_.step; }
  std::vector<bool> spawned() const override { return spawned_; }

  const JunctionState& state() const { return state_; }
  void set_state(JunctionState state);
  const std::vector<std::vector<Cell>>& routes() const { return routes_; }
  int junction_count() const;
  int active_count() const;
  const TrafficJunctionConfig& config() const { return config_; }
  // Spawning can be disabled for scripted scenarios.
  void set_spawning(bool enabled) { spawning_ = enabled; }

 private:
  void spawn();
  comm::Point cell_position(const Cell& cell) const;

  TrafficJunctionConfig config_;
  EnvSpec spec_;
  std::vector<std::vector<Cell>> routes_;
  JunctionState state_;
  std::vector<bool> spawned_;
  std::mt19937_64 rng_;
  bool spawning_ = true;
};

// ---- episode records -------------------------------------------------------

struct EpisodeRecord {
  EnvKind kind = EnvKind::TrafficJunction;
  std::vector<int> collisions_per_step;
};

// Traffic junction only: true iff no collision happened at any step.
bool success(const EpisodeRecord& record);

// Line-delimited JSON, one object per timestep.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(out) {}
  void write(int step, const std::vector<comm::Point>& positions, const Matrix& actions,
             double reward, int collisions, std::span<const int> gates);

 private:
  std::ostream& out_;
};

}  // namespace ac2c::envs
