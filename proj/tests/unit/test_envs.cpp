#include <doctest.h>

#include "ac2c/envs.hpp"
#include "ac2c/error.hpp"

#include <json.hpp>

#include <cmath>
#include <set>
#include <sstream>

using namespace ac2c;
using namespace ac2c::envs;

namespace {

ParticleState still(std::vector<Vec2> agents, std::vector<Vec2> targets) {
  ParticleState s;
  s.agent_vel.assign(agents.size(), Vec2::Zero());
  s.target_vel.assign(targets.size(), Vec2::Zero());
  s.agent_pos = std::move(agents);
  s.target_pos = std::move(targets);
  return s;
}

Matrix gas(int n, std::initializer_list<int> gas_slots) {
  Matrix a = Matrix::Zero(n, 1);
  for (int s : gas_slots) a(s, 0) = 1.0;
  return a;
}

}  // namespace

TEST_CASE("detection tiers at probe distances") {
  const std::vector<Vec2> targets{Vec2(0.0, 0.0)};
  auto near = particle_rewards(std::vector<Vec2>{Vec2(0.05, 0.0)}, targets);
  CHECK(near.detection[0] == 1.0);
  CHECK(near.shaping == doctest::Approx(-0.01 * 0.05).epsilon(1e-15));
  CHECK(near.total == doctest::Approx(1.0 - 0.0005).epsilon(1e-15));
  auto mid = particle_rewards(std::vector<Vec2>{Vec2(0.15, 0.0)}, targets);
  CHECK(mid.detection[0] == 0.5);
  auto far = particle_rewards(std::vector<Vec2>{Vec2(0.25, 0.0)}, targets);
  CHECK(far.detection[0] == 0.0);
}

TEST_CASE("agents closer than 0.5 are each penalized") {
  const std::vector<Vec2> targets{Vec2(5.0, 5.0)};
  auto r = particle_rewards(std::vector<Vec2>{Vec2(0.0, 0.0), Vec2(0.4, 0.0)}, targets);
  CHECK(r.collision[0] == -0.25);
  CHECK(r.collision[1] == -0.25);
  auto apart = particle_rewards(std::vector<Vec2>{Vec2(0.0, 0.0), Vec2(0.6, 0.0)}, targets);
  CHECK(apart.collision[0] == 0.0);
}

TEST_CASE("shaping is the negated sum of nearest-agent distances") {
  const std::vector<Vec2> agents{Vec2(0, 0), Vec2(1, 0)};
  const std::vector<Vec2> targets{Vec2(0, 0.3), Vec2(1, 0.4), Vec2(2, 0)};
  const auto r = particle_rewards(agents, targets);
  CHECK(r.shaping == doctest::Approx(-0.01 * (0.3 + 0.4 + 1.0)).epsilon(1e-15));
  CHECK(r.total == doctest::Approx(r.per_agent[0] + r.per_agent[1]));
}

TEST_CASE("cooperative navigation with ten agents") {
  ParticleConfig cfg;
  cfg.n_agents = 10;
  cfg.n_targets = 10;
  ParticleWorld env(EnvKind::CooperativeNavigation, cfg);
  const Matrix obs = env.reset(3);
  // own position, own velocity, every landmark, two closest agents
  const int width = 2 + 2 + 2 * 10 + 2 * 2;
  CHECK(width == 28);
  CHECK(env.spec().obs_dim == width);
  CHECK(obs.rows() == 10);
  CHECK(obs.cols() == width);
  CHECK(env.state().target_pos.size() == 10);
  CHECK(env.spec().episode_length == 50);
}

TEST_CASE("navigation observation layout") {
  ParticleWorld env(EnvKind::CooperativeNavigation, ParticleConfig{});
  env.reset(1);
  env.set_state(still({Vec2(0, 0), Vec2(0.5, 0), Vec2(-0.2, 0)}, {Vec2(1, 1), Vec2(0, 1), Vec2(-1, 0)}));
  const Eigen::RowVectorXd o = env.Environment::observe(0);
  CHECK(o.size() == 4 + 6 + 4);
  CHECK(o(4) == 1.0);
  CHECK(o(5) == 1.0);
  // nearest peer first: agent 2 at distance 0.2, then agent 1
  CHECK(o(10) == doctest::Approx(-0.2));
  CHECK(o(12) == doctest::Approx(0.5));
}

TEST_CASE("predator prey with three other predators lists all of them") {
  ParticleConfig cfg;
  cfg.n_agents = 4;
  cfg.n_targets = 2;
  ParticleWorld env(EnvKind::PredatorPrey, cfg);
  env.reset(4);
  env.set_state(still({Vec2(0, 0), Vec2(0.3, 0), Vec2(0, 0.6), Vec2(-0.9, 0)}, {Vec2(0.5, 0.5), Vec2(-0.5, -0.5)}));
  const Matrix obs = env.observe();
  CHECK(obs.cols() == 16);
  std::set<std::pair<double, double>> peers;
  for (int s = 0; s < 3; ++s) peers.insert({obs(0, 10 + 2 * s), obs(0, 11 + 2 * s)});
  CHECK(peers == std::set<std::pair<double, double>>{{0.3, 0.0}, {0.0, 0.6}, {-0.9, 0.0}});
  // two preys: third prey slot stays zero
  CHECK(obs(0, 8) == 0.0);
  CHECK(obs(0, 9) == 0.0);
}

TEST_CASE("preys flee the nearest predator and respect their speed cap") {
  ParticleConfig cfg;
  cfg.n_agents = 1;
  cfg.n_targets = 1;
  ParticleWorld env(EnvKind::PredatorPrey, cfg);
  env.reset(5);
  env.set_state(still({Vec2(0, 0)}, {Vec2(0.2, 0)}));
  for (int t = 0; t < 30; ++t) env.step(Matrix::Zero(1, 2));
  CHECK(env.state().target_pos[0].x() > 0.2);
  CHECK(env.state().target_vel[0].norm() <= 1.3 + 1e-12);
}

TEST_CASE("particle resets are deterministic and episodes end on time") {
  ParticleWorld a(EnvKind::CooperativeNavigation, ParticleConfig{});
  ParticleWorld b(EnvKind::CooperativeNavigation, ParticleConfig{});
  CHECK((a.reset(11).array() == b.reset(11).array()).all());
  CHECK((a.reset(11).array() != a.reset(12).array()).any());
  StepResult r;
  for (int t = 0; t < 50; ++t) {
    CHECK_FALSE(r.done);
    r = a.step(Matrix::Constant(3, 2, 0.3));
  }
  CHECK(r.done);
  CHECK_THROWS_AS(a.step(Matrix::Constant(3, 2, 1.5)), DomainError);
  CHECK_THROWS_AS(a.step(Matrix::Zero(2, 2)), DomainError);
}

TEST_CASE("agents stay inside the world box") {
  ParticleWorld env(EnvKind::CooperativeNavigation, ParticleConfig{});
  env.reset(6);
  for (int t = 0; t < 50; ++t) env.step(Matrix::Constant(3, 2, 1.0));
  for (const auto& p : env.state().agent_pos) CHECK(p.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("traffic junction geometry") {
  TrafficJunction medium(TrafficJunctionConfig::medium());
  CHECK(medium.config().grid_dim == 6);
  CHECK(medium.junction_count() == 1);
  CHECK(medium.routes().size() == 4);
  CHECK(medium.spec().n_agents == 10);
  CHECK(medium.spec().episode_length == 60);
  TrafficJunction hard(TrafficJunctionConfig::hard());
  CHECK(hard.config().grid_dim == 9);
  CHECK(hard.junction_count() == 4);
  CHECK(hard.routes().size() == 8);
  CHECK(hard.config().entries == 16);
  CHECK(hard.spec().episode_length == 80);
  for (const auto& route : hard.routes()) {
    for (std::size_t k = 1; k < route.size(); ++k) {
      CHECK(std::abs(route[k].col - route[k - 1].col) + std::abs(route[k].row - route[k - 1].row) == 1);
    }
  }
  auto bad = TrafficJunctionConfig::medium();
  bad.routes = 5;
  CHECK_THROWS_AS(TrafficJunction{bad}, ConfigError);
}

TEST_CASE("time penalty grows with the age of a car") {
  TrafficJunction env(TrafficJunctionConfig::medium());
  env.reset(1);
  env.set_spawning(false);
  JunctionState s;
  s.cars.assign(10, Car{});
  s.cars[0] = Car{true, 0, 0, 9, 0};
  env.set_state(s);
  const auto r = env.step(gas(10, {}));
  CHECK(r.agent_rewards[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(r.reward == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(r.collisions == 0);
}

TEST_CASE("cars sharing a cell both take the collision penalty") {
  TrafficJunction env(TrafficJunctionConfig::medium());
  env.reset(1);
  env.set_spawning(false);
  JunctionState s;
  s.cars.assign(10, Car{});
  s.cars[0] = Car{true, 0, 1, 0, 0};  // eastbound, next cell (2, 3)
  s.cars[4] = Car{true, 2, 2, 3, 0};  // southbound, next cell (2, 3)
  env.set_state(s);
  const auto r = env.step(gas(10, {0, 4}));
  CHECK(r.collisions == 2);
  CHECK(r.agent_rewards[0] == doctest::Approx(-20.0 - 0.01));
  CHECK(r.agent_rewards[4] == doctest::Approx(-20.0 - 0.04));
  CHECK(env.state().cars[0].active);
  CHECK(env.state().cars[4].active);
}

TEST_CASE("a braking car stays put and an arriving car leaves") {
  TrafficJunction env(TrafficJunctionConfig::medium());
  env.reset(1);
  env.set_spawning(false);
  JunctionState s;
  s.cars.assign(10, Car{});
  s.cars[0] = Car{true, 1, 5, 2, 0};  // last cell of its route
  s.cars[1] = Car{true, 3, 2, 0, 0};
  env.set_state(s);
  const auto r = env.step(gas(10, {0}));
  CHECK_FALSE(env.state().cars[0].active);
  CHECK(r.agent_rewards[0] == 0.0);
  CHECK(env.state().cars[1].progress == 2);
  CHECK(env.active_count() == 1);
  CHECK_THROWS_AS(env.step(Matrix::Constant(10, 1, 0.5)), DomainError);
}

TEST_CASE("traffic junction observations show only the ego car") {
  TrafficJunction env(TrafficJunctionConfig::medium());
  env.reset(2);
  env.set_spawning(false);
  JunctionState s;
  s.cars.assign(10, Car{});
  s.cars[3] = Car{true, 2, 1, 1, 1};
  env.set_state(s);
  const Matrix obs = env.observe();
  CHECK(obs.cols() == 9);
  CHECK(obs.row(0).isZero(0.0));
  CHECK(obs(3, 0) == 1.0);
  CHECK(obs(3, 1) == 1.0);
  CHECK(obs(3, 4) == 1.0);                     // route 2 one-hot
  CHECK(obs(3, 6) == doctest::Approx(-1.0 / 6));  // col 2 of 6 -> x
  CHECK(obs(3, 8) == doctest::Approx(0.2));     // progress 1 of 5
  CHECK(env.active() == std::vector<bool>{false, false, false, true, false, false, false, false, false, false});
}

TEST_CASE("active cars never exceed the slot count and runs are reproducible") {
  auto cfg = TrafficJunctionConfig::medium();
  cfg.p_arrive = 1.0;
  TrafficJunction a(cfg), b(cfg);
  a.reset(9);
  b.reset(9);
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 60; ++t) {
    Matrix act(10, 1);
    for (int i = 0; i < 10; ++i) act(i, 0) = coin(rng) ? 1.0 : 0.0;
    const auto ra = a.step(act);
    const auto rb = b.step(act);
    CHECK(a.active_count() <= 10);
    CHECK(ra.reward == rb.reward);
    CHECK((ra.observations.array() == rb.observations.array()).all());
  }
}

TEST_CASE("success means no collision at any step") {
  CHECK(success(EpisodeRecord{EnvKind::TrafficJunction, {0, 0, 0}}));
  CHECK_FALSE(success(EpisodeRecord{EnvKind::TrafficJunction, {0, 2, 0}}));
  CHECK(success(EpisodeRecord{EnvKind::TrafficJunction, {}}));
  CHECK_THROWS_AS(success(EpisodeRecord{EnvKind::CooperativeNavigation, {0}}), DomainError);
}

TEST_CASE("environment factory and names") {
  EnvConfig cfg;
  cfg.kind = parse_env_kind("TJ");
  CHECK(make_environment(cfg)->spec().kind == EnvKind::TrafficJunction);
  cfg.kind = parse_env_kind("predator_prey");
  CHECK(make_environment(cfg)->spec().action_dim == 2);
  CHECK(parse_difficulty("Hard") == Difficulty::Hard);
  CHECK_THROWS_AS(parse_env_kind("soccer"), ConfigError);
}

TEST_CASE("trace writer emits one JSON object per line") {
  std::ostringstream out;
  TraceWriter w(out);
  Matrix a(2, 2);
  a << 0.1, 0.2, 0.3, 0.4;
  const std::vector<int> gates{1, 0};
  w.write(0, {{0.0, 1.0}, {2.0, 3.0}}, a, -0.5, 1, gates);
  w.write(1, {{0.0, 1.0}, {2.0, 3.0}}, a, -0.25, 0, gates);
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["step"] == n);
    CHECK(j["gates"][0] == 1);
    CHECK(j["positions"][1][0] == 2.0);
    ++n;
  }
  CHECK(n == 2);
}
