#include <doctest.h>

#include "ac2c/error.hpp"
#include "ac2c/protocol.hpp"
#include "../support/layouts.hpp"
#include "../support/test_support.hpp"

#include <cmath>

using namespace ac2c;
using namespace ac2c::protocol;
using ac2c::testing::relay_chain_layout;
using ac2c::testing::random_matrix;

namespace {

constexpr int kWidth = 8;
constexpr std::int64_t kW = 4096;

struct Models {
  PolicyModel policy;
  ControllerModel controller;
};

Models make_models(std::uint64_t seed, int obs_dim = 5) {
  Rng rng(seed);
  const ModelDims dims{obs_dim, 2, ActionKind::Continuous, kWidth};
  auto policy = PolicyModel::create(dims, rng);
  auto controller = ControllerModel::create(kWidth, rng);
  return {std::move(policy), std::move(controller)};
}

void set_controller_bias(const ControllerModel& c, double bias) {
  c.net().output_layer().weight().node()->data.setZero();
  c.net().output_layer().bias().node()->data.setConstant(bias);
}

Matrix action_input(const RoundState& s) {
  Matrix out(s.c0.rows(), 3 * kWidth);
  out << s.c0.data(), s.c1.data(), s.c2.data();
  return out;
}

}  // namespace

TEST_CASE("isolated agent's first round is self-only attention") {
  auto m = make_models(1);
  const std::vector<comm::Point> p{{0, 0}, {5, 5}};
  const CommBatch batch(comm::build_topology(p, 1.0));
  std::mt19937_64 rng(2);
  const Value c0 = Value::constant(random_matrix(rng, 2, kWidth));
  const Value c1 = run_round1(m.policy.round1(), batch, c0);
  const auto self = m.policy.round1().attend(Value::constant(c0.data().row(0)));
  CHECK((c1.data().row(0).array() == self.output.data().row(0).array()).all());
}

TEST_CASE("mutually visible agents with identical embeddings agree") {
  auto m = make_models(3);
  const std::vector<comm::Point> p{{0, 0}, {0.5, 0}};
  const CommBatch batch(comm::build_topology(p, 1.0));
  std::mt19937_64 rng(4);
  const Matrix row = random_matrix(rng, 1, kWidth);
  Matrix both(2, kWidth);
  both << row, row;
  const Value c1 = run_round1(m.policy.round1(), batch, Value::constant(both));
  CHECK((c1.data().row(0).array() == c1.data().row(1).array()).all());
}

TEST_CASE("first round only reads one-hop neighbors") {
  auto m = make_models(5);
  const CommBatch batch(comm::build_topology(relay_chain_layout(), 1.0));
  std::mt19937_64 rng(6);
  Matrix c0 = random_matrix(rng, 7, kWidth);
  const Matrix before = run_round1(m.policy.round1(), batch, Value::constant(c0)).data();
  c0.row(3).array() += 0.5;
  const Matrix after = run_round1(m.policy.round1(), batch, Value::constant(c0)).data();
  CHECK((before.row(0).array() == after.row(0).array()).all());
  CHECK((before.row(1).array() != after.row(1).array()).any());
}

TEST_CASE("gate is a strict threshold with mode overrides") {
  auto m = make_models(7);
  const Value c = Value::constant(Matrix::Zero(3, kWidth));
  set_controller_bias(m.controller, std::log(0.7 / 0.3));
  std::vector<double> scores;
  CHECK(run_gate(ProtocolMode::AC2C, m.controller.net(), c, c, 0.5, &scores) == std::vector<int>{1, 1, 1});
  CHECK(scores[0] == doctest::Approx(0.7).epsilon(1e-12));
  set_controller_bias(m.controller, 0.0);
  CHECK(run_gate(ProtocolMode::AC2C, m.controller.net(), c, c, 0.5) == std::vector<int>{0, 0, 0});
  CHECK(run_gate(ProtocolMode::ONE_ROUND, m.controller.net(), c, c, 0.01) == std::vector<int>{0, 0, 0});
  CHECK(run_gate(ProtocolMode::AC2C_NO_CONTROLLER, m.controller.net(), c, c, 0.99) ==
        std::vector<int>{1, 1, 1});
  CHECK(run_gate(ProtocolMode::GNN_TWO_ROUND, m.controller.net(), c, c, 0.5) == std::vector<int>{1, 1, 1});
  CHECK_THROWS_AS(run_gate(ProtocolMode::AC2C, m.controller.net(), c, c, 1.0), ConfigError);
  CHECK_THROWS_AS(run_gate(ProtocolMode::AC2C, m.controller.net(), c, c, 0.0), ConfigError);
  CHECK_NOTHROW(run_gate(ProtocolMode::ONE_ROUND, m.controller.net(), c, c, 1.5));
}

TEST_CASE("closed gates give zero second-round embeddings") {
  auto m = make_models(8);
  const CommBatch batch(comm::build_topology(relay_chain_layout(), 1.0));
  std::mt19937_64 rng(9);
  const Value c1 = Value::constant(random_matrix(rng, 7, kWidth));
  const std::vector<int> none(7, 0);
  CHECK(run_round2(ProtocolMode::AC2C, m.policy.round2(), batch, c1, none).data().isZero(0.0));
  CHECK(run_round2(ProtocolMode::ONE_ROUND, m.policy.round2(), batch, c1, std::vector<int>(7, 1))
            .data()
            .isZero(0.0));
  const std::vector<int> some{1, 0, 1, 0, 0, 1, 0};
  const Matrix c2 = run_round2(ProtocolMode::AC2C, m.policy.round2(), batch, c1, some).data();
  for (int r = 0; r < 7; ++r) {
    if (some[r] == 0) {
      CHECK(c2.row(r).isZero(0.0));
      CHECK_FALSE(std::signbit(c2(r, 0)));
    } else {
      CHECK_FALSE(c2.row(r).isZero(0.0));
    }
  }
}

TEST_CASE("second round reaches three-hop agents only under AC2C") {
  auto m = make_models(10);
  const CommBatch batch(comm::build_topology(relay_chain_layout(), 1.0));
  std::mt19937_64 rng(11);
  Matrix c0 = random_matrix(rng, 7, kWidth);
  const std::vector<int> open(7, 1);
  auto run = [&](ProtocolMode mode, const Matrix& emb) {
    return action_input(run_rounds(mode, m.policy, m.controller.net(), batch, Value::constant(emb), 0.5, open));
  };
  const Matrix ac2c_before = run(ProtocolMode::AC2C, c0);
  const Matrix gnn_before = run(ProtocolMode::GNN_TWO_ROUND, c0);
  c0.row(5).array() += 1.0;
  const Matrix ac2c_after = run(ProtocolMode::AC2C, c0);
  const Matrix gnn_after = run(ProtocolMode::GNN_TWO_ROUND, c0);
  CHECK((ac2c_before.row(0) - ac2c_after.row(0)).cwiseAbs().maxCoeff() > 0.0);
  CHECK((gnn_before.row(0).array() == gnn_after.row(0).array()).all());
}

TEST_CASE("one-round action equals the actor with a zero third input") {
  auto m = make_models(12);
  const auto topo = comm::build_topology(relay_chain_layout(), 1.0);
  std::mt19937_64 rng(13);
  const Matrix obs = random_matrix(rng, 7, 5);
  const Matrix hist = random_matrix(rng, 7, kWidth);
  const auto out = step_protocol(ProtocolMode::ONE_ROUND, m.policy, m.controller.net(), topo, obs, hist, 0.5, kW);
  const Value zero = Value::constant(Matrix::Zero(7, kWidth));
  const Matrix expected = m.policy.actor().act(out.rounds.c0, out.rounds.c1, zero).data();
  CHECK((out.actions.array() == expected.array()).all());
  CHECK(out.cost.round2_bits == 0);
}

TEST_CASE("all-open AC2C equals AC2C without controller bit-exactly") {
  auto m = make_models(14);
  set_controller_bias(m.controller, 5.0);
  const auto topo = comm::build_topology(relay_chain_layout(), 1.0);
  std::mt19937_64 rng(15);
  const Matrix obs = random_matrix(rng, 7, 5);
  const Matrix hist = random_matrix(rng, 7, kWidth);
  const auto a = step_protocol(ProtocolMode::AC2C, m.policy, m.controller.net(), topo, obs, hist, 0.5, kW);
  const auto b =
      step_protocol(ProtocolMode::AC2C_NO_CONTROLLER, m.policy, m.controller.net(), topo, obs, hist, 0.5, kW);
  CHECK(a.rounds.gates == std::vector<int>(7, 1));
  CHECK((a.actions.array() == b.actions.array()).all());
  CHECK((a.next_histories.array() == b.next_histories.array()).all());
  CHECK(a.cost.round2_bits == b.cost.round2_bits);
}

TEST_CASE("zero-gated agents act exactly as in one-round mode") {
  auto m = make_models(16);
  const CommBatch batch(comm::build_topology(relay_chain_layout(), 1.0));
  std::mt19937_64 rng(17);
  const Value obs = Value::constant(random_matrix(rng, 7, 5));
  const Value hist = Value::constant(random_matrix(rng, 7, kWidth));
  const std::vector<int> gates{0, 1, 0, 1, 1, 0, 0};
  const auto mixed = forward(ProtocolMode::AC2C, m.policy, m.controller.net(), batch, obs, hist, 0.5, gates);
  const auto one = forward(ProtocolMode::ONE_ROUND, m.policy, m.controller.net(), batch, obs, hist, 0.5);
  for (int r = 0; r < 7; ++r) {
    if (gates[r] == 0) {
      CHECK((mixed.actions.data().row(r).array() == one.actions.data().row(r).array()).all());
    }
  }
}

TEST_CASE("collinear ledger entry with all gates open") {
  auto m = make_models(18);
  set_controller_bias(m.controller, 5.0);
  const std::vector<comm::Point> p{{0, 0}, {0.9, 0}, {1.8, 0}};
  const auto topo = comm::build_topology(p, 1.0);
  const auto out = step_protocol(ProtocolMode::AC2C, m.policy, m.controller.net(), topo, Matrix::Zero(3, 5),
                                 Matrix::Zero(3, kWidth), 0.5, kW);
  CHECK(out.cost.round1_bits == 4 * kW);
  CHECK(out.cost.round2_bits == 4 * kW);
}

TEST_CASE("results do not depend on agent order") {
  auto m = make_models(19);
  auto layout = relay_chain_layout();
  std::mt19937_64 rng(20);
  const Matrix obs = random_matrix(rng, 7, 5);
  const Matrix hist = random_matrix(rng, 7, kWidth);
  const std::vector<int> perm{6, 2, 4, 0, 5, 1, 3};  // new slot s holds old agent perm[s]
  std::vector<comm::Point> layout_p(7);
  Matrix obs_p(7, 5), hist_p(7, kWidth);
  for (int s = 0; s < 7; ++s) {
    layout_p[s] = layout[perm[s]];
    obs_p.row(s) = obs.row(perm[s]);
    hist_p.row(s) = hist.row(perm[s]);
  }
  for (auto mode : {ProtocolMode::AC2C, ProtocolMode::GNN_TWO_ROUND}) {
    const auto a = step_protocol(mode, m.policy, m.controller.net(), comm::build_topology(layout, 1.0), obs,
                                 hist, 0.5, kW);
    const auto b = step_protocol(mode, m.policy, m.controller.net(), comm::build_topology(layout_p, 1.0), obs_p,
                                 hist_p, 0.5, kW);
    for (int s = 0; s < 7; ++s) {
      CHECK((a.actions.row(perm[s]) - b.actions.row(s)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(a.rounds.gates[perm[s]] == b.rounds.gates[s]);
    }
    CHECK(a.cost.round1_bits == b.cost.round1_bits);
    CHECK(a.cost.round2_bits == b.cost.round2_bits);
  }
}

TEST_CASE("batched groups equal separate single-group runs") {
  auto m = make_models(21);
  std::mt19937_64 rng(22);
  std::vector<comm::Topology> topos;
  for (int g = 0; g < 3; ++g) topos.push_back(comm::build_topology(ac2c::testing::random_layout(rng, 4, 1.0), 0.8));
  const Matrix obs = random_matrix(rng, 12, 5);
  const Matrix hist = random_matrix(rng, 12, kWidth);
  const CommBatch batch(4, topos);
  const auto all = forward(ProtocolMode::AC2C, m.policy, m.controller.net(), batch, Value::constant(obs),
                           Value::constant(hist), 0.5);
  for (int g = 0; g < 3; ++g) {
    const auto single = step_protocol(ProtocolMode::AC2C, m.policy, m.controller.net(), topos[g],
                                      obs.middleRows(4 * g, 4), hist.middleRows(4 * g, 4), 0.5, kW);
    CHECK((all.actions.data().middleRows(4 * g, 4) - single.actions).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(CommBatch(5, topos), ShapeError);
}

TEST_CASE("cloned policy is independent of the original") {
  auto m = make_models(23);
  PolicyModel copy(m.policy);
  copy.store().get("actor/output/b").node()->data.setConstant(9.0);
  CHECK(m.policy.store().get("actor/output/b").data()(0, 0) != 9.0);
  CHECK(copy.actor().act(Value::constant(Matrix::Zero(1, kWidth)), Value::constant(Matrix::Zero(1, kWidth)),
                         Value::constant(Matrix::Zero(1, kWidth)))
            .rows() == 1);
}
