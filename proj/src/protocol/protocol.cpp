#include "ac2c/error.hpp"
#include "ac2c/protocol.hpp"

namespace ac2c::protocol {

namespace {

const std::string kEncoder = "encoder";
const std::string kRound1 = "attention_round1";
const std::string kRound2 = "attention_round2";
const std::string kActor = "actor";
const std::string kController = "controller";

Mask build_mask(int group_size, const std::vector<comm::Topology>& topologies, bool two_hop) {
  const Eigen::Index rows = static_cast<Eigen::Index>(group_size) * topologies.size();
  Mask mask = Mask::Constant(rows, group_size, false);
  for (std::size_t g = 0; g < topologies.size(); ++g) {
    const auto& topo = topologies[g];
    for (int i = 0; i < group_size; ++i) {
      const Eigen::Index r = static_cast<Eigen::Index>(g) * group_size + i;
      mask(r, i) = true;
      for (int j : two_hop ? topo.two_hop(i) : topo.one_hop(i)) mask(r, j) = true;
    }
  }
  return mask;
}

}  // namespace

// ---- models ----------------------------------------------------------------

PolicyModel PolicyModel::create(const ModelDims& dims, Rng& rng) {
  ParamStore store;
  neural::EncoderNet::init(store, kEncoder, dims.obs_dim, dims.width, rng);
  neural::AttentionHead::init(store, kRound1, dims.width, rng);
  neural::AttentionHead::init(store, kRound2, dims.width, rng);
  neural::ActorNet::init(store, kActor, dims.width, dims.action_dim, rng);
  return PolicyModel(dims, std::move(store));
}

PolicyModel::PolicyModel(const ModelDims& dims, ParamStore store)
    : dims_(dims),
      store_(std::move(store)),
      encoder_(store_, kEncoder, dims.obs_dim, dims.width),
      round1_(store_, kRound1, dims.width),
      round2_(store_, kRound2, dims.width),
      actor_(store_, kActor, dims.width, dims.action_dim, dims.action_kind) {}

ControllerModel ControllerModel::create(int width, Rng& rng) {
  ParamStore store;
  neural::ControllerNet::init(store, kController, width, rng);
  return ControllerModel(width, std::move(store));
}

ControllerModel::ControllerModel(int width, ParamStore store)
    : width_(width), store_(std::move(store)), net_(store_, kController, width) {}

// ---- CommBatch -------------------------------------------------------------

CommBatch::CommBatch(int group_size, std::vector<comm::Topology> topologies)
    : group_size_(group_size), topologies_(std::move(topologies)) {
  for (const auto& topo : topologies_) {
    if (topo.n_agents() != group_size_) {
      throw ShapeError("CommBatch: topology with " + std::to_string(topo.n_agents()) +
                       " agents in a batch of group size " + std::to_string(group_size_));
    }
  }
  one_hop_mask_ = build_mask(group_size_, topologies_, false);
  two_hop_mask_ = build_mask(group_size_, topologies_, true);
}

CommBatch::CommBatch(const comm::Topology& topology)
    : CommBatch(topology.n_agents(), std::vector<comm::Topology>{topology}) {}

// ---- rounds ----------------------------------------------------------------

Value run_round1(const neural::AttentionHead& head, const CommBatch& batch, const Value& c0,
                 Matrix* weights) {
  if (c0.rows() != batch.rows()) {
    throw ShapeError("run_round1: " + std::to_string(c0.rows()) + " embeddings for " +
                     std::to_string(batch.rows()) + " agent slots");
  }
  return head.attend_grouped(c0, batch.one_hop_mask(), batch.group_size(), weights);
}

std::vector<int> run_gate(ProtocolMode mode, const neural::ControllerNet& controller,
                          const Value& c0, const Value& c1, double threshold,
                          std::vector<double>* scores) {
  const auto rows = static_cast<std::size_t>(c0.rows());
  switch (mode) {
    case ProtocolMode::ONE_ROUND: return std::vector<int>(rows, 0);
    case ProtocolMode::AC2C_NO_CONTROLLER:
    case ProtocolMode::GNN_TWO_ROUND: return std::vector<int>(rows, 1);
    case ProtocolMode::AC2C: break;
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("run_gate: threshold T must lie in (0, 1), got " + std::to_string(threshold));
  }
  const Value s = controller.score(diff::detach(c0), diff::detach(c1));
  std::vector<int> gates(rows);
  if (scores) scores->assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double score = s.data()(static_cast<Eigen::Index>(r), 0);
    gates[r] = score > threshold ? 1 : 0;
    if (scores) (*scores)[r] = score;
  }
  return gates;
}

Value run_round2(ProtocolMode mode, const neural::AttentionHead& head, const CommBatch& batch,
                 const Value& c1, std::span<const int> gates, Matrix* weights) {
  if (c1.rows() != batch.rows() || static_cast<Eigen::Index>(gates.size()) != c1.rows()) {
    throw ShapeError("run_round2: " + std::to_string(c1.rows()) + " embeddings, " +
                     std::to_string(gates.size()) + " gates for " + std::to_string(batch.rows()) +
                     " agent slots");
  }
  switch (mode) {
    case ProtocolMode::ONE_ROUND:
      if (weights) weights->resize(0, 0);
      return Value::constant(Matrix::Zero(c1.rows(), c1.cols()));
    case ProtocolMode::GNN_TWO_ROUND:
      return head.attend_grouped(c1, batch.one_hop_mask(), batch.group_size(), weights);
    case ProtocolMode::AC2C:
    case ProtocolMode::AC2C_NO_CONTROLLER: break;
  }
  std::vector<bool> open(gates.size());
  bool any_open = false;
  for (std::size_t r = 0; r < gates.size(); ++r) {
    open[r] = gates[r] == 1;
    any_open = any_open || open[r];
  }
  if (!any_open) {
    if (weights) *weights = Matrix::Zero(c1.rows(), batch.group_size());
    return Value::constant(Matrix::Zero(c1.rows(), c1.cols()));
  }
  const Value attended = head.attend_grouped(c1, batch.two_hop_mask(), batch.group_size(), weights);
  if (weights) {
    for (Eigen::Index r = 0; r < weights->rows(); ++r) {
      if (!open[r]) weights->row(r).setZero();
    }
  }
  return diff::mask_rows(attended, open);
}

RoundState run_rounds(ProtocolMode mode, const PolicyModel& policy,
                      const neural::ControllerNet& controller, const CommBatch& batch,
                      const Value& c0, double threshold,
                      const std::optional<std::vector<int>>& forced_gates) {
  RoundState state;
  state.c0 = c0;
  state.c1 = run_round1(policy.round1(), batch, c0, &state.round1_weights);
  if (forced_gates) {
    if (static_cast<Eigen::Index>(forced_gates->size()) != c0.rows()) {
      throw ShapeError("run_rounds: " + std::to_string(forced_gates->size()) + " forced gates for " +
                       std::to_string(c0.rows()) + " rows");
    }
    state.gates = *forced_gates;
  } else {
    state.gates = run_gate(mode, controller, state.c0, state.c1, threshold, &state.scores);
  }
  state.c2 = run_round2(mode, policy.round2(), batch, state.c1, state.gates, &state.round2_weights);
  return state;
}

ForwardResult forward(ProtocolMode mode, const PolicyModel& policy,
                      const neural::ControllerNet& controller, const CommBatch& batch,
                      const Value& obs, const Value& hist, double threshold,
                      const std::optional<std::vector<int>>& forced_gates) {
  if (obs.rows() != batch.rows()) {
    throw ShapeError("forward: " + std::to_string(obs.rows()) + " observations for " +
                     std::to_string(batch.rows()) + " agent slots");
  }
  const auto encoded = policy.encoder().encode(obs, hist);
  ForwardResult result;
  result.rounds = run_rounds(mode, policy, controller, batch, encoded.c0, threshold, forced_gates);
  result.actions = policy.actor().act(result.rounds.c0, result.rounds.c1, result.rounds.c2);
  result.h_next = encoded.h_next;
  return result;
}

StepOutput step_protocol(ProtocolMode mode, const PolicyModel& policy,
                         const neural::ControllerNet& controller, const comm::Topology& topo,
                         const Matrix& observations, const Matrix& histories, double threshold,
                         std::int64_t bits_per_message) {
  const CommBatch batch(topo);
  auto fwd = forward(mode, policy, controller, batch, Value::constant(observations),
                     Value::constant(histories), threshold);
  StepOutput out;
  out.actions = fwd.actions.data();
  out.next_histories = fwd.h_next.data();
  out.cost = comm::cost_entry(topo, fwd.rounds.gates, mode, bits_per_message);
  out.rounds = std::move(fwd.rounds);
  return out;
}

}  // namespace ac2c::protocol
