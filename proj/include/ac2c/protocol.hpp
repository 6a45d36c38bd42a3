#pragma once

// Per-timestep communication protocol: encode, first-round aggregation over
// one-hop neighbors, controller gating, optional second round, action.
//
// Rounds are synchronous: every agent reads the frozen pre-round embeddings of
// the others, so results do not depend on agent order. The batched functions
// take a CommBatch of B independent groups (timesteps or replay samples) of N
// agents each; row b * N + i holds agent i of group b.

#include "ac2c/commgraph.hpp"
#include "ac2c/neural.hpp"
#include "ac2c/protocol_mode.hpp"

#include <optional>
#include <vector>

namespace ac2c::protocol {

using diff::Mask;
using diff::Matrix;
using diff::ParamStore;
using diff::Value;
using neural::ActionKind;
using neural::Rng;

struct ModelDims {
  int obs_dim = 0;
  int action_dim = 0;
  ActionKind action_kind = ActionKind::Continuous;
  int width = neural::kDefaultWidth;
};

// Shared encoder, both attention heads and the action head; one parameter set
// used by every agent.
class PolicyModel {
 public:
  static PolicyModel create(const ModelDims& dims, Rng& rng);
  PolicyModel(const ModelDims& dims, ParamStore store);
  PolicyModel(const PolicyModel& other) : PolicyModel(other.dims_, other.store_.clone()) {}
  PolicyModel& operator=(const PolicyModel&) = delete;
  PolicyModel(PolicyModel&&) = default;

  const ModelDims& dims() const { return dims_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const neural::EncoderNet& encoder() const { return encoder_; }
  const neural::AttentionHead& round1() const { return round1_; }
  const neural::AttentionHead& round2() const { return round2_; }
  const neural::ActorNet& actor() const { return actor_; }

 private:
  ModelDims dims_;
  ParamStore store_;
  neural::EncoderNet encoder_;
  neural::AttentionHead round1_;
  neural::AttentionHead round2_;
  neural::ActorNet actor_;
};

class ControllerModel {
 public:
  static ControllerModel create(int width, Rng& rng);
  ControllerModel(int width, ParamStore store);
  ControllerModel(const ControllerModel& other) : ControllerModel(other.width_, other.store_.clone()) {}
  ControllerModel& operator=(const ControllerModel&) = delete;
  ControllerModel(ControllerModel&&) = default;

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const neural::ControllerNet& net() const { return net_; }
  int width() const { return width_; }

 private:
  int width_;
  ParamStore store_;
  neural::ControllerNet net_;
};

// B groups of N agents with one topology per group.
class CommBatch {
 public:
  CommBatch() = default;
  CommBatch(int group_size, std::vector<comm::Topology> topologies);
  explicit CommBatch(const comm::Topology& topology);

  int group_size() const { return group_size_; }
  int groups() const { return static_cast<int>(topologies_.size()); }
  int rows() const { return group_size_ * groups(); }
  const comm::Topology& topology(int g) const { return topologies_[g]; }
  const std::vector<comm::Topology>& topologies() const { return topologies_; }

  // R x N attention masks; every row includes the agent itself.
  const Mask& one_hop_mask() const { return one_hop_mask_; }
  const Mask& two_hop_mask() const { return two_hop_mask_; }

 private:
  int group_size_ = 0;
  std::vector<comm::Topology> topologies_;
  Mask one_hop_mask_;
  Mask two_hop_mask_;
};

struct RoundState {
  Value c0;
  Value c1;
  Value c2;                  // zero rows where the gate is closed
  std::vector<int> gates;    // z per row
  std::vector<double> scores;  // controller scores per row (empty when unused)
  Matrix round1_weights;     // R x N attention weights
  Matrix round2_weights;     // R x N, empty for ONE_ROUND
};

// c1_i = attend(round 1, c0_i, {c0_j : j in N1_i}).
Value run_round1(const neural::AttentionHead& head, const CommBatch& batch, const Value& c0,
                 Matrix* weights = nullptr);

// z_i = 1[h(c0_i, c1_i) > T] under AC2C; AC2C_NO_CONTROLLER forces 1,
// ONE_ROUND forces 0. GNN_TWO_ROUND has no gate and reports 1 (ungated second
// round). T must lie in (0, 1) in AC2C mode.
std::vector<int> run_gate(ProtocolMode mode, const neural::ControllerNet& controller,
                          const Value& c0, const Value& c1, double threshold,
                          std::vector<double>* scores = nullptr);

// AC2C modes: open gates attend over N2 (relayed round-one embeddings), closed
// gates give zero. GNN_TWO_ROUND: every agent attends over N1 again.
// ONE_ROUND: all zero.
Value run_round2(ProtocolMode mode, const neural::AttentionHead& head, const CommBatch& batch,
                 const Value& c1, std::span<const int> gates, Matrix* weights = nullptr);

// Both rounds and the gate from precomputed c0. `forced_gates` bypasses the
// controller (used for controller labeling and mode-equivalence checks).
RoundState run_rounds(ProtocolMode mode, const PolicyModel& policy,
                      const neural::ControllerNet& controller, const CommBatch& batch,
                      const Value& c0, double threshold,
                      const std::optional<std::vector<int>>& forced_gates = std::nullopt);

struct ForwardResult {
  RoundState rounds;
  Value actions;  // R x action_dim
  Value h_next;   // R x width
};

// encode -> round 1 -> gate -> round 2 -> act over a whole batch.
ForwardResult forward(ProtocolMode mode, const PolicyModel& policy,
                      const neural::ControllerNet& controller, const CommBatch& batch,
                      const Value& obs, const Value& hist, double threshold,
                      const std::optional<std::vector<int>>& forced_gates = std::nullopt);

struct StepOutput {
  RoundState rounds;
  Matrix actions;        // N x action_dim
  Matrix next_histories; // N x width
  comm::CostEntry cost;
};

// One execution timestep for all agents of a single topology.
StepOutput step_protocol(ProtocolMode mode, const PolicyModel& policy,
                         const neural::ControllerNet& controller, const comm::Topology& topo,
                         const Matrix& observations, const Matrix& histories, double threshold,
                         std::int64_t bits_per_message);

}  // namespace ac2c::protocol
