#pragma once

// Network blocks of the agent model: recurrent encoder, per-round attention
// aggregation, gating controller, action policy and centralized critic.
//
// Everything is row-major: a batch of R agent slots is an R x width matrix.
// Each network is a thin set of handles into a ParamStore; `init` registers
// fresh parameters, the constructor binds to already-registered ones (used for
// cloned target networks and checkpoint reloads).

#include "ac2c/diffmath.hpp"
#include "ac2c/param_store.hpp"

#include <random>
#include <string>
#include <vector>

namespace ac2c::neural {

using diff::Mask;
using diff::Matrix;
using diff::ParamStore;
using diff::Value;
using Rng = std::mt19937_64;

inline constexpr int kDefaultWidth = 128;

// Weight W (in x out) and bias b (1 x out), uniform in +-1/sqrt(in).
class Linear {
 public:
  static void init(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng);
  Linear(const ParamStore& store, const std::string& prefix);
  Value forward(const Value& x) const;
  const Value& weight() const { return weight_; }
  const Value& bias() const { return bias_; }

 private:
  Value weight_;
  Value bias_;
};

struct EncoderOutput {
  Value c0;      // R x width
  Value h_next;  // R x width
};

// Single-layer gated recurrent cell; the updated hidden state doubles as the
// initial embedding c0.
class EncoderNet {
 public:
  static void init(ParamStore& store, const std::string& prefix, int obs_dim, int width, Rng& rng);
  EncoderNet(const ParamStore& store, const std::string& prefix, int obs_dim, int width);

  EncoderOutput encode(const Value& obs, const Value& hist) const;
  int obs_dim() const { return obs_dim_; }
  int width() const { return width_; }

 private:
  Value w_input_;   // obs_dim x 3w, blocks [update | reset | candidate]
  Value w_hidden_;  // w x 3w
  Value b_input_;
  Value b_hidden_;
  int obs_dim_;
  int width_;
};

struct AttentionResult {
  Value output;    // 1 x width
  Matrix weights;  // 1 x (1 + neighbors), entry 0 is the agent itself
};

// Key/query/value projections for one communication round.
//   e_ik  = LeakyReLU(q_i . k_k / sqrt(d)),  alpha = softmax over the attended set
//   out_i = tanh(sum_k alpha_ik v_k)
// The attended set is the agent itself plus its neighbors for the round.
class AttentionHead {
 public:
  static void init(ParamStore& store, const std::string& prefix, int width, Rng& rng);
  AttentionHead(const ParamStore& store, const std::string& prefix, int width);

  // Single-agent form. An empty neighbor list yields tanh(v_self).
  AttentionResult attend(const Value& self_emb, const Value& neighbor_embs) const;
  AttentionResult attend(const Value& self_emb) const;

  // Batched form over groups of `group` rows (one group = one timestep's
  // agents). mask(r, j) selects which rows of r's group it attends to;
  // callers always include r itself. `weights_out` receives the R x group
  // attention matrix when non-null.
  Value attend_grouped(const Value& emb, const Mask& mask, Eigen::Index group,
                       Matrix* weights_out = nullptr) const;

  const Value& w_key() const { return w_key_; }
  const Value& w_query() const { return w_query_; }
  const Value& w_value() const { return w_value_; }
  int width() const { return width_; }

 private:
  Value w_key_;
  Value w_query_;
  Value w_value_;
  int width_;
};

// h(c0, c1) in (0, 1): [c0 | c1] -> width (LeakyReLU) -> 1 -> sigmoid.
class ControllerNet {
 public:
  static void init(ParamStore& store, const std::string& prefix, int width, Rng& rng);
  ControllerNet(const ParamStore& store, const std::string& prefix, int width);

  Value logit(const Value& c0, const Value& c1) const;  // R x 1
  Value score(const Value& c0, const Value& c1) const;  // R x 1
  const Linear& output_layer() const { return output_; }

 private:
  Linear hidden_;
  Linear output_;
  int width_;
};

enum class ActionKind { Continuous, Discrete };

// [c0 | c1 | c2] (3 * width) -> width (LeakyReLU) -> action_dim. Continuous
// outputs pass through tanh into the [-1, 1] action box; discrete outputs are
// logits.
class ActorNet {
 public:
  static void init(ParamStore& store, const std::string& prefix, int width, int action_dim,
                   Rng& rng);
  ActorNet(const ParamStore& store, const std::string& prefix, int width, int action_dim,
           ActionKind kind);

  Value act(const Value& c0, const Value& c1, const Value& c2) const;
  int action_dim() const { return action_dim_; }
  ActionKind kind() const { return kind_; }

 private:
  Linear hidden_;
  Linear output_;
  int width_;
  int action_dim_;
  ActionKind kind_;
};

// Centralized critic. Each sample is N agent rows [h_i | o_i | a_i]; the rows
// are concatenated in agent order into one trunk input, and the trunk emits
// one value per agent.
//   trunk: N*(width+obs+act) -> 3*width -> width -> N   (LeakyReLU between)
class CriticNet {
 public:
  static void init(ParamStore& store, const std::string& prefix, int n_agents, int width,
                   int obs_dim, int action_dim, Rng& rng);
  CriticNet(const ParamStore& store, const std::string& prefix, int n_agents, int width,
            int obs_dim, int action_dim);

  // hist: (B*N) x width, obs: (B*N) x obs_dim, actions: (B*N) x action_dim.
  // Returns (B*N) x 1 in the same row order.
  Value value(const Value& hist, const Value& obs, const Value& actions) const;
  int n_agents() const { return n_agents_; }

 private:
  Linear input_;
  Linear hidden_;
  Linear output_;
  int n_agents_;
  int width_;
  int obs_dim_;
  int action_dim_;
};

}  // namespace ac2c::neural
