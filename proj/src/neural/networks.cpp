#include "ac2c/error.hpp"
#include "ac2c/neural.hpp"

#include <cmath>

namespace ac2c::neural {

namespace {

Matrix uniform_init(int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void require_cols(const char* op, const Value& v, Eigen::Index cols) {
  if (v.cols() != cols) {
    throw ShapeError(std::string(op) + ": expected width " + std::to_string(cols) + ", got " +
                     diff::shape_string(v.data()));
  }
}

void require_rows(const char* op, const Value& a, const Value& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError(std::string(op) + ": row mismatch " + diff::shape_string(a.data()) + " vs " +
                     diff::shape_string(b.data()));
  }
}

}  // namespace

// ---- Linear ----------------------------------------------------------------

void Linear::init(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(prefix + "/W", uniform_init(in, out, bound, rng));
  store.add(prefix + "/b", uniform_init(1, out, bound, rng));
}

Linear::Linear(const ParamStore& store, const std::string& prefix)
    : weight_(store.get(prefix + "/W")), bias_(store.get(prefix + "/b")) {}

Value Linear::forward(const Value& x) const {
  return diff::add_row(diff::matmul(x, weight_), bias_);
}

// ---- EncoderNet ------------------------------------------------------------

void EncoderNet::init(ParamStore& store, const std::string& prefix, int obs_dim, int width,
                      Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  store.add(prefix + "/W_input", uniform_init(obs_dim, 3 * width, bound, rng));
  store.add(prefix + "/W_hidden", uniform_init(width, 3 * width, bound, rng));
  store.add(prefix + "/b_input", uniform_init(1, 3 * width, bound, rng));
  store.add(prefix + "/b_hidden", uniform_init(1, 3 * width, bound, rng));
}

EncoderNet::EncoderNet(const ParamStore& store, const std::string& prefix, int obs_dim, int width)
    : w_input_(store.get(prefix + "/W_input")),
      w_hidden_(store.get(prefix + "/W_hidden")),
      b_input_(store.get(prefix + "/b_input")),
      b_hidden_(store.get(prefix + "/b_hidden")),
      obs_dim_(obs_dim),
      width_(width) {
  if (w_input_.rows() != obs_dim || w_input_.cols() != 3 * width) {
    throw ShapeError("EncoderNet: stored W_input " + diff::shape_string(w_input_.data()) +
                     " does not match obs_dim " + std::to_string(obs_dim));
  }
}

EncoderOutput EncoderNet::encode(const Value& obs, const Value& hist) const {
  require_cols("encode(obs)", obs, obs_dim_);
  require_cols("encode(hist)", hist, width_);
  require_rows("encode", obs, hist);
  const Value gi = diff::add_row(diff::matmul(obs, w_input_), b_input_);
  const Value gh = diff::add_row(diff::matmul(hist, w_hidden_), b_hidden_);
  const Value update = diff::sigmoid(
      diff::add(diff::slice_cols(gi, 0, width_), diff::slice_cols(gh, 0, width_)));
  const Value reset = diff::sigmoid(
      diff::add(diff::slice_cols(gi, width_, width_), diff::slice_cols(gh, width_, width_)));
  const Value candidate = diff::tanh(diff::add(
      diff::slice_cols(gi, 2 * width_, width_),
      diff::mul(reset, diff::slice_cols(gh, 2 * width_, width_))));
  // h' = (1 - z) * n + z * h = n + z * (h - n)
  const Value h_next = diff::add(candidate, diff::mul(update, diff::sub(hist, candidate)));
  return {h_next, h_next};
}

// ---- AttentionHead ---------------------------------------------------------

void AttentionHead::init(ParamStore& store, const std::string& prefix, int width, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  store.add(prefix + "/W_key", uniform_init(width, width, bound, rng));
  store.add(prefix + "/W_query", uniform_init(width, width, bound, rng));
  store.add(prefix + "/W_value", uniform_init(width, width, bound, rng));
}

AttentionHead::AttentionHead(const ParamStore& store, const std::string& prefix, int width)
    : w_key_(store.get(prefix + "/W_key")),
      w_query_(store.get(prefix + "/W_query")),
      w_value_(store.get(prefix + "/W_value")),
      width_(width) {}

AttentionResult AttentionHead::attend(const Value& self_emb, const Value& neighbor_embs) const {
  require_cols("attend(self)", self_emb, width_);
  if (self_emb.rows() != 1) {
    throw ShapeError("attend: self embedding must be one row, got " +
                     diff::shape_string(self_emb.data()));
  }
  Value members = self_emb;
  if (neighbor_embs.defined() && neighbor_embs.rows() > 0) {
    require_cols("attend(neighbors)", neighbor_embs, width_);
    const Value parts[] = {self_emb, neighbor_embs};
    members = diff::concat_rows(parts);
  }
  const Value query = diff::matmul(self_emb, w_query_);
  const Value keys = diff::matmul(members, w_key_);
  const Value values = diff::matmul(members, w_value_);
  const Value scores = diff::leaky_relu(
      diff::scale(diff::matmul(query, diff::transpose(keys)), 1.0 / std::sqrt(double(width_))));
  const Value alpha = diff::softmax_rows(scores);
  return {diff::tanh(diff::matmul(alpha, values)), alpha.data()};
}

AttentionResult AttentionHead::attend(const Value& self_emb) const { return attend(self_emb, Value()); }

Value AttentionHead::attend_grouped(const Value& emb, const Mask& mask, Eigen::Index group,
                                    Matrix* weights_out) const {
  require_cols("attend_grouped", emb, width_);
  const Value queries = diff::matmul(emb, w_query_);
  const Value keys = diff::matmul(emb, w_key_);
  const Value values = diff::matmul(emb, w_value_);
  const Value scores = diff::leaky_relu(
      diff::scale(diff::grouped_scores(queries, keys, group), 1.0 / std::sqrt(double(width_))));
  const Value alpha = diff::softmax_rows(scores, mask);
  if (weights_out) *weights_out = alpha.data();
  return diff::tanh(diff::grouped_mix(alpha, values, group));
}

// ---- ControllerNet ---------------------------------------------------------

void ControllerNet::init(ParamStore& store, const std::string& prefix, int width, Rng& rng) {
  Linear::init(store, prefix + "/hidden", 2 * width, width, rng);
  Linear::init(store, prefix + "/output", width, 1, rng);
}

ControllerNet::ControllerNet(const ParamStore& store, const std::string& prefix, int width)
    : hidden_(store, prefix + "/hidden"), output_(store, prefix + "/output"), width_(width) {}

Value ControllerNet::logit(const Value& c0, const Value& c1) const {
  require_cols("controller(c0)", c0, width_);
  require_cols("controller(c1)", c1, width_);
  require_rows("controller", c0, c1);
  return output_.forward(diff::leaky_relu(hidden_.forward(diff::concat_cols({c0, c1}))));
}

Value ControllerNet::score(const Value& c0, const Value& c1) const {
  return diff::sigmoid(logit(c0, c1));
}

// ---- ActorNet --------------------------------------------------------------

void ActorNet::init(ParamStore& store, const std::string& prefix, int width, int action_dim,
                    Rng& rng) {
  Linear::init(store, prefix + "/hidden", 3 * width, width, rng);
  Linear::init(store, prefix + "/output", width, action_dim, rng);
}

ActorNet::ActorNet(const ParamStore& store, const std::string& prefix, int width, int action_dim,
                   ActionKind kind)
    : hidden_(store, prefix + "/hidden"),
      output_(store, prefix + "/output"),
      width_(width),
      action_dim_(action_dim),
      kind_(kind) {}

Value ActorNet::act(const Value& c0, const Value& c1, const Value& c2) const {
  require_cols("act(c0)", c0, width_);
  require_cols("act(c1)", c1, width_);
  require_cols("act(c2)", c2, width_);
  require_rows("act", c0, c1);
  require_rows("act", c0, c2);
  const Value out = output_.forward(diff::leaky_relu(hidden_.forward(diff::concat_cols({c0, c1, c2}))));
  return kind_ == ActionKind::Continuous ? diff::tanh(out) : out;
}

// ---- CriticNet -------------------------------------------------------------

void CriticNet::init(ParamStore& store, const std::string& prefix, int n_agents, int width,
                     int obs_dim, int action_dim, Rng& rng) {
  Linear::init(store, prefix + "/input", n_agents * (width + obs_dim + action_dim), 3 * width, rng);
  Linear::init(store, prefix + "/hidden", 3 * width, width, rng);
  Linear::init(store, prefix + "/output", width, n_agents, rng);
}

CriticNet::CriticNet(const ParamStore& store, const std::string& prefix, int n_agents, int width,
                     int obs_dim, int action_dim)
    : input_(store, prefix + "/input"),
      hidden_(store, prefix + "/hidden"),
      output_(store, prefix + "/output"),
      n_agents_(n_agents),
      width_(width),
      obs_dim_(obs_dim),
      action_dim_(action_dim) {}

Value CriticNet::value(const Value& hist, const Value& obs, const Value& actions) const {
  require_cols("critic(hist)", hist, width_);
  require_cols("critic(obs)", obs, obs_dim_);
  require_cols("critic(actions)", actions, action_dim_);
  require_rows("critic", hist, obs);
  require_rows("critic", hist, actions);
  if (hist.rows() == 0 || hist.rows() % n_agents_ != 0) {
    throw ShapeError("critic: " + std::to_string(hist.rows()) + " rows is not a whole number of " +
                     std::to_string(n_agents_) + "-agent samples");
  }
  const Eigen::Index batch = hist.rows() / n_agents_;
  const Value rows = diff::concat_cols({hist, obs, actions});
  const Value joint = diff::reshape(rows, batch, n_agents_ * rows.cols());
  const Value trunk = diff::leaky_relu(hidden_.forward(diff::leaky_relu(input_.forward(joint))));
  return diff::reshape(output_.forward(trunk), batch * n_agents_, 1);
}

}  // namespace ac2c::neural
