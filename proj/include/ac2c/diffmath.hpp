#pragma once

// Minimal reverse-mode differentiation over dense row-major real matrices.
//
// A Value is a cheap handle to a graph node. Every op builds a new node that
// records its parents and a vector-Jacobian rule; backward() walks the graph
// once in reverse topological order. Leaves (parameters and constants) have no
// parents: parameters accumulate gradient across backward() calls until
// zero_grad(), constants never receive gradient.

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ac2c::diff {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix data;
  Matrix grad;  // same shape as data, always allocated
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";
  bool requires_grad = false;
};

class Value {
 public:
  Value() = default;

  // Trainable leaf.
  static Value parameter(Matrix data);
  // Non-trainable leaf (inputs, masks, stored histories).
  static Value constant(Matrix data);

  const Matrix& data() const { return node_->data; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_data() { return node_->data; }
  Matrix& mutable_grad() { return node_->grad; }

  Eigen::Index rows() const { return node_->data.rows(); }
  Eigen::Index cols() const { return node_->data.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->parents.empty(); }
  bool defined() const { return static_cast<bool>(node_); }
  const char* op() const { return node_->op; }

  // Scalar read for 1x1 values.
  double item() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

std::string shape_string(const Matrix& m);

// ---- forward ops -----------------------------------------------------------
// All ops throw ShapeError on non-conforming shapes (message names the op and
// both shapes) and NumericError when the produced data is not finite.

Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // elementwise
// a (r x c) + row (1 x c) broadcast over every row.
Value add_row(const Value& a, const Value& row);
Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);
Value tanh(const Value& a);
Value sigmoid(const Value& a);
Value leaky_relu(const Value& a, double negative_slope = 0.01);
Value exp(const Value& a);
Value log(const Value& a);
Value square(const Value& a);
// Numerically stable softmax over each row. With a mask, entries where the
// mask is false are excluded (output exactly 0); every row must keep at least
// one entry.
Value softmax_rows(const Value& a);
Value softmax_rows(const Value& a, const Mask& mask);
Value log_softmax_rows(const Value& a);
// log(1 + exp(x)) computed without overflow.
Value softplus(const Value& a);
Value concat_cols(std::span<const Value> parts);
Value concat_cols(std::initializer_list<Value> parts);
Value concat_rows(std::span<const Value> parts);
Value slice_cols(const Value& a, Eigen::Index begin, Eigen::Index count);
Value gather_rows(const Value& a, std::span<const Eigen::Index> rows);
// Row-major reinterpretation; element count must match.
Value reshape(const Value& a, Eigen::Index rows, Eigen::Index cols);
Value sum(const Value& a);
Value mean(const Value& a);
Value sum_cols(const Value& a);  // r x c -> r x 1
Value l2_norm(const Value& a);   // Frobenius norm of all entries, 1x1
// Grouped products for attention over independent groups of `group` rows.
// Row r belongs to group g = r / group.
//   grouped_scores(q, k)(r, j) = <q.row(r), k.row(g * group + j)>      (R x group)
//   grouped_mix(w, v).row(r)   = sum_j w(r, j) * v.row(g * group + j)  (R x d)
Value grouped_scores(const Value& q, const Value& k, Eigen::Index group);
Value grouped_mix(const Value& weights, const Value& v, Eigen::Index group);
// Rows with keep[r] == false become exactly +0 and pass no gradient.
Value mask_rows(const Value& a, const std::vector<bool>& keep);
Value detach(const Value& a);

// ---- backward --------------------------------------------------------------
// root must be 1x1. Intermediate gradients are recomputed on every call;
// leaf gradients accumulate (call zero_grad / ParamStore::zero_grads between
// steps).
void backward(const Value& root);

}  // namespace ac2c::diff
