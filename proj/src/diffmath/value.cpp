#include "ac2c/diffmath.hpp"

#include "ac2c/error.hpp"

#include <unordered_set>

namespace ac2c::diff {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite value in ") + what + " " + shape_string(m));
  }
}

std::shared_ptr<Node> make_leaf(Matrix data, bool trainable) {
  require_finite(data, trainable ? "parameter" : "constant");
  auto node = std::make_shared<Node>();
  node->grad = Matrix::Zero(data.rows(), data.cols());
  node->data = std::move(data);
  node->requires_grad = trainable;
  node->op = trainable ? "parameter" : "constant";
  return node;
}

}  // namespace

std::string shape_string(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

Value Value::parameter(Matrix data) { return Value(make_leaf(std::move(data), true)); }

Value Value::constant(Matrix data) { return Value(make_leaf(std::move(data), false)); }

double Value::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("item: expected 1x1 value, got " + shape_string(data()));
  }
  return node_->data(0, 0);
}

void Value::zero_grad() { node_->grad.setZero(); }

void backward(const Value& root) {
  if (!root.defined()) throw ShapeError("backward: undefined root");
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward: root must be 1x1, got " + shape_string(root.data()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up topologically sorted (parents
  // before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Leaves collect this pass into a fresh buffer that is added to their
  // running gradient once, so repeated passes accumulate exactly.
  std::vector<std::pair<Node*, Matrix>> saved;
  for (Node* node : order) {
    if (node->parents.empty()) saved.emplace_back(node, node->grad);
    node->grad.setZero();
  }
  root.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->parents.empty() && node->backward_fn) node->backward_fn(*node);
  }
  for (auto& [leaf, previous] : saved) leaf->grad += previous;
}

}  // namespace ac2c::diff
