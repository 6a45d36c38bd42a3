#include "ac2c/diffmath.hpp"

#include "ac2c/error.hpp"

#include <cmath>
#include <limits>

namespace ac2c::diff {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                   shape_string(b));
}

void require_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a.data(), b.data());
}

// Builds the result node. Parents are only linked when some parent needs a
// gradient, so pure-constant subgraphs are freed eagerly.
Value make_op(const char* op, Matrix data, std::vector<Value> parents,
              std::function<void(Node&)> backward_fn) {
  if (!data.allFinite()) {
    throw NumericError(std::string(op) + ": non-finite output " + shape_string(data));
  }
  auto node = std::make_shared<Node>();
  node->op = op;
  node->grad = Matrix::Zero(data.rows(), data.cols());
  node->data = std::move(data);
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p.requires_grad();
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Value(std::move(node));
}

inline bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }
inline Matrix& grad_of(Node& self, std::size_t i) { return self.parents[i]->grad; }
inline const Matrix& data_of(const Node& self, std::size_t i) { return self.parents[i]->data; }

}  // namespace

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.data(), b.data());
  Matrix out = a.data() * b.data();
  return make_op("matmul", std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0).noalias() += self.grad * data_of(self, 1).transpose();
    if (wants(self, 1)) grad_of(self, 1).noalias() += data_of(self, 0).transpose() * self.grad;
  });
}

Value transpose(const Value& a) {
  Matrix out = a.data().transpose();
  return make_op("transpose", std::move(out), {a},
                 [](Node& self) { grad_of(self, 0) += self.grad.transpose(); });
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a, b);
  return make_op("add", a.data() + b.data(), {a, b}, [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0) += self.grad;
    if (wants(self, 1)) grad_of(self, 1) += self.grad;
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a, b);
  return make_op("sub", a.data() - b.data(), {a, b}, [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0) += self.grad;
    if (wants(self, 1)) grad_of(self, 1) -= self.grad;
  });
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a, b);
  Matrix out = a.data().cwiseProduct(b.data());
  return make_op("mul", std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0) += self.grad.cwiseProduct(data_of(self, 1));
    if (wants(self, 1)) grad_of(self, 1) += self.grad.cwiseProduct(data_of(self, 0));
  });
}

Value add_row(const Value& a, const Value& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_mismatch("add_row", a.data(), row.data());
  Matrix out = a.data().rowwise() + row.data().row(0);
  return make_op("add_row", std::move(out), {a, row}, [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0) += self.grad;
    if (wants(self, 1)) grad_of(self, 1) += self.grad.colwise().sum();
  });
}

Value scale(const Value& a, double s) {
  return make_op("scale", a.data() * s, {a}, [s](Node& self) { grad_of(self, 0) += self.grad * s; });
}

Value add_scalar(const Value& a, double s) {
  Matrix out = a.data().array() + s;
  return make_op("add_scalar", std::move(out), {a},
                 [](Node& self) { grad_of(self, 0) += self.grad; });
}

Value tanh(const Value& a) {
  Matrix out = a.data().array().tanh();
  return make_op("tanh", std::move(out), {a}, [](Node& self) {
    grad_of(self, 0).array() += self.grad.array() * (1.0 - self.data.array().square());
  });
}

Value sigmoid(const Value& a) {
  Matrix out = a.data().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_op("sigmoid", std::move(out), {a}, [](Node& self) {
    grad_of(self, 0).array() += self.grad.array() * self.data.array() * (1.0 - self.data.array());
  });
}

Value leaky_relu(const Value& a, double negative_slope) {
  Matrix out = a.data().unaryExpr([negative_slope](double x) { return x > 0 ? x : negative_slope * x; });
  return make_op("leaky_relu", std::move(out), {a}, [negative_slope](Node& self) {
    const Matrix& x = data_of(self, 0);
    grad_of(self, 0) += self.grad.binaryExpr(
        x, [negative_slope](double g, double v) { return v > 0 ? g : negative_slope * g; });
  });
}

Value exp(const Value& a) {
  Matrix out = a.data().array().exp();
  return make_op("exp", std::move(out), {a}, [](Node& self) {
    grad_of(self, 0) += self.grad.cwiseProduct(self.data);
  });
}

Value log(const Value& a) {
  if ((a.data().array() <= 0).any()) {
    throw NumericError("log: non-positive input " + shape_string(a.data()));
  }
  Matrix out = a.data().array().log();
  return make_op("log", std::move(out), {a}, [](Node& self) {
    grad_of(self, 0).array() += self.grad.array() / data_of(self, 0).array();
  });
}

Value square(const Value& a) {
  Matrix out = a.data().array().square();
  return make_op("square", std::move(out), {a}, [](Node& self) {
    grad_of(self, 0).array() += 2.0 * self.grad.array() * data_of(self, 0).array();
  });
}

namespace {

Matrix masked_softmax(const Matrix& x, const Mask* mask) {
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!mask || (*mask)(r, c)) row_max = std::max(row_max, x(r, c));
    }
    if (row_max == -std::numeric_limits<double>::infinity()) {
      throw ShapeError("softmax_rows: row " + std::to_string(r) + " has no unmasked entries");
    }
    double total = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!mask || (*mask)(r, c)) {
        out(r, c) = std::exp(x(r, c) - row_max);
        total += out(r, c);
      }
    }
    out.row(r) /= total;
  }
  return out;
}

// dx = y * (g - <g, y>) per row; masked entries have y = 0 so receive nothing.
void softmax_backward(Node& self) {
  const Matrix& y = self.data;
  const Eigen::VectorXd dots = (self.grad.cwiseProduct(y)).rowwise().sum();
  Matrix dx = self.grad;
  dx.colwise() -= dots;
  grad_of(self, 0) += dx.cwiseProduct(y);
}

}  // namespace

Value softmax_rows(const Value& a) {
  return make_op("softmax_rows", masked_softmax(a.data(), nullptr), {a}, softmax_backward);
}

Value softmax_rows(const Value& a, const Mask& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw ShapeError("softmax_rows: mask shape (" + std::to_string(mask.rows()) + "x" +
                     std::to_string(mask.cols()) + ") vs " + shape_string(a.data()));
  }
  return make_op("softmax_rows", masked_softmax(a.data(), &mask), {a}, softmax_backward);
}

Value log_softmax_rows(const Value& a) {
  const Matrix& x = a.data();
  const Eigen::VectorXd row_max = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - row_max;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  Matrix out = shifted.colwise() - lse;
  return make_op("log_softmax_rows", std::move(out), {a}, [](Node& self) {
    const Matrix probs = self.data.array().exp();
    const Eigen::VectorXd gsum = self.grad.rowwise().sum();
    Matrix dx = self.grad - (probs.array().colwise() * gsum.array()).matrix();
    grad_of(self, 0) += dx;
  });
}

Value softplus(const Value& a) {
  Matrix out = a.data().unaryExpr([](double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return make_op("softplus", std::move(out), {a}, [](Node& self) {
    const Matrix sig = data_of(self, 0).unaryExpr([](double x) {
      if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
      const double e = std::exp(x);
      return e / (1.0 + e);
    });
    grad_of(self, 0) += self.grad.cwiseProduct(sig);
  });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_mismatch("concat_cols", parts[0].data(), p.data());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.data();
    offsets.push_back(at);
    at += p.cols();
  }
  return make_op("concat_cols", std::move(out), {parts.begin(), parts.end()},
                 [offsets](Node& self) {
                   for (std::size_t i = 0; i < self.parents.size(); ++i) {
                     if (!wants(self, i)) continue;
                     grad_of(self, i) += self.grad.middleCols(offsets[i], data_of(self, i).cols());
                   }
                 });
}

Value concat_cols(std::initializer_list<Value> parts) {
  return concat_cols(std::span<const Value>(parts.begin(), parts.size()));
}

Value concat_rows(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_mismatch("concat_rows", parts[0].data(), p.data());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.data();
    offsets.push_back(at);
    at += p.rows();
  }
  return make_op("concat_rows", std::move(out), {parts.begin(), parts.end()},
                 [offsets](Node& self) {
                   for (std::size_t i = 0; i < self.parents.size(); ++i) {
                     if (!wants(self, i)) continue;
                     grad_of(self, i) += self.grad.middleRows(offsets[i], data_of(self, i).rows());
                   }
                 });
}

Value slice_cols(const Value& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_string(a.data()));
  }
  Matrix out = a.data().middleCols(begin, count);
  return make_op("slice_cols", std::move(out), {a}, [begin, count](Node& self) {
    grad_of(self, 0).middleCols(begin, count) += self.grad;
  });
}

Value gather_rows(const Value& a, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                       shape_string(a.data()));
    }
    out.row(static_cast<Eigen::Index>(i)) = a.data().row(rows[i]);
  }
  std::vector<Eigen::Index> index(rows.begin(), rows.end());
  return make_op("gather_rows", std::move(out), {a}, [index](Node& self) {
    for (std::size_t i = 0; i < index.size(); ++i) {
      grad_of(self, 0).row(index[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Value reshape(const Value& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.data().size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.data()) + " as (" +
                     std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  Matrix out = Eigen::Map<const Matrix>(a.data().data(), rows, cols);
  return make_op("reshape", std::move(out), {a}, [](Node& self) {
    Matrix& g = grad_of(self, 0);
    Eigen::Map<Matrix>(g.data(), self.grad.rows(), self.grad.cols()) += self.grad;
  });
}

Value sum(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  return make_op("sum", std::move(out), {a},
                 [](Node& self) { grad_of(self, 0).array() += self.grad(0, 0); });
}

Value mean(const Value& a) {
  if (a.data().size() == 0) throw ShapeError("mean: empty input");
  const double n = static_cast<double>(a.data().size());
  Matrix out(1, 1);
  out(0, 0) = a.data().sum() / n;
  return make_op("mean", std::move(out), {a},
                 [n](Node& self) { grad_of(self, 0).array() += self.grad(0, 0) / n; });
}

Value sum_cols(const Value& a) {
  Matrix out = a.data().rowwise().sum();
  return make_op("sum_cols", std::move(out), {a}, [](Node& self) {
    grad_of(self, 0).colwise() += self.grad.col(0);
  });
}

Value l2_norm(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().norm();
  return make_op("l2_norm", std::move(out), {a}, [](Node& self) {
    const double n = self.data(0, 0);
    // Subgradient 0 at the origin.
    if (n > 0) grad_of(self, 0) += data_of(self, 0) * (self.grad(0, 0) / n);
  });
}

namespace {

void require_grouping(const char* op, const Value& a, const Value& b, Eigen::Index group) {
  if (group <= 0 || a.rows() != b.rows() || a.rows() % group != 0) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.data()) + " vs " +
                     shape_string(b.data()) + " for group size " + std::to_string(group));
  }
}

}  // namespace

Value grouped_scores(const Value& q, const Value& k, Eigen::Index group) {
  require_grouping("grouped_scores", q, k, group);
  if (q.cols() != k.cols()) shape_mismatch("grouped_scores", q.data(), k.data());
  const Eigen::Index groups = q.rows() / group;
  Matrix out(q.rows(), group);
  for (Eigen::Index g = 0; g < groups; ++g) {
    out.middleRows(g * group, group).noalias() =
        q.data().middleRows(g * group, group) * k.data().middleRows(g * group, group).transpose();
  }
  return make_op("grouped_scores", std::move(out), {q, k}, [group, groups](Node& self) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const auto dout = self.grad.middleRows(g * group, group);
      if (wants(self, 0)) {
        grad_of(self, 0).middleRows(g * group, group).noalias() +=
            dout * data_of(self, 1).middleRows(g * group, group);
      }
      if (wants(self, 1)) {
        grad_of(self, 1).middleRows(g * group, group).noalias() +=
            dout.transpose() * data_of(self, 0).middleRows(g * group, group);
      }
    }
  });
}

Value grouped_mix(const Value& weights, const Value& v, Eigen::Index group) {
  require_grouping("grouped_mix", weights, v, group);
  if (weights.cols() != group) shape_mismatch("grouped_mix", weights.data(), v.data());
  const Eigen::Index groups = v.rows() / group;
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    out.middleRows(g * group, group).noalias() =
        weights.data().middleRows(g * group, group) * v.data().middleRows(g * group, group);
  }
  return make_op("grouped_mix", std::move(out), {weights, v}, [group, groups](Node& self) {
    for (Eigen::Index g = 0; g < groups; ++g) {
      const auto dout = self.grad.middleRows(g * group, group);
      if (wants(self, 0)) {
        grad_of(self, 0).middleRows(g * group, group).noalias() +=
            dout * data_of(self, 1).middleRows(g * group, group).transpose();
      }
      if (wants(self, 1)) {
        grad_of(self, 1).middleRows(g * group, group).noalias() +=
            data_of(self, 0).middleRows(g * group, group).transpose() * dout;
      }
    }
  });
}

Value mask_rows(const Value& a, const std::vector<bool>& keep) {
  if (static_cast<Eigen::Index>(keep.size()) != a.rows()) {
    throw ShapeError("mask_rows: " + std::to_string(keep.size()) + " flags for " +
                     shape_string(a.data()));
  }
  Matrix out = a.data();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (!keep[r]) out.row(r).setZero();
  }
  return make_op("mask_rows", std::move(out), {a}, [keep](Node& self) {
    for (Eigen::Index r = 0; r < self.grad.rows(); ++r) {
      if (keep[r]) grad_of(self, 0).row(r) += self.grad.row(r);
    }
  });
}

Value detach(const Value& a) { return Value::constant(a.data()); }

}  // namespace ac2c::diff
