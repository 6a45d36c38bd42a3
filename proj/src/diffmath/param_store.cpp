#include "ac2c/param_store.hpp"

#include "ac2c/error.hpp"

#include <cmath>

namespace ac2c::diff {

Value ParamStore::add(const std::string& name, Matrix init) {
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Entry entry;
  entry.first_moment = Matrix::Zero(init.rows(), init.cols());
  entry.second_moment = Matrix::Zero(init.rows(), init.cols());
  entry.value = Value::parameter(std::move(init));
  auto [it, inserted] = entries_.emplace(name, std::move(entry));
  return it->second.value;
}

const Value& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second.value;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += static_cast<std::size_t>(e.value.data().size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [_, e] : entries_) e.value.node()->grad.setZero();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [_, e] : entries_) sq += e.value.grad().squaredNorm();
  return std::sqrt(sq);
}

ParamStore ParamStore::clone() const {
  ParamStore copy;
  for (const auto& [name, e] : entries_) {
    Entry c;
    c.value = Value::parameter(e.value.data());
    c.first_moment = e.first_moment;
    c.second_moment = e.second_moment;
    copy.entries_.emplace(name, std::move(c));
  }
  copy.adam_steps_ = adam_steps_;
  return copy;
}

void ParamStore::require_same_layout(const ParamStore& other, const char* op) const {
  if (other.entries_.size() != entries_.size()) {
    throw ShapeError(std::string(op) + ": parameter count " + std::to_string(other.size()) +
                     " vs " + std::to_string(size()));
  }
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first) {
      throw ShapeError(std::string(op) + ": parameter name " + b->first + " vs " + a->first);
    }
    const Matrix& x = a->second.value.data();
    const Matrix& y = b->second.value.data();
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
      throw ShapeError(std::string(op) + ": parameter " + a->first + " shape " +
                       shape_string(y) + " vs " + shape_string(x));
    }
  }
}

void ParamStore::blend_from(const ParamStore& source, double tau) {
  require_same_layout(source, "blend_from");
  auto src = source.entries_.begin();
  for (auto& [_, e] : entries_) {
    Matrix& dst = e.value.node()->data;
    dst = tau * src->second.value.data() + (1.0 - tau) * dst;
    ++src;
  }
}

void adam_step(ParamStore& store, double lr, double clip_norm, const AdamConfig& cfg) {
  for (const auto& [name, e] : store.entries_) {
    if (!e.value.grad().allFinite()) {
      throw NumericError("adam_step: non-finite gradient in parameter " + name);
    }
  }
  const double norm = store.grad_norm();
  const double factor = (clip_norm > 0 && norm > clip_norm) ? clip_norm / norm : 1.0;

  store.adam_steps_ += 1;
  const double t = static_cast<double>(store.adam_steps_);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [_, e] : store.entries_) {
    const Matrix g = e.value.grad() * factor;
    e.first_moment = cfg.beta1 * e.first_moment + (1.0 - cfg.beta1) * g;
    e.second_moment = cfg.beta2 * e.second_moment + (1.0 - cfg.beta2) * g.cwiseAbs2();
    Matrix& data = e.value.node()->data;
    data.array() -= lr * (e.first_moment.array() / bias1) /
                    ((e.second_moment.array() / bias2).sqrt() + cfg.epsilon);
  }
}

}  // namespace ac2c::diff
