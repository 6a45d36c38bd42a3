#include "ac2c/error.hpp"
#include "ac2c/learning.hpp"

namespace ac2c::learning {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = base ^ (stream * 0x9E3779B97F4A7C15ULL) ^ (index * 0xD1B54A32D192ED03ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n) {
  if (n == 0 || items_.empty()) {
    throw DomainError("replay sample: requested " + std::to_string(n) + " from " +
                      std::to_string(items_.size()) + " stored transitions");
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(&items_[pick(rng_)]);
  return out;
}

namespace {

Matrix stack(std::span<const Transition* const> items, Matrix Transition::*field) {
  const Matrix& first = items.front()->*field;
  Matrix out(first.rows() * static_cast<Eigen::Index>(items.size()), first.cols());
  for (std::size_t b = 0; b < items.size(); ++b) {
    const Matrix& m = items[b]->*field;
    if (m.rows() != first.rows() || m.cols() != first.cols()) {
      throw ShapeError("make_batch: transition " + std::to_string(b) + " has shape " +
                       diff::shape_string(m) + ", expected " + diff::shape_string(first));
    }
    out.middleRows(static_cast<Eigen::Index>(b) * first.rows(), first.rows()) = m;
  }
  return out;
}

std::vector<comm::Topology> topologies(std::span<const Transition* const> items, double range,
                                       bool next) {
  std::vector<comm::Topology> out;
  out.reserve(items.size());
  for (const Transition* t : items) {
    const auto& pos = next ? t->next_positions : t->positions;
    const auto& active = next ? t->next_active : t->active;
    out.push_back(comm::Topology::build(pos, range, active));
  }
  return out;
}

}  // namespace

Batch make_batch(std::span<const Transition* const> items, double range) {
  if (items.empty()) throw DomainError("make_batch: empty batch");
  Batch b;
  b.n_agents = static_cast<int>(items.front()->obs.rows());
  b.samples = static_cast<int>(items.size());
  b.obs = stack(items, &Transition::obs);
  b.hist = stack(items, &Transition::hist);
  b.actions = stack(items, &Transition::actions);
  b.next_obs = stack(items, &Transition::next_obs);
  b.next_hist = stack(items, &Transition::next_hist);
  for (const Transition* t : items) {
    b.rewards.push_back(t->reward);
    b.dones.push_back(t->done);
  }
  b.comm = protocol::CommBatch(b.n_agents, topologies(items, range, false));
  b.next_comm = protocol::CommBatch(b.n_agents, topologies(items, range, true));
  return b;
}

}  // namespace ac2c::learning
