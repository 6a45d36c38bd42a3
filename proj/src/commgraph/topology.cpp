#include "ac2c/commgraph.hpp"
#include "ac2c/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace ac2c {

std::string to_string(ProtocolMode mode) {
  switch (mode) {
    case ProtocolMode::AC2C: return "ac2c";
    case ProtocolMode::AC2C_NO_CONTROLLER: return "ac2c_no_controller";
    case ProtocolMode::GNN_TWO_ROUND: return "gnn_two_round";
    case ProtocolMode::ONE_ROUND: return "one_round";
  }
  return "unknown";
}

ProtocolMode parse_protocol_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ac2c") return ProtocolMode::AC2C;
  if (lower == "ac2c_no_controller") return ProtocolMode::AC2C_NO_CONTROLLER;
  if (lower == "gnn_two_round") return ProtocolMode::GNN_TWO_ROUND;
  if (lower == "one_round") return ProtocolMode::ONE_ROUND;
  throw ConfigError("unknown protocol mode '" + std::string(text) +
                    "' (valid: ac2c, ac2c_no_controller, gnn_two_round, one_round)");
}

}  // namespace ac2c

namespace ac2c::comm {

Topology Topology::build(std::span<const Point> positions, double range,
                         const std::vector<bool>& active) {
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw DomainError("build_topology: range must be positive and finite");
  }
  if (!active.empty() && active.size() != positions.size()) {
    throw DomainError("build_topology: " + std::to_string(active.size()) + " active flags for " +
                      std::to_string(positions.size()) + " agents");
  }
  const int n = static_cast<int>(positions.size());
  Topology topo;
  topo.range_ = range;
  topo.active_.assign(positions.size(), true);
  for (int i = 0; i < n; ++i) {
    if (!active.empty()) topo.active_[i] = active[i];
    if (!std::isfinite(positions[i].x) || !std::isfinite(positions[i].y)) {
      throw DomainError("build_topology: non-finite position for agent " + std::to_string(i));
    }
  }

  topo.one_hop_.assign(n, {});
  const double range_sq = range * range;
  for (int i = 0; i < n; ++i) {
    if (!topo.active_[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!topo.active_[j]) continue;
      const double dx = positions[i].x - positions[j].x;
      const double dy = positions[i].y - positions[j].y;
      if (dx * dx + dy * dy <= range_sq) {
        topo.one_hop_[i].push_back(j);
        topo.one_hop_[j].push_back(i);
      }
    }
  }
  for (auto& set : topo.one_hop_) std::sort(set.begin(), set.end());

  topo.closure_.assign(n, {});
  topo.two_hop_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    std::vector<bool> in_closure(n, false);
    for (int j : topo.one_hop_[i]) {
      for (int k : topo.one_hop_[j]) in_closure[k] = true;
    }
    for (int k = 0; k < n; ++k) {
      if (!in_closure[k]) continue;
      topo.closure_[i].push_back(k);
      if (k != i && !std::binary_search(topo.one_hop_[i].begin(), topo.one_hop_[i].end(), k)) {
        topo.two_hop_[i].push_back(k);
      }
    }
  }
  return topo;
}

void Topology::check_agent(int i, const char* op) const {
  if (i < 0 || i >= n_agents()) {
    throw DomainError(std::string(op) + ": agent " + std::to_string(i) + " out of range [0, " +
                      std::to_string(n_agents()) + ")");
  }
}

bool Topology::active(int i) const {
  check_agent(i, "active");
  return active_[i];
}

const std::vector<int>& Topology::one_hop(int i) const {
  check_agent(i, "one_hop");
  return one_hop_[i];
}

const std::vector<int>& Topology::two_hop_closure(int i) const {
  check_agent(i, "two_hop_closure");
  return closure_[i];
}

const std::vector<int>& Topology::two_hop(int i) const {
  check_agent(i, "two_hop");
  return two_hop_[i];
}

std::vector<int> Topology::relays(int i, int k) const {
  check_agent(i, "relays");
  check_agent(k, "relays");
  if (!std::binary_search(two_hop_[i].begin(), two_hop_[i].end(), k)) {
    throw DomainError("relays: agent " + std::to_string(k) + " is not a two-hop neighbor of " +
                      std::to_string(i));
  }
  std::vector<int> out;
  for (int j : one_hop_[i]) {
    if (std::binary_search(one_hop_[j].begin(), one_hop_[j].end(), k)) out.push_back(j);
  }
  return out;
}

int Topology::route(int i, int k) const { return relays(i, k).front(); }

std::string Topology::dump() const {
  std::ostringstream out;
  for (int i = 0; i < n_agents(); ++i) {
    out << "agent " << i << " | one_hop:";
    for (int j : one_hop_[i]) out << ' ' << j;
    out << " | two_hop:";
    for (int k : two_hop_[i]) out << ' ' << k;
    out << '\n';
  }
  return out.str();
}

}  // namespace ac2c::comm
