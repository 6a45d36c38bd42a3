#include "ac2c/commgraph.hpp"
#include "ac2c/error.hpp"

namespace ac2c::comm {

namespace {

std::int64_t one_hop_links(const Topology& topo) {
  std::int64_t links = 0;
  for (int i = 0; i < topo.n_agents(); ++i) links += static_cast<std::int64_t>(topo.one_hop(i).size());
  return links;
}

std::int64_t gated_two_hop_messages(const Topology& topo, std::span<const int> gates) {
  std::int64_t messages = 0;
  for (int i = 0; i < topo.n_agents(); ++i) {
    if (gates[i] == 1) messages += static_cast<std::int64_t>(topo.two_hop(i).size());
  }
  return messages;
}

void check_gates(const Topology& topo, std::span<const int> gates) {
  if (static_cast<int>(gates.size()) != topo.n_agents()) {
    throw DomainError("cost_round2: " + std::to_string(gates.size()) + " gates for " +
                      std::to_string(topo.n_agents()) + " agents");
  }
}

}  // namespace

std::int64_t cost_round1(const Topology& topo, std::int64_t bits_per_message) {
  return one_hop_links(topo) * bits_per_message;
}

std::int64_t cost_round2(const Topology& topo, std::span<const int> gates, ProtocolMode mode,
                         std::int64_t bits_per_message) {
  return cost_entry(topo, gates, mode, bits_per_message).round2_bits;
}

CostEntry cost_entry(const Topology& topo, std::span<const int> gates, ProtocolMode mode,
                     std::int64_t bits_per_message) {
  check_gates(topo, gates);
  CostEntry entry;
  entry.gates.assign(gates.begin(), gates.end());
  entry.round1_links = one_hop_links(topo);
  entry.round1_bits = entry.round1_links * bits_per_message;
  switch (mode) {
    case ProtocolMode::AC2C:
    case ProtocolMode::AC2C_NO_CONTROLLER:
      entry.round2_links = gated_two_hop_messages(topo, gates);
      entry.round2_bits = entry.round2_links * 2 * bits_per_message;
      break;
    case ProtocolMode::GNN_TWO_ROUND:
      entry.round2_links = entry.round1_links;
      entry.round2_bits = entry.round2_links * bits_per_message;
      break;
    case ProtocolMode::ONE_ROUND:
      break;
  }
  return entry;
}

const CostEntry& CostLedger::record(const Topology& topo, std::span<const int> gates,
                                    ProtocolMode mode) {
  entries_.push_back(cost_entry(topo, gates, mode, bits_per_message_));
  return entries_.back();
}

std::int64_t CostLedger::total_round1_bits() const {
  std::int64_t total = 0;
  for (const auto& e : entries_) total += e.round1_bits;
  return total;
}

std::int64_t CostLedger::total_round2_bits() const {
  std::int64_t total = 0;
  for (const auto& e : entries_) total += e.round2_bits;
  return total;
}

}  // namespace ac2c::comm
