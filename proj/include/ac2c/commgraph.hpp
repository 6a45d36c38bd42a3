#pragma once

// Range-limited communication topology and overhead accounting.
//
// Agents i and j are one-hop neighbors when their Euclidean distance is at
// most the range L (closed disk). The two-hop closure of i is every agent
// within range of some one-hop neighbor of i; the two-hop set removes i and
// its one-hop neighbors from that closure.

#include "ac2c/protocol_mode.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ac2c::comm {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

class Topology {
 public:
  // Inactive agents (active[i] == false) keep their slot but have no links.
  // An empty `active` list means every agent is active.
  static Topology build(std::span<const Point> positions, double range,
                        const std::vector<bool>& active = {});

  int n_agents() const { return static_cast<int>(one_hop_.size()); }
  double range() const { return range_; }
  bool active(int i) const;

  // Sorted agent indices.
  const std::vector<int>& one_hop(int i) const;
  const std::vector<int>& two_hop_closure(int i) const;
  const std::vector<int>& two_hop(int i) const;

  // One-hop neighbors of i that are one-hop neighbors of k, sorted. Throws
  // DomainError unless k is a two-hop neighbor of i.
  std::vector<int> relays(int i, int k) const;
  // Lowest-index relay; the deterministic route for a two-hop message.
  int route(int i, int k) const;

  // One line per agent: "agent i | one_hop: a b | two_hop: c d".
  std::string dump() const;

 private:
  void check_agent(int i, const char* op) const;

  double range_ = 0.0;
  std::vector<bool> active_;
  std::vector<std::vector<int>> one_hop_;
  std::vector<std::vector<int>> closure_;
  std::vector<std::vector<int>> two_hop_;
};

inline Topology build_topology(std::span<const Point> positions, double range,
                               const std::vector<bool>& active = {}) {
  return Topology::build(positions, range, active);
}

// sum_i |N1_i| * w
std::int64_t cost_round1(const Topology& topo, std::int64_t bits_per_message);

// AC2C modes: sum over agents with gate 1 of |N2_i| * 2w (each two-hop message
// crosses a relay). GNN_TWO_ROUND: sum_i |N1_i| * w, ungated. ONE_ROUND: 0.
// The one-bit request broadcast is not charged.
std::int64_t cost_round2(const Topology& topo, std::span<const int> gates, ProtocolMode mode,
                         std::int64_t bits_per_message);

inline std::vector<int> relay_paths(const Topology& topo, int i, int k) { return topo.relays(i, k); }

struct CostEntry {
  std::int64_t round1_links = 0;
  std::int64_t round2_links = 0;  // messages delivered in round two
  std::int64_t round1_bits = 0;
  std::int64_t round2_bits = 0;
  std::vector<int> gates;
};

CostEntry cost_entry(const Topology& topo, std::span<const int> gates, ProtocolMode mode,
                     std::int64_t bits_per_message);

// Per-timestep overhead log for one episode.
class CostLedger {
 public:
  explicit CostLedger(std::int64_t bits_per_message) : bits_per_message_(bits_per_message) {}

  const CostEntry& record(const Topology& topo, std::span<const int> gates, ProtocolMode mode);
  void append(CostEntry entry) { entries_.push_back(std::move(entry)); }

  std::int64_t bits_per_message() const { return bits_per_message_; }
  const std::vector<CostEntry>& entries() const { return entries_; }
  std::int64_t total_round1_bits() const;
  std::int64_t total_round2_bits() const;
  std::int64_t total_bits() const { return total_round1_bits() + total_round2_bits(); }

 private:
  std::int64_t bits_per_message_;
  std::vector<CostEntry> entries_;
};

}  // namespace ac2c::comm
