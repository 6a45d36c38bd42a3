#pragma once

#include "ac2c/diffmath.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ac2c::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Named trainable parameters plus their Adam moment accumulators. Names are
// unique and iteration is sorted by name, so serialization and updates run in
// a deterministic order.
class ParamStore {
 public:
  struct Entry {
    Value value;
    Matrix first_moment;
    Matrix second_moment;
  };

  // Registers a new parameter. Throws ConfigError if the name already exists.
  Value add(const std::string& name, Matrix init);
  const Value& get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  void zero_grads();
  double grad_norm() const;

  std::uint64_t adam_steps() const { return adam_steps_; }

  // Deep copy with fresh graph leaves; moments and step count are copied.
  ParamStore clone() const;
  // this <- tau * source + (1 - tau) * this, parameter data only.
  void blend_from(const ParamStore& source, double tau);

  friend void adam_step(ParamStore& store, double lr, double clip_norm, const AdamConfig& cfg);
  friend void write_store(std::ostream& out, const ParamStore& store);
  friend void read_store_into(std::istream& in, ParamStore& store, const std::string& label);

 private:
  void require_same_layout(const ParamStore& other, const char* op) const;

  std::map<std::string, Entry> entries_;
  std::uint64_t adam_steps_ = 0;
};

// One Adam step on every parameter. The gradient of the whole store is first
// rescaled so its global L2 norm is at most clip_norm (clip_norm <= 0 disables
// clipping). Gradients are left untouched; callers zero them.
void adam_step(ParamStore& store, double lr, double clip_norm, const AdamConfig& cfg = {});

// ---- checkpoints -----------------------------------------------------------
// Binary little-endian format, documented in docs/checkpoint_format.md.

using NamedStores = std::vector<std::pair<std::string, const ParamStore*>>;
using MutableNamedStores = std::vector<std::pair<std::string, ParamStore*>>;

std::string serialize_stores(const NamedStores& stores);
void deserialize_stores(const std::string& bytes, const MutableNamedStores& stores);
void save_checkpoint(const std::string& path, const NamedStores& stores);
// Loads into existing stores; every store, parameter name and shape must match.
void load_checkpoint(const std::string& path, const MutableNamedStores& stores);

}  // namespace ac2c::diff
