#include "ac2c/error.hpp"
#include "ac2c/param_store.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ac2c::diff {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'C', '2', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::istream& in) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int byte = in.get();
    if (byte == std::char_traits<char>::eof()) throw IoError("checkpoint: unexpected end of data");
    value |= static_cast<T>(static_cast<unsigned char>(byte)) << (8 * i);
  }
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get_le<std::uint32_t>(in);
  if (n > (1u << 20)) throw IoError("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("checkpoint: unexpected end of data");
  return s;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
}

void get_matrix(std::istream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  }
}

}  // namespace

void write_store(std::ostream& out, const ParamStore& store) {
  put_le<std::uint64_t>(out, store.adam_steps_);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.entries_.size()));
  for (const auto& [name, e] : store.entries_) {
    put_string(out, name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.cols()));
    put_matrix(out, e.value.data());
    put_matrix(out, e.first_moment);
    put_matrix(out, e.second_moment);
  }
}

void read_store_into(std::istream& in, ParamStore& store, const std::string& label) {
  const auto steps = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint32_t>(in);
  if (count != store.entries_.size()) {
    throw ConfigError("checkpoint store '" + label + "' has " + std::to_string(count) +
                      " parameters, expected " + std::to_string(store.entries_.size()));
  }
  // Decode fully before touching the store so a mismatch leaves it intact.
  std::vector<std::array<Matrix, 3>> staged;
  auto it = store.entries_.begin();
  for (std::uint32_t i = 0; i < count; ++i, ++it) {
    const std::string name = get_string(in);
    const auto rows = get_le<std::uint32_t>(in);
    const auto cols = get_le<std::uint32_t>(in);
    if (name != it->first) {
      throw ConfigError("checkpoint store '" + label + "': parameter '" + name + "', expected '" +
                        it->first + "'");
    }
    if (rows != it->second.value.rows() || cols != it->second.value.cols()) {
      throw ConfigError("checkpoint store '" + label + "': parameter '" + name + "' shape (" +
                        std::to_string(rows) + "x" + std::to_string(cols) + ") vs " +
                        shape_string(it->second.value.data()));
    }
    std::array<Matrix, 3> mats;
    for (auto& m : mats) {
      m.resize(rows, cols);
      get_matrix(in, m);
    }
    staged.push_back(std::move(mats));
  }
  it = store.entries_.begin();
  for (auto& mats : staged) {
    it->second.value.node()->data = std::move(mats[0]);
    it->second.first_moment = std::move(mats[1]);
    it->second.second_moment = std::move(mats[2]);
    ++it;
  }
  store.adam_steps_ = steps;
}

std::string serialize_stores(const NamedStores& stores) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(stores.size()));
  for (const auto& [name, store] : stores) {
    put_string(out, name);
    write_store(out, *store);
  }
  return out.str();
}

void deserialize_stores(const std::string& bytes, const MutableNamedStores& stores) {
  std::istringstream in(bytes, std::ios::binary);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("checkpoint: bad magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in);
  if (count != stores.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(count) + " stores, expected " +
                      std::to_string(stores.size()));
  }
  for (const auto& [name, store] : stores) {
    const std::string found = get_string(in);
    if (found != name) throw ConfigError("checkpoint store '" + found + "', expected '" + name + "'");
    read_store_into(in, *store, name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint: trailing bytes");
}

void save_checkpoint(const std::string& path, const NamedStores& stores) {
  const std::string bytes = serialize_stores(stores);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

void load_checkpoint(const std::string& path, const MutableNamedStores& stores) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  deserialize_stores(buf.str(), stores);
}

}  // namespace ac2c::diff
