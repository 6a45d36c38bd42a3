#include "ac2c/error.hpp"
#include "ac2c/harness.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace ac2c::harness {

namespace {

using json = nlohmann::json;

const std::set<std::string> kIdentity{"run", "seed", "episode", "phase"};

std::string num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::set<std::string> keys_of(const json& record) {
  std::set<std::string> out;
  for (const auto& [k, v] : record.items()) out.insert(k);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string emit_plotdata(const std::vector<fs::path>& metrics_files) {
  if (metrics_files.empty()) throw ConfigError("plotdata needs at least one metrics file");

  // (run, metric, episode) -> seed -> value
  using Key = std::tuple<std::string, std::string, long long>;
  std::map<Key, std::map<std::uint64_t, double>> series;
  std::optional<std::set<std::string>> schema;

  for (const auto& path : metrics_files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file " + path.string());
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::exception& e) {
        throw ConfigError("metrics file " + path.string() + " line " + std::to_string(number) +
                          ": invalid JSON (" + e.what() + ")");
      }
      const auto keys = keys_of(record);
      if (!schema) schema = keys;
      for (const auto& id : kIdentity) {
        if (!keys.count(id)) {
          throw ConfigError("inconsistent schema in " + path.string() + " line " + std::to_string(number) +
                            ": missing '" + id + "'");
        }
      }
      if (keys != *schema) {
        std::string diff;
        for (const auto& k : keys) if (!schema->count(k)) diff += " +" + k;
        for (const auto& k : *schema) if (!keys.count(k)) diff += " -" + k;
        throw ConfigError("inconsistent schema in " + path.string() + " line " + std::to_string(number) + ":" + diff);
      }
      const std::string run = record["run"].get<std::string>();
      const auto seed = record["seed"].get<std::uint64_t>();
      const auto episode = record["episode"].get<long long>();
      const std::string phase = record["phase"].get<std::string>();
      for (const auto& [k, v] : record.items()) {
        if (kIdentity.count(k) || !v.is_number()) continue;
        auto& slot = series[{run, phase + "." + k, episode}];
        if (slot.count(seed)) {
          throw ConfigError("duplicate record in " + path.string() + " line " + std::to_string(number) + ": run " +
                            run + " seed " + std::to_string(seed) + " episode " + std::to_string(episode));
        }
        slot[seed] = v.get<double>();
      }
    }
  }

  std::ostringstream out;
  out << "run,seed,episode,metric,value,mean,std,lower,upper\n";
  for (const auto& [key, by_seed] : series) {
    const auto& [run, metric, episode] = key;
    double mean = 0.0;
    for (const auto& [s, v] : by_seed) mean += v;
    mean /= by_seed.size();
    double sq = 0.0;
    for (const auto& [s, v] : by_seed) sq += (v - mean) * (v - mean);
    const double sd = by_seed.size() > 1 ? std::sqrt(sq / (by_seed.size() - 1)) : 0.0;
    for (const auto& [seed, value] : by_seed) {
      out << csv_field(run) << "," << seed << "," << episode << "," << metric << "," << num(value) << ","
          << num(mean) << "," << num(sd) << "," << num(mean - sd) << "," << num(mean + sd) << "\n";
    }
  }
  return out.str();
}

}  // namespace ac2c::harness
