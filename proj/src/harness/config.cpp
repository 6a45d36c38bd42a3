#include "ac2c/error.hpp"
#include "ac2c/harness.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace ac2c::harness {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& value) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_int<std::uint64_t>(key, item));
  }
  if (out.empty()) bad_value(key, value, "a comma-separated seed list");
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define AC2C_DOUBLE(name)                                                                      \
  Field{#name, [](ExperimentConfig& c, const std::string& v) { c.name = parse_double(#name, v); }, \
        [](const ExperimentConfig& c) { return format_double(c.name); }}
#define AC2C_INT(name, type)                                                                        \
  Field{#name, [](ExperimentConfig& c, const std::string& v) { c.name = parse_int<type>(#name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.name); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> all{
      Field{"env", [](ExperimentConfig& c, const std::string& v) { c.env = envs::parse_env_kind(v); },
            [](const ExperimentConfig& c) { return envs::to_string(c.env); }},
      Field{"difficulty",
            [](ExperimentConfig& c, const std::string& v) { c.difficulty = envs::parse_difficulty(v); },
            [](const ExperimentConfig& c) { return envs::to_string(c.difficulty); }},
      AC2C_INT(n_agents, int),
      AC2C_INT(n_targets, int),
      AC2C_INT(episode_length, int),
      AC2C_INT(layout_seed, std::uint64_t),
      Field{"mode", [](ExperimentConfig& c, const std::string& v) { c.mode = parse_protocol_mode(v); },
            [](const ExperimentConfig& c) { return to_string(c.mode); }},
      AC2C_DOUBLE(range),
      Field{"threshold",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "auto") {
                c.threshold.reset();
              } else {
                c.threshold = parse_double("threshold", v);
              }
            },
            [](const ExperimentConfig& c) { return c.threshold ? format_double(*c.threshold) : "auto"; }},
      AC2C_INT(bits_per_message, std::int64_t),
      AC2C_INT(width, int),
      AC2C_DOUBLE(actor_lr),
      AC2C_DOUBLE(critic_lr),
      AC2C_DOUBLE(controller_lr),
      AC2C_DOUBLE(clip_norm),
      AC2C_DOUBLE(gamma),
      AC2C_DOUBLE(tau),
      AC2C_INT(hard_update_period, int),
      AC2C_INT(replay_capacity, std::size_t),
      AC2C_INT(batch_size, int),
      AC2C_INT(updates_per_episode, int),
      AC2C_DOUBLE(noise_start),
      AC2C_DOUBLE(noise_end),
      AC2C_INT(reinforce_episodes, int),
      AC2C_INT(train_episodes, int),
      AC2C_INT(eval_episodes, int),
      AC2C_INT(eval_interval, int),
      AC2C_INT(interval_eval_episodes, int),
      AC2C_INT(checkpoint_interval, int),
      AC2C_INT(eval_seed, std::uint64_t),
      Field{"seeds", [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seeds("seeds", v); },
            [](const ExperimentConfig& c) {
              std::string out;
              for (std::size_t k = 0; k < c.seeds.size(); ++k) out += (k ? "," : "") + std::to_string(c.seeds[k]);
              return out;
            }},
      Field{"run_name", [](ExperimentConfig& c, const std::string& v) { c.run_name = v; },
            [](const ExperimentConfig& c) { return c.run_name; }},
      Field{"output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
            [](const ExperimentConfig& c) { return c.output_dir; }},
      Field{"trace", [](ExperimentConfig& c, const std::string& v) { c.trace = parse_bool("trace", v); },
            [](const ExperimentConfig& c) { return std::string(c.trace ? "true" : "false"); }},
  };
  return all;
}

#undef AC2C_DOUBLE
#undef AC2C_INT

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  std::string valid;
  for (const auto& f : fields()) valid += (valid.empty() ? "" : ", ") + f.key;
  throw ConfigError("unknown config key '" + key + "' (valid: " + valid + ")");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value, got '" + line + "'");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

double ExperimentConfig::resolved_threshold() const {
  if (threshold) return *threshold;
  return env == envs::EnvKind::TrafficJunction ? 0.15 : 0.5;
}

int ExperimentConfig::resolved_episode_length() const {
  if (episode_length > 0) return episode_length;
  if (env == envs::EnvKind::TrafficJunction) {
    return envs::TrafficJunctionConfig::for_difficulty(difficulty).episode_length;
  }
  return 50;
}

std::string ExperimentConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  std::string name = envs::to_string(env);
  if (env == envs::EnvKind::TrafficJunction) name += "_" + envs::to_string(difficulty);
  return name + "_" + to_string(mode);
}

fs::path ExperimentConfig::run_dir() const {
  fs::path root;
  if (!output_dir.empty()) {
    root = output_dir;
  } else if (const char* env_root = std::getenv(kOutputRootEnv); env_root != nullptr && *env_root != '\0') {
    root = env_root;
  } else {
    root = "runs";
  }
  return root / resolved_run_name();
}

envs::EnvConfig ExperimentConfig::env_config() const {
  envs::EnvConfig out;
  out.kind = env;
  out.particle.n_agents = n_agents;
  out.particle.n_targets = n_targets;
  out.particle.episode_length = resolved_episode_length();
  out.particle.layout_seed = layout_seed;
  out.junction = envs::TrafficJunctionConfig::for_difficulty(difficulty);
  out.junction.episode_length = resolved_episode_length();
  return out;
}

learning::LearnerConfig ExperimentConfig::learner_config() const {
  learning::LearnerConfig out;
  out.mode = mode;
  out.range = range;
  out.threshold = resolved_threshold();
  out.bits_per_message = bits_per_message;
  out.width = width;
  out.actor_lr = actor_lr;
  out.critic_lr = critic_lr;
  out.controller_lr = controller_lr;
  out.clip_norm = clip_norm;
  out.gamma = gamma;
  out.tau = tau;
  out.hard_update_period = hard_update_period;
  out.replay_capacity = replay_capacity;
  out.batch_size = batch_size;
  out.updates_per_episode = updates_per_episode;
  out.noise_start = noise_start;
  out.noise_end = noise_end;
  out.reinforce_episodes = reinforce_episodes;
  return out;
}

std::vector<std::string> ExperimentConfig::warnings() const {
  std::vector<std::string> out;
  if (mode != ProtocolMode::AC2C) return out;
  const double t = resolved_threshold();
  const double hi = env == envs::EnvKind::TrafficJunction ? 0.2 : 0.6;
  if (t < 0.1 || t > hi) {
    out.push_back("threshold " + format_double(t) + " is outside the usual range [0.1, " + format_double(hi) +
                  "] for " + envs::to_string(env));
  }
  return out;
}

void ExperimentConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(n_agents >= 1, "n_agents must be at least 1");
  require(n_targets >= 1, "n_targets must be at least 1");
  require(episode_length >= 0, "episode_length must be non-negative");
  require(range >= 0.0, "range must be non-negative");
  require(mode != ProtocolMode::AC2C || (resolved_threshold() > 0.0 && resolved_threshold() < 1.0),
          "threshold must lie in (0, 1) in ac2c mode");
  require(bits_per_message > 0, "bits_per_message must be positive");
  require(width > 0, "width must be positive");
  require(actor_lr > 0 && critic_lr > 0 && controller_lr > 0, "learning rates must be positive");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0, 1]");
  require(replay_capacity > 0, "replay_capacity must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(reinforce_episodes >= 2, "reinforce_episodes must be at least 2");
  require(train_episodes >= 0, "train_episodes must be non-negative");
  require(eval_episodes >= 1, "eval_episodes must be at least 1");
  require(eval_interval >= 0 && interval_eval_episodes >= 1, "eval_interval must be >= 0 and interval_eval_episodes >= 1");
  require(checkpoint_interval >= 0, "checkpoint_interval must be non-negative");
  require(!seeds.empty(), "seeds must not be empty");
}

}  // namespace ac2c::harness
