#include "ac2c/error.hpp"
#include "ac2c/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ac2c::harness {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kEvalStream = 5;
constexpr std::uint64_t kEvalRngStream = 6;
constexpr std::uint64_t kInspectStream = 7;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

learning::EpisodeStats random_episode(envs::Environment& env, std::uint64_t seed, std::mt19937_64& rng) {
  const auto& spec = env.spec();
  env.reset(seed);
  learning::EpisodeStats s;
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, spec.action_dim - 1);
  bool done = false;
  while (!done) {
    Matrix a;
    if (spec.action_kind == neural::ActionKind::Discrete) {
      a.resize(spec.n_agents, 1);
      for (int i = 0; i < spec.n_agents; ++i) a(i, 0) = pick(rng);
    } else {
      a.resize(spec.n_agents, spec.action_dim);
      for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = box(rng);
    }
    const auto r = env.step(a);
    s.steps += 1;
    s.total_reward += r.reward;
    s.collisions += r.collisions;
    done = r.done;
  }
  s.reward_per_step_per_agent = s.total_reward / (static_cast<double>(s.steps) * spec.n_agents);
  s.success = spec.kind == envs::EnvKind::TrafficJunction && s.collisions == 0;
  return s;
}

void accumulate(EvalSummary& sum, const learning::EpisodeStats& s) {
  sum.episodes += 1;
  sum.reward_per_step += s.reward_per_step_per_agent;
  sum.episode_return += s.total_reward;
  sum.round1_bits_per_step += static_cast<double>(s.round1_bits) / s.steps;
  sum.round2_bits_per_step += static_cast<double>(s.round2_bits) / s.steps;
  sum.total_bits_per_step += static_cast<double>(s.round1_bits + s.round2_bits) / s.steps;
  sum.opening_rate += s.opening_rate;
  sum.success_rate += s.success ? 1.0 : 0.0;
  sum.collisions += s.collisions;
}

void finish(EvalSummary& sum) {
  if (sum.episodes == 0) return;
  const double n = sum.episodes;
  sum.reward_per_step /= n;
  sum.episode_return /= n;
  sum.round1_bits_per_step /= n;
  sum.round2_bits_per_step /= n;
  sum.total_bits_per_step /= n;
  sum.opening_rate /= n;
  sum.success_rate /= n;
  sum.collisions /= n;
}

json success_field(envs::EnvKind kind, double value) {
  return kind == envs::EnvKind::TrafficJunction ? json(value) : json(nullptr);
}

json metrics_record(const std::string& run, std::uint64_t seed, int episode, const char* phase,
                    envs::EnvKind kind, const EvalSummary& s, const learning::UpdateStats* update) {
  json r;
  r["run"] = run;
  r["seed"] = seed;
  r["episode"] = episode;
  r["phase"] = phase;
  r["reward_per_step"] = s.reward_per_step;
  r["episode_return"] = s.episode_return;
  r["round1_bits_per_step"] = s.round1_bits_per_step;
  r["round2_bits_per_step"] = s.round2_bits_per_step;
  r["total_bits_per_step"] = s.total_bits_per_step;
  r["opening_rate"] = s.opening_rate;
  r["success"] = success_field(kind, s.success_rate);
  r["collisions"] = s.collisions;
  r["critic_loss"] = update ? json(update->critic_loss) : json(nullptr);
  r["actor_objective"] = update ? json(update->actor_objective) : json(nullptr);
  r["controller_loss"] = update ? json(update->controller_loss) : json(nullptr);
  r["updates"] = update ? update->updates : 0;
  return r;
}

json config_json(const ExperimentConfig& cfg) {
  json out;
  std::stringstream ss(serialize_config(cfg));
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace

std::unique_ptr<learning::Trainer> make_trainer(const ExperimentConfig& cfg, const envs::EnvSpec& spec,
                                                std::uint64_t seed) {
  const auto lc = cfg.learner_config();
  if (spec.kind == envs::EnvKind::TrafficJunction) {
    return std::make_unique<learning::ReinforceTrainer>(spec, lc, seed);
  }
  return std::make_unique<learning::DdpgTrainer>(spec, lc, seed);
}

EvalSummary evaluate(const ExperimentConfig& cfg, const learning::PolicyModel& policy,
                     const learning::ControllerModel& controller, int episodes, EvalPolicy which,
                     const fs::path& trace_path) {
  const int n = episodes > 0 ? episodes : cfg.eval_episodes;
  auto env = envs::make_environment(cfg.env_config());
  const auto lc = cfg.learner_config();
  std::mt19937_64 rng(learning::derive_seed(cfg.eval_seed, kEvalRngStream, 0));
  EvalSummary sum;
  for (int k = 0; k < n; ++k) {
    const std::uint64_t seed = learning::derive_seed(cfg.eval_seed, kEvalStream, static_cast<std::uint64_t>(k));
    if (which == EvalPolicy::UniformRandom) {
      accumulate(sum, random_episode(*env, seed, rng));
      continue;
    }
    std::ofstream trace_file;
    std::unique_ptr<envs::TraceWriter> trace;
    if (!trace_path.empty() && k == n - 1) {
      trace_file.open(trace_path, std::ios::binary);
      if (!trace_file) throw IoError("cannot write " + trace_path.string());
      trace = std::make_unique<envs::TraceWriter>(trace_file);
    }
    const auto out = learning::run_episode(*env, seed, policy, controller, lc, learning::ActionSelection::Greedy,
                                           0.0, rng, trace.get());
    accumulate(sum, out.stats);
  }
  finish(sum);
  return sum;
}

std::map<std::string, double> summary_fields(const EvalSummary& s) {
  return {{"reward_per_step", s.reward_per_step},
          {"episode_return", s.episode_return},
          {"round1_bits_per_step", s.round1_bits_per_step},
          {"round2_bits_per_step", s.round2_bits_per_step},
          {"total_bits_per_step", s.total_bits_per_step},
          {"opening_rate", s.opening_rate},
          {"success_rate", s.success_rate},
          {"collisions", s.collisions}};
}

Aggregate aggregate(const std::vector<EvalSummary>& runs) {
  Aggregate out;
  out.runs = static_cast<int>(runs.size());
  if (runs.empty()) return out;
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : runs) {
    for (const auto& [k, v] : summary_fields(r)) values[k].push_back(v);
  }
  for (const auto& [k, vs] : values) {
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= vs.size();
    double sq = 0.0;
    for (double v : vs) sq += (v - mean) * (v - mean);
    const double sd = vs.size() > 1 ? std::sqrt(sq / (vs.size() - 1)) : 0.0;
    out.metrics[k] = {mean, sd};
  }
  return out;
}

RunResult run_training_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::string run = cfg.resolved_run_name();
  const fs::path dir = cfg.run_dir() / ("seed_" + std::to_string(seed));
  fs::create_directories(dir);

  auto env = envs::make_environment(cfg.env_config());
  auto trainer = make_trainer(cfg, env->spec(), seed);
  const auto kind = env->spec().kind;

  json manifest;
  manifest["format_version"] = 1;
  manifest["run"] = run;
  manifest["seed"] = seed;
  manifest["trainer"] = trainer->name();
  manifest["env"] = {{"name", env->spec().name},
                     {"n_agents", env->spec().n_agents},
                     {"episode_length", env->spec().episode_length},
                     {"obs_dim", env->spec().obs_dim},
                     {"action_dim", env->spec().action_dim}};
  manifest["config"] = config_json(cfg);
  json stores = json::array();
  for (const auto& [name, store] : trainer->stores()) stores.push_back(name);
  manifest["checkpoint_stores"] = stores;
  manifest["files"] = {{"metrics", "metrics.jsonl"}, {"checkpoint", "checkpoint.bin"}, {"eval", "eval.json"}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw IoError("cannot write " + (dir / "metrics.jsonl").string());

  const auto save = [&](const fs::path& path) {
    diff::NamedStores named;
    for (const auto& [name, store] : trainer->stores()) named.emplace_back(name, store);
    diff::save_checkpoint(path.string(), named);
  };

  for (int e = 0; e < cfg.train_episodes; ++e) {
    const auto stats = trainer->train_episode(*env, e, cfg.train_episodes);
    EvalSummary one;
    accumulate(one, stats);
    finish(one);
    metrics << metrics_record(run, seed, e, "train", kind, one, &trainer->last_update()).dump() << "\n";
    if (cfg.eval_interval > 0 && (e + 1) % cfg.eval_interval == 0) {
      const auto ev = evaluate(cfg, trainer->policy(), trainer->controller(), cfg.interval_eval_episodes);
      metrics << metrics_record(run, seed, e, "eval", kind, ev, nullptr).dump() << "\n";
    }
    if (cfg.checkpoint_interval > 0 && (e + 1) % cfg.checkpoint_interval == 0) {
      save(dir / ("checkpoint_ep" + std::to_string(e + 1) + ".bin"));
    }
  }
  metrics.flush();
  if (!metrics) throw IoError("write failed for " + (dir / "metrics.jsonl").string());

  RunResult result;
  result.seed = seed;
  result.dir = dir;
  result.checkpoint = dir / "checkpoint.bin";
  save(result.checkpoint);
  result.final_eval = evaluate(cfg, trainer->policy(), trainer->controller(), 0, EvalPolicy::Checkpoint,
                               cfg.trace ? dir / "trace.jsonl" : fs::path{});
  json ev;
  ev["run"] = run;
  ev["seed"] = seed;
  ev["episodes"] = result.final_eval.episodes;
  for (const auto& [k, v] : summary_fields(result.final_eval)) ev[k] = v;
  write_text(dir / "eval.json", ev.dump(2) + "\n");
  return result;
}

std::vector<RunResult> run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> out;
  for (std::uint64_t seed : cfg.seeds) out.push_back(run_training_seed(cfg, seed));
  return out;
}

Aggregate run_eval(const ExperimentConfig& cfg, const std::vector<fs::path>& checkpoints, int episodes,
                   EvalPolicy which) {
  cfg.validate();
  auto env = envs::make_environment(cfg.env_config());
  std::vector<EvalSummary> runs;
  if (which == EvalPolicy::UniformRandom) {
    neural::Rng unused(0);
    const auto& spec = env->spec();
    const auto policy = learning::PolicyModel::create({spec.obs_dim, spec.action_dim, spec.action_kind, cfg.width}, unused);
    const auto controller = learning::ControllerModel::create(cfg.width, unused);
    runs.push_back(evaluate(cfg, policy, controller, episodes, which));
    return aggregate(runs);
  }
  if (checkpoints.empty()) throw ConfigError("eval needs at least one checkpoint");
  for (const auto& path : checkpoints) {
    auto trainer = make_trainer(cfg, env->spec(), 0);
    diff::load_checkpoint(path.string(), trainer->stores());
    runs.push_back(evaluate(cfg, trainer->policy(), trainer->controller(), episodes, which));
  }
  return aggregate(runs);
}

std::vector<std::string> sweep_parameters() { return {"T", "L", "mode"}; }

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                            const std::vector<std::string>& values) {
  const auto names = sweep_parameters();
  if (std::find(names.begin(), names.end(), parameter) == names.end()) {
    throw ConfigError("unknown sweep parameter '" + parameter + "' (valid: T, L, mode)");
  }
  if (values.empty()) throw ConfigError("sweep over '" + parameter + "' needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    ExperimentConfig c = cfg;
    if (parameter == "T") apply_setting(c, "threshold", v);
    if (parameter == "L") apply_setting(c, "range", v);
    if (parameter == "mode") apply_setting(c, "mode", v);
    c.output_dir = cfg.run_dir().string();
    c.run_name = parameter + "_" + v;
    c.validate();
    configs.push_back(std::move(c));
  }
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::vector<EvalSummary> evals;
    for (const auto& r : run_training(configs[k])) evals.push_back(r.final_eval);
    rows.push_back({parameter, values[k], aggregate(evals)});
  }
  fs::create_directories(cfg.run_dir());
  write_text(cfg.run_dir() / "sweep.csv", sweep_table(rows));
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "parameter,value,runs";
  const auto keys = summary_fields(EvalSummary{});
  for (const auto& [k, v] : keys) out << "," << k << "_mean," << k << "_std";
  out << "\n";
  for (const auto& row : rows) {
    out << row.parameter << "," << row.value << "," << row.result.runs;
    for (const auto& [k, v] : keys) {
      const auto it = row.result.metrics.find(k);
      const auto ms = it == row.result.metrics.end() ? std::pair<double, double>{0.0, 0.0} : it->second;
      out << "," << ms.first << "," << ms.second;
    }
    out << "\n";
  }
  return out.str();
}

std::string inspect_topology(const ExperimentConfig& cfg, std::uint64_t seed, int step) {
  if (step < 0) throw ConfigError("inspect-topology: step must be non-negative");
  auto env = envs::make_environment(cfg.env_config());
  const auto& spec = env->spec();
  env->reset(seed);
  std::mt19937_64 rng(learning::derive_seed(seed, kInspectStream, 0));
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, spec.action_dim - 1);
  for (int t = 0; t < step; ++t) {
    if (env->step_count() >= spec.episode_length) {
      throw ConfigError("inspect-topology: step " + std::to_string(step) + " exceeds episode length " +
                        std::to_string(spec.episode_length));
    }
    Matrix a;
    if (spec.action_kind == neural::ActionKind::Discrete) {
      a.resize(spec.n_agents, 1);
      for (int i = 0; i < spec.n_agents; ++i) a(i, 0) = pick(rng);
    } else {
      a.resize(spec.n_agents, spec.action_dim);
      for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = box(rng);
    }
    env->step(a);
  }
  return comm::build_topology(env->positions(), cfg.range, env->active()).dump();
}

}  // namespace ac2c::harness
