#pragma once

// Experiment orchestration: key=value configuration, seeded training and
// evaluation runs, sweeps, and plot-data tables.

#include "ac2c/learning.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ac2c::harness {

namespace fs = std::filesystem;
using diff::Matrix;

inline constexpr const char* kOutputRootEnv = "AC2C_OUTPUT_ROOT";

struct ExperimentConfig {
  envs::EnvKind env = envs::EnvKind::CooperativeNavigation;
  envs::Difficulty difficulty = envs::Difficulty::Medium;
  int n_agents = 3;
  int n_targets = 3;
  int episode_length = 0;  // 0: 50 for CN/PP, 60/80 for TJ medium/hard
  std::uint64_t layout_seed = 0;

  ProtocolMode mode = ProtocolMode::AC2C;
  double range = 1.0;
  std::optional<double> threshold;  // unset: 0.5 for CN/PP, 0.15 for TJ
  std::int64_t bits_per_message = 4096;
  int width = neural::kDefaultWidth;

  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double controller_lr = 1e-4;
  double clip_norm = 0.1;
  double gamma = 0.99;
  double tau = 0.01;
  int hard_update_period = 200;
  std::size_t replay_capacity = 1'000'000;
  int batch_size = 128;
  int updates_per_episode = 0;
  double noise_start = 0.1;
  double noise_end = 0.01;
  int reinforce_episodes = 4;

  int train_episodes = 2000;
  int eval_episodes = 200;
  int eval_interval = 100;           // episodes between in-training greedy evaluations
  int interval_eval_episodes = 10;   // episodes per in-training evaluation
  int checkpoint_interval = 0;       // 0: final checkpoint only
  std::uint64_t eval_seed = 1000003;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string run_name;              // empty: <env>_<mode>
  std::string output_dir;            // empty: $AC2C_OUTPUT_ROOT, else "runs"
  bool trace = false;                // write trace.jsonl for the final evaluation episode

  double resolved_threshold() const;
  int resolved_episode_length() const;
  std::string resolved_run_name() const;
  fs::path run_dir() const;
  envs::EnvConfig env_config() const;
  learning::LearnerConfig learner_config() const;
  // Non-fatal remarks (threshold outside the per-domain range).
  std::vector<std::string> warnings() const;
  // ConfigError on invalid values.
  void validate() const;
};

// Applies one key=value setting; ConfigError naming the key on unknown keys or
// unparsable values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Lines are `key = value`; `#` starts a comment; blank lines are ignored.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const fs::path& path, ExperimentConfig base = {});
// Every key, one per line, in a fixed order; parse_config round-trips it.
std::string serialize_config(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

// ---- metrics ---------------------------------------------------------------

struct EvalSummary {
  int episodes = 0;
  double reward_per_step = 0.0;  // mean per agent per step
  double episode_return = 0.0;
  double round1_bits_per_step = 0.0;
  double round2_bits_per_step = 0.0;
  double total_bits_per_step = 0.0;
  double opening_rate = 0.0;
  double success_rate = 0.0;  // traffic junction only, else 0
  double collisions = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  fs::path dir;
  fs::path checkpoint;
  EvalSummary final_eval;
};

std::unique_ptr<learning::Trainer> make_trainer(const ExperimentConfig& cfg, const envs::EnvSpec& spec,
                                                std::uint64_t seed);

// Trains one seed into <run_dir>/seed_<seed>: metrics.jsonl, manifest.json,
// checkpoint files, then a final greedy evaluation (eval.json).
RunResult run_training_seed(const ExperimentConfig& cfg, std::uint64_t seed);
std::vector<RunResult> run_training(const ExperimentConfig& cfg);

enum class EvalPolicy { Checkpoint, UniformRandom };

// Greedy evaluation of one parameter set over cfg.eval_episodes (or
// `episodes` when positive). UniformRandom ignores the models and draws
// actions uniformly (continuous box or discrete set).
EvalSummary evaluate(const ExperimentConfig& cfg, const learning::PolicyModel& policy,
                     const learning::ControllerModel& controller, int episodes = 0,
                     EvalPolicy which = EvalPolicy::Checkpoint, const fs::path& trace_path = {});

struct Aggregate {
  std::map<std::string, std::pair<double, double>> metrics;  // name -> (mean, sample std)
  int runs = 0;
};

// Loads each checkpoint into freshly built models and evaluates it; the mean
// and sample std are taken across checkpoints (seeds).
Aggregate run_eval(const ExperimentConfig& cfg, const std::vector<fs::path>& checkpoints, int episodes = 0,
                   EvalPolicy which = EvalPolicy::Checkpoint);
std::map<std::string, double> summary_fields(const EvalSummary& s);
Aggregate aggregate(const std::vector<EvalSummary>& runs);

// ---- sweep -----------------------------------------------------------------

std::vector<std::string> sweep_parameters();  // {"T", "L", "mode"}

struct SweepRow {
  std::string parameter;
  std::string value;
  Aggregate result;
};

// One training run-set per value followed by evaluation. Writes sweep.csv in
// the run directory.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                            const std::vector<std::string>& values);
std::string sweep_table(const std::vector<SweepRow>& rows);

// ---- plot data -------------------------------------------------------------

// Long table: run, seed, episode, metric, value, mean, std, lower, upper with
// mean/std taken across the seeds of a run for each (episode, metric).
std::string emit_plotdata(const std::vector<fs::path>& metrics_files);

// ---- topology inspection ---------------------------------------------------

// Resets the environment with `seed`, advances `step` steps under uniform
// random actions, and dumps the topology at that point.
std::string inspect_topology(const ExperimentConfig& cfg, std::uint64_t seed, int step = 0);

}  // namespace ac2c::harness
