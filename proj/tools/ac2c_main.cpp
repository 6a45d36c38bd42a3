// Command-line front end: train, eval, sweep, plotdata, inspect-topology.

#include "ac2c/error.hpp"
#include "ac2c/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>

using namespace ac2c;
using namespace ac2c::harness;
using json = nlohmann::ordered_json;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << "ERROR " << kind << ": " << one_line(message) << "\n";
  return kind == "usage" ? 64 : 2;
}

// Config file first, then every --<key> flag given on the command line.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "key = value config file");
    for (const auto& key : config_keys()) cmd->add_option("--" + key, overrides[key], "config key " + key);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = file.empty() ? ExperimentConfig{} : load_config(file);
    for (const auto& [key, value] : overrides) {
      if (!value.empty()) apply_setting(cfg, key, value);
    }
    for (const auto& w : cfg.warnings()) std::cerr << "WARNING config: " << w << "\n";
    cfg.validate();
    return cfg;
  }
};

json aggregate_json(const Aggregate& agg) {
  json out;
  out["runs"] = agg.runs;
  for (const auto& [k, ms] : agg.metrics) out[k] = {{"mean", ms.first}, {"std", ms.second}};
  return out;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(' ');
    const auto b = item.find_last_not_of(' ');
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ac2c: gated two-hop communication for multi-agent reinforcement learning"};
  app.require_subcommand(1);

  ConfigOptions train_opts, eval_opts, sweep_opts, topo_opts;

  auto* train = app.add_subcommand("train", "train every seed of a run and write metrics, manifest and checkpoints");
  train_opts.attach(train);

  auto* eval = app.add_subcommand("eval", "greedy evaluation of checkpoints (mean and std across checkpoints)");
  eval_opts.attach(eval);
  std::vector<std::string> checkpoints;
  int episodes = 0;
  bool random_policy = false;
  eval->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
  eval->add_option("--episodes", episodes, "evaluation episodes (default: eval_episodes)");
  eval->add_flag("--random-policy", random_policy, "uniform random actions instead of a checkpoint");

  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate one run-set per parameter value");
  sweep_opts.attach(sweep_cmd);
  std::string parameter, values;
  sweep_cmd->add_option("--param", parameter, "T, L or mode")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();

  auto* plot = app.add_subcommand("plotdata", "long-format CSV with per-episode mean and std across seeds");
  std::vector<std::string> metrics_files;
  std::string plot_out;
  plot->add_option("files", metrics_files, "metrics.jsonl files")->required();
  plot->add_option("-o,--out", plot_out, "output CSV (default: stdout)");

  auto* topo = app.add_subcommand("inspect-topology", "print one-hop and two-hop neighbor sets");
  topo_opts.attach(topo);
  std::uint64_t topo_seed = 0;
  int topo_step = 0;
  topo->add_option("--seed", topo_seed, "episode seed");
  topo->add_option("--step", topo_step, "random-action steps before the dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*train) {
      const auto cfg = train_opts.resolve();
      for (const auto& r : run_training(cfg)) {
        json line;
        line["seed"] = r.seed;
        line["dir"] = r.dir.string();
        line["checkpoint"] = r.checkpoint.string();
        for (const auto& [k, v] : summary_fields(r.final_eval)) line[k] = v;
        std::cout << line.dump() << "\n";
      }
    } else if (*eval) {
      const auto cfg = eval_opts.resolve();
      std::vector<fs::path> paths(checkpoints.begin(), checkpoints.end());
      const auto agg = run_eval(cfg, paths, episodes,
                                random_policy ? EvalPolicy::UniformRandom : EvalPolicy::Checkpoint);
      std::cout << aggregate_json(agg).dump(2) << "\n";
    } else if (*sweep_cmd) {
      const auto cfg = sweep_opts.resolve();
      std::cout << sweep_table(sweep(cfg, parameter, split_values(values)));
    } else if (*plot) {
      std::vector<fs::path> paths(metrics_files.begin(), metrics_files.end());
      const std::string table = emit_plotdata(paths);
      if (plot_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream out(plot_out, std::ios::binary);
        if (!out) throw IoError("cannot write " + plot_out);
        out << table;
      }
    } else if (*topo) {
      std::cout << inspect_topology(topo_opts.resolve(), topo_seed, topo_step);
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
