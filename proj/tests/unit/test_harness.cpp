#include <doctest.h>

#include "ac2c/error.hpp"
#include "ac2c/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace ac2c;
using namespace ac2c::harness;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ac2c_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.width = 8;
  c.episode_length = 5;
  c.train_episodes = 4;
  c.batch_size = 4;
  c.updates_per_episode = 1;
  c.eval_episodes = 2;
  c.eval_interval = 2;
  c.interval_eval_episodes = 1;
  c.seeds = {5};
  c.output_dir = out.string();
  return c;
}

// Random config over every field type.
ExperimentConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> small(1, 50);
  ExperimentConfig c;
  c.env = std::array{envs::EnvKind::TrafficJunction, envs::EnvKind::CooperativeNavigation,
                     envs::EnvKind::PredatorPrey}[rng() % 3];
  c.difficulty = rng() % 2 ? envs::Difficulty::Hard : envs::Difficulty::Medium;
  c.n_agents = small(rng);
  c.n_targets = small(rng);
  c.episode_length = small(rng);
  c.layout_seed = rng();
  c.mode = std::array{ProtocolMode::AC2C, ProtocolMode::AC2C_NO_CONTROLLER, ProtocolMode::GNN_TWO_ROUND,
                      ProtocolMode::ONE_ROUND}[rng() % 4];
  c.range = unit(rng) * 3;
  if (rng() % 2) c.threshold = unit(rng);
  c.bits_per_message = small(rng) * 1000;
  c.width = small(rng);
  c.actor_lr = unit(rng) * 1e-3;
  c.critic_lr = unit(rng) / 3.0;
  c.controller_lr = 1.0 / (1.0 + small(rng));
  c.clip_norm = unit(rng);
  c.gamma = unit(rng);
  c.tau = unit(rng);
  c.hard_update_period = small(rng);
  c.replay_capacity = static_cast<std::size_t>(small(rng)) * 1000;
  c.batch_size = small(rng);
  c.updates_per_episode = small(rng) - 25;
  c.noise_start = unit(rng);
  c.noise_end = unit(rng) * 1e-7;
  c.reinforce_episodes = small(rng) + 1;
  c.train_episodes = small(rng);
  c.eval_episodes = small(rng);
  c.eval_interval = small(rng);
  c.interval_eval_episodes = small(rng);
  c.checkpoint_interval = small(rng);
  c.eval_seed = rng();
  c.seeds.clear();
  for (int k = 0; k < small(rng) % 5 + 1; ++k) c.seeds.push_back(rng() % 100000);
  c.run_name = "run" + std::to_string(small(rng));
  c.output_dir = "/tmp/out" + std::to_string(small(rng));
  c.trace = rng() % 2;
  return c;
}

std::string write_metrics(const fs::path& dir, const std::string& name, const std::vector<std::string>& lines) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
  return p.string();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

// ---- configuration ---------------------------------------------------------

TEST_CASE("defaults follow the published hyperparameter tables") {
  const ExperimentConfig c;
  CHECK(c.actor_lr == 1e-4);
  CHECK(c.critic_lr == 1e-4);
  CHECK(c.clip_norm == 0.1);
  CHECK(c.gamma == 0.99);
  CHECK(c.hard_update_period == 200);
  CHECK(c.tau == 0.01);
  CHECK(c.width == 128);
  CHECK(c.resolved_episode_length() == 50);
  ExperimentConfig tj;
  tj.env = envs::EnvKind::TrafficJunction;
  CHECK(tj.resolved_episode_length() == 60);
  tj.difficulty = envs::Difficulty::Hard;
  CHECK(tj.resolved_episode_length() == 80);
  CHECK(tj.resolved_threshold() == 0.15);
  CHECK(c.resolved_threshold() == 0.5);
  CHECK(tj.env_config().junction.max_agents == 20);
}

TEST_CASE("config round-trips through its text form") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    const ExperimentConfig c = random_config(rng);
    const std::string text = serialize_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.actor_lr == c.actor_lr);
    CHECK(back.threshold == c.threshold);
    CHECK(back.seeds == c.seeds);
  }
}

TEST_CASE("config parsing handles comments and reports bad keys and values") {
  const auto c = parse_config("# comment\nenv = tj  # inline\n\nmode=one_round\nseeds = 4, 5\n");
  CHECK(c.env == envs::EnvKind::TrafficJunction);
  CHECK(c.mode == ProtocolMode::ONE_ROUND);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  try {
    parse_config("bogus_key = 3\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("gamma = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("gamma\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("batch_size = 3.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ac2c.cfg"), IoError);
}

TEST_CASE("threshold outside the per-domain range warns but validates") {
  ExperimentConfig c;
  c.threshold = 0.3;
  CHECK(c.warnings().empty());
  c.threshold = 0.8;
  CHECK(c.warnings().size() == 1);
  CHECK_NOTHROW(c.validate());
  c.env = envs::EnvKind::TrafficJunction;
  c.threshold = 0.3;
  CHECK(c.warnings().size() == 1);
  c.threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.mode = ProtocolMode::ONE_ROUND;
  CHECK(c.warnings().empty());
}

TEST_CASE("output root comes from the environment when no directory is set") {
  ExperimentConfig c;
  c.run_name = "r";
  ::setenv(kOutputRootEnv, "/tmp/ac2c_root", 1);
  CHECK(c.run_dir() == fs::path("/tmp/ac2c_root/r"));
  c.output_dir = "/tmp/explicit";
  CHECK(c.run_dir() == fs::path("/tmp/explicit/r"));
  ::unsetenv(kOutputRootEnv);
  c.output_dir.clear();
  CHECK(c.run_dir() == fs::path("runs/r"));
}

// ---- runs ------------------------------------------------------------------

TEST_CASE("trainer selection follows the environment") {
  ExperimentConfig c;
  c.width = 8;
  for (auto kind : {envs::EnvKind::CooperativeNavigation, envs::EnvKind::PredatorPrey}) {
    c.env = kind;
    auto env = envs::make_environment(c.env_config());
    CHECK(make_trainer(c, env->spec(), 1)->name() == "ddpg");
  }
  c.env = envs::EnvKind::TrafficJunction;
  auto env = envs::make_environment(c.env_config());
  CHECK(make_trainer(c, env->spec(), 1)->name() == "reinforce");
}

TEST_CASE("identical config and seed give byte-identical metrics and manifests") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  auto ca = tiny(a);
  auto cb = tiny(b);
  ca.run_name = cb.run_name = "same";
  cb.output_dir = ca.output_dir;
  run_training(ca);
  const std::string metrics_a = slurp(a / "same/seed_5/metrics.jsonl");
  const std::string manifest_a = slurp(a / "same/seed_5/manifest.json");
  const std::string ckpt_a = slurp(a / "same/seed_5/checkpoint.bin");
  run_training(cb);
  CHECK(slurp(a / "same/seed_5/metrics.jsonl") == metrics_a);
  CHECK(slurp(a / "same/seed_5/manifest.json") == manifest_a);
  CHECK(slurp(a / "same/seed_5/checkpoint.bin") == ckpt_a);
  // 4 train records and 2 interval evaluations.
  CHECK(std::count(metrics_a.begin(), metrics_a.end(), '\n') == 6);
}

TEST_CASE("traffic junction training writes success fields") {
  const fs::path out = scratch("tj");
  auto c = tiny(out);
  c.env = envs::EnvKind::TrafficJunction;
  c.reinforce_episodes = 2;
  const auto runs = run_training(c);
  REQUIRE(runs.size() == 1);
  const std::string metrics = slurp(runs[0].dir / "metrics.jsonl");
  CHECK(metrics.find("\"success\":null") == std::string::npos);
  CHECK(runs[0].final_eval.success_rate >= 0.0);
  CHECK(runs[0].final_eval.success_rate <= 1.0);
}

TEST_CASE("evaluation reloads checkpoints and rejects mismatched configs") {
  const fs::path out = scratch("eval");
  auto c = tiny(out);
  c.seeds = {1, 2};
  const auto runs = run_training(c);
  const auto agg = run_eval(c, {runs[0].checkpoint, runs[1].checkpoint});
  CHECK(agg.runs == 2);
  const double m = (runs[0].final_eval.reward_per_step + runs[1].final_eval.reward_per_step) / 2;
  CHECK(agg.metrics.at("reward_per_step").first == doctest::Approx(m).epsilon(1e-12));
  const double sd = std::abs(runs[0].final_eval.reward_per_step - runs[1].final_eval.reward_per_step) / std::sqrt(2.0);
  CHECK(agg.metrics.at("reward_per_step").second == doctest::Approx(sd).epsilon(1e-9));

  auto wrong = c;
  wrong.width = 16;
  CHECK_THROWS_AS(run_eval(wrong, {runs[0].checkpoint}), Error);
  CHECK_THROWS_AS(run_eval(c, {out / "missing.bin"}), Error);
}

TEST_CASE("random-policy baseline is reproducible") {
  auto c = tiny(scratch("random"));
  c.eval_episodes = 5;
  const auto a = run_eval(c, {}, 0, EvalPolicy::UniformRandom);
  const auto b = run_eval(c, {}, 0, EvalPolicy::UniformRandom);
  CHECK(a.metrics.at("reward_per_step").first == b.metrics.at("reward_per_step").first);
  CHECK(a.metrics.at("total_bits_per_step").first == 0.0);
}

TEST_CASE("opening rate is exactly 0 for one round and 1 without a controller") {
  auto c = tiny(scratch("opening"));
  auto env = envs::make_environment(c.env_config());
  auto trainer = make_trainer(c, env->spec(), 3);
  c.mode = ProtocolMode::ONE_ROUND;
  const auto one = evaluate(c, trainer->policy(), trainer->controller(), 3);
  CHECK(one.opening_rate == 0.0);
  CHECK(one.round2_bits_per_step == 0.0);
  c.mode = ProtocolMode::AC2C_NO_CONTROLLER;
  const auto all = evaluate(c, trainer->policy(), trainer->controller(), 3);
  CHECK(all.opening_rate == 1.0);
}

TEST_CASE("reported overhead per step is the ledger total over the episode length") {
  auto c = tiny(scratch("overhead"));
  c.mode = ProtocolMode::AC2C_NO_CONTROLLER;
  auto env = envs::make_environment(c.env_config());
  auto trainer = make_trainer(c, env->spec(), 4);
  const auto summary = evaluate(c, trainer->policy(), trainer->controller(), 1);
  std::mt19937_64 rng(0);
  const auto seed = learning::derive_seed(c.eval_seed, 5, 0);
  const auto out = learning::run_episode(*env, seed, trainer->policy(), trainer->controller(), c.learner_config(),
                                         learning::ActionSelection::Greedy, 0.0, rng);
  comm::CostLedger ledger(c.bits_per_message);
  for (const auto& t : out.transitions) {
    const auto topo = comm::build_topology(t.positions, c.range);
    std::vector<int> open(static_cast<std::size_t>(topo.n_agents()), 1);
    ledger.record(topo, open, c.mode);
  }
  CHECK(summary.round1_bits_per_step == static_cast<double>(ledger.total_round1_bits()) / 5.0);
  CHECK(summary.round2_bits_per_step == static_cast<double>(ledger.total_round2_bits()) / 5.0);
}

// ---- sweep -----------------------------------------------------------------

TEST_CASE("sweep validates its parameter and value list") {
  auto c = tiny(scratch("sweep_err"));
  try {
    sweep(c, "gamma", {"0.9"});
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("T, L, mode") != std::string::npos);
  }
  CHECK_THROWS_AS(sweep(c, "T", {}), ConfigError);
}

TEST_CASE("threshold sweep emits one row per value") {
  const fs::path out = scratch("sweep");
  auto c = tiny(out);
  c.train_episodes = 1;
  c.eval_interval = 0;
  const std::vector<std::string> values{"0.1", "0.2", "0.3", "0.4", "0.5", "0.6"};
  const auto rows = sweep(c, "T", values);
  CHECK(rows.size() == 6);
  const auto table = parse_csv(slurp(c.run_dir() / "sweep.csv"));
  CHECK(table.size() == 7);
  CHECK(table[3][1] == "0.3");
  CHECK(fs::exists(c.run_dir() / "T_0.6/seed_5/metrics.jsonl"));
}

// ---- plot data -------------------------------------------------------------

TEST_CASE("plotdata with one seed has zero std") {
  const fs::path dir = scratch("plot1");
  const auto f = write_metrics(dir, "m.jsonl",
                               {R"({"run":"r","seed":1,"episode":0,"phase":"train","reward":0.5})",
                                R"({"run":"r","seed":1,"episode":1,"phase":"train","reward":0.7})"});
  const auto rows = parse_csv(emit_plotdata({f}));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "run");
  for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k][6] == "0");
}

TEST_CASE("plotdata std across five seeds matches a hand computation") {
  const fs::path dir = scratch("plot5");
  std::vector<fs::path> files;
  const double values[] = {1.0, 2.0, 4.0, 7.0, 11.0};
  for (int s = 0; s < 5; ++s) {
    std::ostringstream line;
    line << R"({"run":"r","seed":)" << s << R"(,"episode":3,"phase":"eval","reward":)" << values[s] << "}";
    files.push_back(write_metrics(dir, "m" + std::to_string(s) + ".jsonl", {line.str()}));
  }
  const std::string text = emit_plotdata(files);
  const auto rows = parse_csv(text);
  REQUIRE(rows.size() == 6);
  // mean 5, squared deviations 16 + 9 + 1 + 4 + 36 = 66, sample variance 16.5
  const double sd = std::sqrt(16.5);
  CHECK(std::stod(rows[2][5]) == 5.0);
  CHECK(std::stod(rows[2][6]) == doctest::Approx(sd).epsilon(1e-15));
  CHECK(std::stod(rows[2][7]) == doctest::Approx(5.0 - sd).epsilon(1e-15));
  CHECK(std::stod(rows[2][8]) == doctest::Approx(5.0 + sd).epsilon(1e-15));
  CHECK(rows[2][3] == "eval.reward");
  CHECK(emit_plotdata(files) == text);
}

TEST_CASE("plotdata names the file with an inconsistent schema") {
  const fs::path dir = scratch("plotbad");
  const auto good = write_metrics(dir, "good.jsonl", {R"({"run":"r","seed":1,"episode":0,"phase":"train","a":1})"});
  const auto bad = write_metrics(dir, "bad.jsonl", {R"({"run":"r","seed":2,"episode":0,"phase":"train","b":1})"});
  try {
    emit_plotdata({good, bad});
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.jsonl") != std::string::npos);
  }
  CHECK_THROWS_AS(emit_plotdata({}), ConfigError);
}

TEST_CASE("plotdata reads training output") {
  const fs::path out = scratch("plotrun");
  auto c = tiny(out);
  c.seeds = {1, 2};
  const auto runs = run_training(c);
  const auto text = emit_plotdata({runs[0].dir / "metrics.jsonl", runs[1].dir / "metrics.jsonl"});
  CHECK(text.find("train.reward_per_step") != std::string::npos);
  CHECK(text.find("eval.opening_rate") != std::string::npos);
}

// ---- topology --------------------------------------------------------------

TEST_CASE("topology inspection prints one line per agent") {
  ExperimentConfig c;
  c.n_agents = 4;
  const std::string dump = inspect_topology(c, 3, 2);
  std::stringstream ss(dump);
  std::string line;
  int count = 0;
  while (std::getline(ss, line)) {
    CHECK(line.rfind("agent " + std::to_string(count) + " | one_hop:", 0) == 0);
    CHECK(line.find(" | two_hop:") != std::string::npos);
    ++count;
  }
  CHECK(count == 4);
  CHECK(inspect_topology(c, 3, 2) == dump);
  CHECK_THROWS_AS(inspect_topology(c, 3, 500), ConfigError);
}
