#include "ac2c/envs.hpp"
#include "ac2c/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <ostream>

namespace ac2c::envs {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::TrafficJunction: return "traffic_junction";
    case EnvKind::CooperativeNavigation: return "cooperative_navigation";
    case EnvKind::PredatorPrey: return "predator_prey";
  }
  return "unknown";
}

EnvKind parse_env_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "traffic_junction" || t == "tj") return EnvKind::TrafficJunction;
  if (t == "cooperative_navigation" || t == "cn") return EnvKind::CooperativeNavigation;
  if (t == "predator_prey" || t == "pp") return EnvKind::PredatorPrey;
  throw ConfigError("unknown environment '" + std::string(text) +
                    "' (expected traffic_junction, cooperative_navigation or predator_prey)");
}

std::string to_string(Difficulty difficulty) {
  return difficulty == Difficulty::Medium ? "medium" : "hard";
}

Difficulty parse_difficulty(std::string_view text) {
  const std::string t = lower(text);
  if (t == "medium") return Difficulty::Medium;
  if (t == "hard") return Difficulty::Hard;
  throw ConfigError("unknown difficulty '" + std::string(text) + "' (expected medium or hard)");
}

Eigen::RowVectorXd Environment::observe(int agent) const {
  const Matrix all = observe();
  if (agent < 0 || agent >= all.rows()) {
    throw DomainError("observe: agent " + std::to_string(agent) + " out of range [0, " +
                      std::to_string(all.rows()) + ")");
  }
  return all.row(agent);
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  if (config.kind == EnvKind::TrafficJunction) {
    return std::make_unique<TrafficJunction>(config.junction);
  }
  return std::make_unique<ParticleWorld>(config.kind, config.particle);
}

bool success(const EpisodeRecord& record) {
  if (record.kind != EnvKind::TrafficJunction) {
    throw DomainError("success is only defined for traffic junction episodes, not " +
                      to_string(record.kind));
  }
  return std::all_of(record.collisions_per_step.begin(), record.collisions_per_step.end(),
                     [](int c) { return c == 0; });
}

void TraceWriter::write(int step, const std::vector<comm::Point>& positions, const Matrix& actions,
                        double reward, int collisions, std::span<const int> gates) {
  nlohmann::ordered_json line;
  line["step"] = step;
  auto pos = nlohmann::json::array();
  for (const auto& p : positions) pos.push_back({p.x, p.y});
  line["positions"] = pos;
  auto acts = nlohmann::json::array();
  for (Eigen::Index r = 0; r < actions.rows(); ++r) {
    std::vector<double> row(actions.row(r).begin(), actions.row(r).end());
    acts.push_back(row);
  }
  line["actions"] = acts;
  line["reward"] = reward;
  line["collisions"] = collisions;
  line["gates"] = std::vector<int>(gates.begin(), gates.end());
  out_ << line.dump() << '\n';
}

}  // namespace ac2c::envs
