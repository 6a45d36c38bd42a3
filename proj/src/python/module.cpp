// Python bindings: configuration, topology and cost queries, environments,
// and the training/evaluation entry points of the harness.

#include "ac2c/error.hpp"
#include "ac2c/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ac2c;
using harness::ExperimentConfig;

namespace {

ExperimentConfig config_from(const py::dict& settings) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : settings) {
    const auto k = py::str(key).cast<std::string>();
    std::string v;
    if (py::isinstance<py::bool_>(value)) {
      v = value.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      for (const auto& item : value) v += (v.empty() ? "" : ",") + py::str(item).cast<std::string>();
    } else {
      v = py::str(value).cast<std::string>();
    }
    harness::apply_setting(cfg, k, v);
  }
  return cfg;
}

std::vector<comm::Point> points_from(const diff::Matrix& xy) {
  if (xy.cols() != 2) throw ShapeError("positions must be an N x 2 array");
  std::vector<comm::Point> out;
  for (Eigen::Index i = 0; i < xy.rows(); ++i) out.push_back({xy(i, 0), xy(i, 1)});
  return out;
}

py::dict summary_dict(const harness::EvalSummary& s) {
  py::dict out;
  for (const auto& [k, v] : harness::summary_fields(s)) out[py::str(k)] = v;
  return out;
}

py::dict aggregate_dict(const harness::Aggregate& agg) {
  py::dict out;
  out["runs"] = agg.runs;
  for (const auto& [k, ms] : agg.metrics) out[py::str(k)] = py::make_tuple(ms.first, ms.second);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gated two-hop communication for multi-agent reinforcement learning";

  // Translators are tried newest first, so the subclasses win over the base.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init([](const py::kwargs& kw) { return config_from(kw); }))
      .def_static("parse", [](const std::string& text) { return harness::parse_config(text); })
      .def_static("load", [](const std::string& path) { return harness::load_config(path); })
      .def("set", [](ExperimentConfig& c, const std::string& k, const std::string& v) { harness::apply_setting(c, k, v); })
      .def("to_text", [](const ExperimentConfig& c) { return harness::serialize_config(c); })
      .def("validate", &ExperimentConfig::validate)
      .def("warnings", &ExperimentConfig::warnings)
      .def_property_readonly("threshold", &ExperimentConfig::resolved_threshold)
      .def_property_readonly("episode_length", &ExperimentConfig::resolved_episode_length)
      .def_property_readonly("run_dir", &ExperimentConfig::run_dir)
      .def("__repr__", [](const ExperimentConfig& c) { return "Config(" + c.resolved_run_name() + ")"; });
  m.def("config_keys", &harness::config_keys);

  py::class_<comm::Topology>(m, "Topology")
      .def_property_readonly("n_agents", &comm::Topology::n_agents)
      .def_property_readonly("range", &comm::Topology::range)
      .def("one_hop", &comm::Topology::one_hop)
      .def("two_hop", &comm::Topology::two_hop)
      .def("relays", &comm::Topology::relays)
      .def("dump", &comm::Topology::dump);

  m.def(
      "build_topology",
      [](const diff::Matrix& positions, double range, std::vector<bool> active) {
        const auto pts = points_from(positions);
        return comm::build_topology(pts, range, active);
      },
      py::arg("positions"), py::arg("range"), py::arg("active") = std::vector<bool>{});
  m.def("cost_round1", &comm::cost_round1, py::arg("topology"), py::arg("bits_per_message") = 4096);
  m.def(
      "cost_round2",
      [](const comm::Topology& t, const std::vector<int>& gates, const std::string& mode, std::int64_t w) {
        return comm::cost_round2(t, gates, parse_protocol_mode(mode), w);
      },
      py::arg("topology"), py::arg("gates"), py::arg("mode") = "ac2c", py::arg("bits_per_message") = 4096);

  py::class_<envs::Environment>(m, "Environment")
      .def_property_readonly("name", [](const envs::Environment& e) { return e.spec().name; })
      .def_property_readonly("n_agents", [](const envs::Environment& e) { return e.spec().n_agents; })
      .def_property_readonly("obs_dim", [](const envs::Environment& e) { return e.spec().obs_dim; })
      .def_property_readonly("episode_length", [](const envs::Environment& e) { return e.spec().episode_length; })
      .def("reset", &envs::Environment::reset, py::arg("seed"))
      .def("step",
           [](envs::Environment& e, const diff::Matrix& actions) {
             const auto r = e.step(actions);
             py::dict out;
             out["observations"] = r.observations;
             out["reward"] = r.reward;
             out["agent_rewards"] = r.agent_rewards;
             out["collisions"] = r.collisions;
             out["done"] = r.done;
             return out;
           })
      .def("positions",
           [](const envs::Environment& e) {
             const auto pts = e.positions();
             diff::Matrix out(static_cast<Eigen::Index>(pts.size()), 2);
             for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) << pts[i].x, pts[i].y;
             return out;
           })
      .def("active", &envs::Environment::active);
  m.def("make_environment", [](const ExperimentConfig& c) { return envs::make_environment(c.env_config()); });

  m.def("train", [](const ExperimentConfig& c) {
    c.validate();
    py::list out;
    for (const auto& r : harness::run_training(c)) {
      py::dict d = summary_dict(r.final_eval);
      d["seed"] = r.seed;
      d["dir"] = r.dir.string();
      d["checkpoint"] = r.checkpoint.string();
      out.append(d);
    }
    return out;
  });
  m.def(
      "evaluate",
      [](const ExperimentConfig& c, const std::vector<std::filesystem::path>& checkpoints, int episodes,
         bool random_policy) {
        return aggregate_dict(harness::run_eval(
            c, checkpoints, episodes, random_policy ? harness::EvalPolicy::UniformRandom : harness::EvalPolicy::Checkpoint));
      },
      py::arg("config"), py::arg("checkpoints") = std::vector<std::filesystem::path>{}, py::arg("episodes") = 0,
      py::arg("random_policy") = false);
  m.def("plotdata", &harness::emit_plotdata, py::arg("metrics_files"));
  m.def("inspect_topology", &harness::inspect_topology, py::arg("config"), py::arg("seed") = 0, py::arg("step") = 0);
}
