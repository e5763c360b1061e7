#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "mbt/errors.hpp"
#include "mbt/io.hpp"
#include "mbt/metrics.hpp"
#include "mbt/sim.hpp"
#include "mbt/tree.hpp"

namespace py = pybind11;
using namespace mbt;

namespace {

ScenarioSpec scenario(const std::string& name, std::size_t n, std::uint64_t seed,
                      std::optional<double> noise_scale) {
  ScenarioSpec s;
  s.name = name;
  s.n = n;
  s.seed = seed;
  s.noise_scale = noise_scale;
  return s;
}

Dataset training_data(const std::string& csv, const std::string& target) {
  return parse_csv(csv, infer_schema(csv, {target}), target);
}

Dataset scoring_data(const MbtTree& tree, const std::string& csv) {
  return parse_csv(csv, tree_schema(tree), "", CsvOptions{true});
}

std::vector<StudySetting> settings_from_json(const std::string& text) {
  std::vector<StudySetting> out;
  for (const Json& j : Json::parse(text)) {
    StudySetting s;
    s.label = j.at("label").get<std::string>();
    s.config = config_from_json(j.value("config", Json::object()));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Model-based tree surrogates";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)config_error;
  (void)data_error;

  m.def("scenario_names", &scenario_names);

  m.def(
      "generate",
      [](const std::string& name, std::size_t n, std::uint64_t seed,
         std::optional<double> noise_scale) {
        const ScenarioData sd = gen_scenario(scenario(name, n, seed, noise_scale));
        return py::make_tuple(to_csv(sd.data, "y"), sd.f, sd.formula.str());
      },
      py::arg("name"), py::arg("n"), py::arg("seed") = 0, py::arg("noise_scale") = py::none());

  m.def(
      "fit",
      [](const std::string& csv, const std::string& target, const std::string& config) {
        const Dataset ds = training_data(csv, target);
        const MbtConfig cfg = config_from_json(Json::parse(config));
        py::gil_scoped_release release;
        return tree_to_json(grow(ds, cfg)).dump();
      },
      py::arg("csv"), py::arg("target"), py::arg("config") = "{}");

  m.def(
      "predict",
      [](const std::string& tree_json, const std::string& csv) {
        const MbtTree tree = tree_from_json(Json::parse(tree_json));
        const Eigen::VectorXd p = predict_tree(tree, scoring_data(tree, csv));
        return std::vector<double>(p.data(), p.data() + p.size());
      },
      py::arg("tree"), py::arg("csv"));

  m.def(
      "leaves",
      [](const std::string& tree_json, const std::string& csv) {
        const MbtTree tree = tree_from_json(Json::parse(tree_json));
        return route(tree, scoring_data(tree, csv)).leaf;
      },
      py::arg("tree"), py::arg("csv"));

  m.def(
      "render",
      [](const std::string& tree_json, int top) {
        return render_tree(tree_from_json(Json::parse(tree_json)), top);
      },
      py::arg("tree"), py::arg("top") = 3);

  m.def(
      "fidelity",
      [](const std::vector<double>& ref, const std::vector<double>& sur) {
        const FidelityReport r = fidelity(ref, sur);
        py::dict d;
        d["r2"] = r.r2 ? py::cast(*r.r2) : py::none();
        d["mse"] = r.mse;
        d["mae"] = r.mae;
        d["max_ae"] = r.max_ae;
        d["n"] = r.n;
        return d;
      },
      py::arg("reference"), py::arg("surrogate"));

  m.def(
      "rand_index",
      [](const std::vector<int>& a, const std::vector<int>& b) { return rand_index(a, b).ri; },
      py::arg("a"), py::arg("b"));

  m.def(
      "fidelity_study",
      [](const std::string& name, std::size_t n, std::optional<double> noise_scale,
         const std::string& source, const std::string& settings, int runs, std::uint64_t seed,
         int jobs) {
        FidelityStudyConfig c;
        c.scenario = scenario(name, n, 0, noise_scale);
        c.source = parse_source(source);
        c.settings = settings_from_json(settings);
        c.runs = runs;
        c.seed = seed;
        c.jobs = jobs;
        const Json cj = fidelity_config_to_json(c);
        py::gil_scoped_release release;
        const FidelityStudy study = run_fidelity_study(c);
        return fidelity_summary_json(study, cj).dump();
      },
      py::arg("scenario"), py::arg("n"), py::arg("noise_scale"), py::arg("source"),
      py::arg("settings"), py::arg("runs"), py::arg("seed"), py::arg("jobs"));

  m.def(
      "bias_study",
      [](const std::string& name, std::size_t n, const std::string& settings, int runs,
         std::uint64_t seed, int jobs) {
        BiasStudyConfig c;
        c.scenario = scenario(name, n, 0, std::nullopt);
        c.settings = settings_from_json(settings);
        c.runs = runs;
        c.seed = seed;
        c.jobs = jobs;
        const Json cj = bias_config_to_json(c);
        py::gil_scoped_release release;
        const BiasReport report = run_bias_study(c);
        return bias_summary_json(report, cj).dump();
      },
      py::arg("scenario"), py::arg("n"), py::arg("settings"), py::arg("runs"), py::arg("seed"),
      py::arg("jobs"));
}
