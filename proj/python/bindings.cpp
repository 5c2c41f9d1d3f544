#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cropemu/cropsim/simulator.hpp"
#include "cropemu/discovery/ranking.hpp"
#include "cropemu/emulator/model.hpp"
#include "cropemu/error.hpp"
#include "cropemu/pipeline/stages.hpp"
#include "cropemu/sampling/sobol.hpp"
#include "cropemu/swag/posterior.hpp"
#include "cropemu/weather/metrics.hpp"

namespace py = pybind11;
using namespace cropemu;

namespace {

std::map<std::string, double> config_dict(const sampling::TraitConfig& cfg) {
  std::map<std::string, double> d;
  const auto& names = sampling::variable_names();
  for (std::size_t v = 0; v < names.size(); ++v) d[std::string(names[v])] = sampling::get_value(cfg, v);
  return d;
}

std::map<std::string, double> simulate_point(const std::vector<double>& point, const std::string& weatherCsv,
                                             const std::string& location, int year) {
  const auto space = sampling::default_param_space();
  const auto cfg = sampling::decode_sample(space, point);
  const auto corpus = weather::load_weather_csv(weatherCsv);
  for (const auto& s : corpus) {
    if (s.location != location || s.year != year) continue;
    const auto out = cropsim::simulate(cfg, s, cropsim::county_soil(location));
    std::map<std::string, double> d;
    for (std::size_t i = 0; i < cropsim::kOutputCount; ++i) d[std::string(cropsim::output_names()[i])] = out[i];
    return d;
  }
  throw InputError(weatherCsv + " has no series for " + location + " " + std::to_string(year));
}

pipeline::Stage stage_from_name(const std::string& name) {
  for (auto s : pipeline::pipeline_stages())
    if (name == pipeline::stage_name(s)) return s;
  if (name == pipeline::stage_name(pipeline::Stage::GenCorpus)) return pipeline::Stage::GenCorpus;
  throw ConfigError("unknown stage '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cropemu core bindings";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());

  m.def("sobol_points", &sampling::sobol_points, py::arg("dimension"), py::arg("count"), py::arg("skip") = 0);
  m.def("variable_names", [] {
    std::vector<std::string> v;
    for (auto n : sampling::variable_names()) v.emplace_back(n);
    return v;
  });
  m.def("output_names", [] {
    std::vector<std::string> v;
    for (auto n : cropsim::output_names()) v.emplace_back(n);
    return v;
  });
  m.def("county_names", [] {
    std::vector<std::string> v;
    for (const auto& s : cropsim::county_soils()) v.push_back(s.county);
    return v;
  });
  m.def(
      "decode_sample",
      [](const std::vector<double>& point) {
        return config_dict(sampling::decode_sample(sampling::default_param_space(), point));
      },
      py::arg("point"));
  m.def("simulate", &simulate_point, py::arg("point"), py::arg("weather_csv"), py::arg("location"),
        py::arg("year"), "Decode a unit-cube point and run the crop oracle on one corpus series.");

  m.def("f1_score", &weather::f1_score, py::arg("precision"), py::arg("recall"));
  m.def("r2_from_mse", &emulator::r2_from_mse, py::arg("mse"), py::arg("target_variance") = 1.0);
  m.def("format_fraction_percent", &discovery::format_fraction_percent, py::arg("fraction"));

  py::class_<swag::SwagPosterior>(m, "SwagPosterior")
      .def(py::init<std::size_t, std::size_t>(), py::arg("parameters"), py::arg("rank") = 10)
      .def("add_snapshot", [](swag::SwagPosterior& p, const std::vector<double>& w) { p.add_snapshot(w); })
      .def("diagonal_variance", &swag::SwagPosterior::diagonal_variance)
      .def("sample", py::overload_cast<const swag::SwagPosterior&, std::uint64_t>(&swag::swag_sample),
           py::arg("seed"))
      .def_readonly("mean", &swag::SwagPosterior::weightMean)
      .def_readonly("deviations", &swag::SwagPosterior::deviationColumns)
      .def_readonly("snapshot_count", &swag::SwagPosterior::snapshotCount)
      .def_property_readonly("rank", &swag::SwagPosterior::rank);

  m.def(
      "parse_config",
      [](const std::string& text) {
        return pipeline::config_to_json(pipeline::parse_config(nlohmann::json::parse(text))).dump();
      },
      py::arg("json_text"), "Validate a config document; returns the completed config as JSON text.");
  m.def(
      "load_config",
      [](const std::string& path) { return pipeline::config_to_json(pipeline::load_config(path)).dump(); },
      py::arg("path"));
  m.def(
      "config_hash",
      [](const std::string& text) { return pipeline::config_hash(pipeline::parse_config(nlohmann::json::parse(text))); },
      py::arg("json_text"));
  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& configPath, const std::string& outputDir,
         const std::string& corpus) {
        auto cfg = pipeline::load_config(configPath);
        if (!outputDir.empty()) cfg.paths.outputDir = outputDir;
        if (!corpus.empty()) cfg.paths.weatherCorpus = corpus;
        py::gil_scoped_release release;
        if (stage == "all") {
          pipeline::run_all(cfg);
        } else {
          pipeline::run_stage(stage_from_name(stage), cfg);
        }
      },
      py::arg("stage"), py::arg("config_path"), py::arg("output_dir") = "", py::arg("corpus") = "");
}
