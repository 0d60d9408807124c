// Python bindings. Scenarios go in and results come out as JSON text; the
// package wrapper converts to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpsl/clusterer.hpp"
#include "cpsl/cut_selector.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/latency_model.hpp"
#include "cpsl/scenario.hpp"
#include "cpsl/split_trainer.hpp"

namespace py = pybind11;
using namespace cpsl;
using nlohmann::json;

namespace {

Scenario scenario(const std::string& doc, const std::string& base_dir) {
  return parse_scenario(json::parse(doc), base_dir);
}

json profile_json(const CutProfile& p, const std::string& layer) {
  return {{"cut", p.cut},         {"layer", layer},
          {"xi_d", p.xi_d},       {"xi_s", p.xi_s},
          {"xi_g", p.xi_g},       {"gamma_d_f", p.gamma_d_f},
          {"gamma_d_b", p.gamma_d_b}, {"gamma_s_f", p.gamma_s_f},
          {"gamma_s_b", p.gamma_s_b}};
}

std::string profiles(const std::string& doc, const std::string& base_dir,
                     const std::string& source) {
  const auto s = scenario(doc, base_dir);
  const auto names = s.layer_names();
  json out = json::array();
  for (const auto& p : s.profiles(profile_source_from_string(source))) {
    out.push_back(profile_json(p, names.at(p.cut - 1)));
  }
  return out.dump();
}

std::string round_latency(const std::string& doc, const std::string& base_dir) {
  const auto s = scenario(doc, base_dir);
  const auto devices = s.devices();
  const auto ps = s.profiles(s.profile_source);
  const auto& p = ps.at(s.cut - 1);
  json out = json::object();
  for (const auto& name : s.latency_schemes) {
    if (name == "CPSL") {
      const auto r = gibbs_cluster(devices, p, s.env, s.gibbs);
      out[name] = cpsl_round_latency(r.assignment, r.allocations, devices, p, s.env).total;
    } else if (name == "SL") {
      out[name] = vanilla_sl_round_latency(devices, p, s.env).total;
    } else {
      out[name] = fl_round_latency(devices, ps.back(), s.env).total;
    }
  }
  return out.dump();
}

std::string optimize(const std::string& doc, const std::string& base_dir) {
  const auto s = scenario(doc, base_dir);
  const auto p = s.profiles(s.profile_source).at(s.cut - 1);
  return clustering_to_json(gibbs_cluster(s.devices(), p, s.env, s.gibbs)).dump();
}

std::string sweep(const std::string& doc, const std::string& base_dir, int jobs) {
  const auto s = scenario(doc, base_dir);
  const auto sel = select_cut(s.profiles(s.sweep_source), s.layer_names(), s.env, s.saa, jobs);
  return cut_selection_to_json(sel).dump();
}

std::string train(const std::string& doc, const std::string& base_dir,
                  const std::string& scheme) {
  const auto s = scenario(doc, base_dir);
  TrainMetrics m;
  {
    py::gil_scoped_release release;
    m = run_training(train_scheme_from_string(scheme), s.trainer);
  }
  json rows = json::array();
  for (const auto& r : m.rounds) {
    rows.push_back({{"round", r.round},
                    {"loss", r.loss},
                    {"train_acc", r.train_acc},
                    {"test_acc", r.test_acc}});
  }
  return json{{"scheme", scheme}, {"rounds", rows}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "split learning latency and resource management core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<GuardError>(m, "GuardError", base.ptr());

  m.def("default_scenario", [] { return default_scenario_json().dump(); });
  m.def("scenario_hash",
        [](const std::string& doc, const std::string& base_dir) {
          return scenario(doc, base_dir).hash();
        },
        py::arg("doc"), py::arg("base_dir") = ".");
  m.def("profiles", &profiles, py::arg("doc"), py::arg("base_dir") = ".",
        py::arg("source") = "override");
  m.def("round_latency", &round_latency, py::arg("doc"), py::arg("base_dir") = ".");
  m.def("optimize", &optimize, py::arg("doc"), py::arg("base_dir") = ".");
  m.def("sweep", &sweep, py::arg("doc"), py::arg("base_dir") = ".", py::arg("jobs") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("train", &train, py::arg("doc"), py::arg("base_dir") = ".", py::arg("scheme") = "CPSL");
  m.def("acceptance_probability", &acceptance_probability, py::arg("theta_old"),
        py::arg("theta_new"), py::arg("delta"));
}
