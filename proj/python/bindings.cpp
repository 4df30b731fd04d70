#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cdan/error.hpp"
#include "cdan/runner.hpp"

namespace py = pybind11;
using namespace cdan;

namespace {

std::vector<double> to_vec(const Tensor& t) { return t.values(); }

ExperimentConfig config_from_dict(const std::map<std::string, std::string>& kv) { return config_from_map(kv); }

py::dict run_dict(const std::map<std::string, std::string>& kv, std::uint64_t seed, const std::string& method) {
  ExperimentConfig cfg = config_from_dict(kv);
  if (!method.empty()) cfg = apply_method(cfg, method);
  std::optional<RunOutput> res;
  {
    py::gil_scoped_release release;
    res.emplace(run_experiment(cfg, seed));
  }
  const RunOutput& out = *res;
  py::dict d;
  d["acc_src"] = out.metrics.final_acc_src;
  d["acc_tgt"] = out.metrics.final_acc_tgt;
  d["a_distance"] = out.metrics.a_distance ? py::cast(*out.metrics.a_distance) : py::none();
  d["strategy"] = to_string(out.metrics.strategy);
  d["metrics_csv"] = metrics_csv(out.metrics);
  const auto& er = out.metrics.entropy_report;
  d["mean_certainty_correct"] = er.mean_correct ? py::cast(*er.mean_correct) : py::none();
  d["mean_certainty_incorrect"] = er.mean_incorrect ? py::cast(*er.mean_incorrect) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditional adversarial domain adaptation on synthetic shift data";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("multilinear_map", [](const std::vector<double>& f, const std::vector<double>& g) {
    return to_vec(multilinear_map(f, g));
  });
  m.def(
      "randomized_multilinear_map",
      [](const std::vector<double>& f, const std::vector<double>& g, std::size_t d, const std::string& sampler,
         std::uint64_t seed) {
        const RandomProjection p = sample_projection(d, f.size(), g.size(), parse_sampler(sampler), seed);
        return to_vec(randomized_multilinear_map(f, g, p));
      },
      py::arg("f"), py::arg("g"), py::arg("d"), py::arg("sampler") = "gaussian", py::arg("seed") = 0);
  m.def("select_strategy",
        [](std::size_t d_f, std::size_t d_g, std::size_t threshold) { return to_string(select_strategy(d_f, d_g, threshold)); },
        py::arg("d_f"), py::arg("d_g"), py::arg("threshold") = 4096);

  m.def(
      "lr_schedule",
      [](double p, double eta0, double alpha, double beta) {
        ScheduleParams sp;
        sp.eta0 = eta0;
        sp.alpha = alpha;
        sp.beta = beta;
        return lr_schedule(p, sp);
      },
      py::arg("p"), py::arg("eta0") = 0.01, py::arg("alpha") = 10.0, py::arg("beta") = 0.75);
  m.def("lambda_schedule", &lambda_schedule, py::arg("p"), py::arg("delta") = 10.0);

  m.def(
      "theorem1_verify",
      [](const std::vector<double>& f, const std::vector<double>& g, const std::vector<double>& f2,
         const std::vector<double>& g2, std::size_t d, std::size_t resamples, const std::string& sampler,
         std::uint64_t seed) {
        EstimatorReport r;
        {
          py::gil_scoped_release release;
          r = theorem1_verify(f, g, f2, g2, d, resamples, parse_sampler(sampler), seed);
        }
        py::dict out;
        out["mc_mean"] = r.mc_mean;
        out["exact"] = r.exact;
        out["mc_var"] = r.mc_var;
        out["standard_error"] = r.standard_error;
        out["z"] = r.z();
        return out;
      },
      py::arg("f"), py::arg("g"), py::arg("f2"), py::arg("g2"), py::arg("d"), py::arg("resamples") = 20000,
      py::arg("sampler") = "gaussian", py::arg("seed") = 0);

  m.def("method_names", &method_names);
  m.def("config_keys", [] {
    std::vector<std::string> keys;
    for (const auto& kv : config_keys()) keys.push_back(kv.first);
    return keys;
  });
  m.def("run", &run_dict, py::arg("config") = std::map<std::string, std::string>{}, py::arg("seed") = 0,
        py::arg("method") = "");
}
