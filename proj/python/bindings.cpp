#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hda/experiment.hpp"
#include "hda/model.hpp"
#include "hda/multi_opt.hpp"
#include "hda/simulator.hpp"
#include "hda/single_opt.hpp"
#include "hda/special.hpp"

namespace py = pybind11;

namespace {

hda::VectorBudget budget(double power, double channel_uses, std::size_t samples,
                         double noise_power) {
  hda::VectorBudget b;
  b.power = power;
  b.channel_uses = channel_uses;
  b.samples = samples;
  b.noise_power = noise_power;
  return b;
}

py::dict terms_dict(const hda::DistortionTerms& t) {
  py::dict d;
  d["outage_term"] = t.outage_term;
  d["mmse_term"] = t.mmse_term;
  d["outage_probability"] = t.outage_probability;
  d["total"] = t.total;
  return d;
}

py::object opt(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::list rows_list(const hda::ResultTable& t) {
  py::list out;
  for (const auto& r : t.rows) {
    py::dict d;
    d["scheme"] = r.scheme;
    d["snr_db"] = r.snr_db;
    d["eta"] = r.eta;
    d["vector_index"] = r.vector_index;
    d["R"] = opt(r.rate);
    d["alpha"] = opt(r.alpha);
    d["K_i"] = opt(r.channel_uses);
    d["P_i"] = opt(r.power);
    d["ed_analytic"] = opt(r.ed_analytic);
    d["ed_sim"] = opt(r.ed_sim);
    d["ed_sim_ci"] = opt(r.ed_sim_ci);
    d["sdr_db"] = opt(r.sdr_db);
    out.append(d);
  }
  return out;
}

hda::ResultTable run_from_text(const std::string& config_json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw hda::ValidationError(std::string("config: ") + e.what());
  }
  return hda::run_experiment(hda::ExperimentConfig::from_json(doc));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<hda::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<hda::InfeasibleError>(m, "InfeasibleError", PyExc_ValueError);
  py::register_exception<hda::ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  m.attr("CSV_HEADER") = hda::kCsvHeader;
  m.attr("DEFAULT_RATE_CEILING") = hda::kDefaultRateCeiling;

  m.def("psi", py::overload_cast<double>(&hda::psi), py::arg("x"));
  m.def("psi_derivative", &hda::psi_derivative, py::arg("x"));
  m.def("quantizer_error_variance", &hda::quantizer_error_variance, py::arg("rate"),
        py::arg("variance"));
  m.def("outage_probability", &hda::outage_probability, py::arg("channel_rate"),
        py::arg("digital_snr"));
  m.def("opta_distortion", &hda::opta_distortion, py::arg("snr"), py::arg("eta"));
  m.def("sdr_db", &hda::sdr_db, py::arg("variance"), py::arg("distortion"));

  m.def(
      "expected_distortion",
      [](double rate, double alpha, double power, double channel_uses, std::size_t samples,
         double variance, double noise_power, bool exact) {
        const hda::OperatingPoint p{rate, alpha, power, channel_uses};
        const hda::LinkSetup link{samples, noise_power};
        return terms_dict(exact ? hda::expected_distortion_exact(p, link, variance)
                                : hda::expected_distortion_approx(p, link, variance));
      },
      py::arg("rate"), py::arg("alpha"), py::arg("power"), py::arg("channel_uses"),
      py::arg("samples"), py::arg("variance") = 1.0, py::arg("noise_power") = 1.0,
      py::arg("exact") = false);

  m.def(
      "optimize_single",
      [](double power, double channel_uses, std::size_t samples, double variance,
         double noise_power, bool analog_fallback) {
        hda::SingleOptConfig cfg;
        cfg.analog_fallback = analog_fallback;
        const auto r = hda::bcd_joint_allocate(budget(power, channel_uses, samples, noise_power),
                                               variance, cfg);
        py::dict d;
        d["rate"] = r.rate;
        d["alpha"] = r.alpha;
        d["expected_distortion"] = r.expected_distortion;
        d["trace"] = r.trace;
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        d["used_analog_fallback"] = r.used_analog_fallback;
        return d;
      },
      py::arg("power"), py::arg("channel_uses"), py::arg("samples"), py::arg("variance") = 1.0,
      py::arg("noise_power") = 1.0, py::arg("analog_fallback") = true);

  m.def(
      "optimize_multi",
      [](std::size_t samples, std::vector<double> variances, long channel_uses, double snr_db,
         bool analog_fallback) {
        const hda::SourceSpec source(samples, std::move(variances));
        const auto channel = hda::ChannelSpec::from_snr_db(channel_uses, snr_db);
        hda::MultiOptConfig cfg;
        cfg.single.analog_fallback = analog_fallback;
        const auto r = hda::two_stage_optimize(source, channel, cfg);
        py::list splits;
        for (const auto& s : r.splits) splits.append(py::make_tuple(s.rate, s.alpha));
        py::dict d;
        d["power"] = r.power;
        d["channel_uses"] = r.channel_uses;
        d["splits"] = splits;
        d["vector_distortion"] = r.vector_distortion;
        d["expected_distortion"] = r.expected_distortion;
        d["trace"] = r.trace;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("samples"), py::arg("variances"), py::arg("channel_uses"), py::arg("snr_db"),
      py::arg("analog_fallback") = true);

  m.def(
      "simulate",
      [](double rate, double alpha, double power, double channel_uses, std::size_t samples,
         double variance, double noise_power, long n_trials, std::uint64_t seed,
         const std::string& mode, unsigned threads) {
        const hda::OperatingPoint p{rate, alpha, power, channel_uses};
        const hda::LinkSetup link{samples, noise_power};
        hda::MonteCarloReport r;
        {
          py::gil_scoped_release release;
          r = hda::run_monte_carlo(p, variance, link, n_trials, hda::parse_quantizer_mode(mode),
                                   seed, threads);
        }
        py::dict d;
        d["n_trials"] = r.n_trials;
        d["mean_distortion"] = r.mean_distortion;
        d["distortion_ci"] = r.distortion_ci;
        d["outage_rate"] = r.outage_rate;
        d["sdr_db"] = r.sdr_db;
        return d;
      },
      py::arg("rate"), py::arg("alpha"), py::arg("power"), py::arg("channel_uses"),
      py::arg("samples"), py::arg("variance") = 1.0, py::arg("noise_power") = 1.0,
      py::arg("n_trials") = 10000, py::arg("seed") = 1, py::arg("mode") = "ideal",
      py::arg("threads") = 0);

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        hda::ResultTable t;
        {
          py::gil_scoped_release release;
          t = run_from_text(config_json);
        }
        return rows_list(t);
      },
      py::arg("config_json"));

  m.def(
      "run_experiment_csv",
      [](const std::string& config_json) {
        hda::ResultTable t;
        {
          py::gil_scoped_release release;
          t = run_from_text(config_json);
        }
        std::ostringstream out;
        hda::write_csv(t, out);
        return out.str();
      },
      py::arg("config_json"));
}
