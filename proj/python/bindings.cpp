#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "attackscope/error.hpp"
#include "attackscope/flow_ingest.hpp"
#include "attackscope/flux.hpp"
#include "attackscope/predictability.hpp"
#include "attackscope/report.hpp"
#include "attackscope/spatial.hpp"
#include "attackscope/synth.hpp"

namespace py = pybind11;
namespace as = attackscope;

namespace {

using IpArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;
using TimeArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using CountArray = py::array_t<as::Count, py::array::c_style | py::array::forcecast>;

py::tuple to_arrays(const std::vector<as::FlowRecord>& recs) {
  IpArray ips(static_cast<py::ssize_t>(recs.size()));
  TimeArray ts(static_cast<py::ssize_t>(recs.size()));
  auto pi = ips.mutable_unchecked<1>();
  auto pt = ts.mutable_unchecked<1>();
  for (std::size_t k = 0; k < recs.size(); ++k) {
    pi(k) = recs[k].ip;
    pt(k) = recs[k].t;
  }
  return py::make_tuple(ips, ts);
}

std::vector<as::FlowRecord> from_arrays(const IpArray& ips, const TimeArray& ts) {
  if (ips.ndim() != 1 || ts.ndim() != 1 || ips.shape(0) != ts.shape(0)) {
    throw as::ValidationError("flow_ingest", "ips and times must be 1-d arrays of equal length");
  }
  std::vector<as::FlowRecord> recs(static_cast<std::size_t>(ips.shape(0)));
  auto pi = ips.unchecked<1>();
  auto pt = ts.unchecked<1>();
  for (std::size_t k = 0; k < recs.size(); ++k) recs[k] = {pi(k), pt(k)};
  as::sort_records(recs);
  return recs;
}

as::AttackMatrix to_matrix(const CountArray& w, double delta_t) {
  if (w.ndim() != 2) throw as::ValidationError("spatiotemporal_matrix", "matrix must be 2-d (ips x bins)");
  as::AttackMatrix m(delta_t, 0.0, static_cast<std::size_t>(w.shape(0)), static_cast<std::size_t>(w.shape(1)));
  auto pw = w.unchecked<2>();
  for (py::ssize_t i = 0; i < w.shape(0); ++i) {
    for (py::ssize_t b = 0; b < w.shape(1); ++b) m.at(static_cast<as::IpIndex>(i + 1), b) = pw(i, b);
  }
  return m;
}

CountArray from_matrix(const as::AttackMatrix& m) {
  CountArray out({static_cast<py::ssize_t>(m.n_ips()), static_cast<py::ssize_t>(m.n_bins())});
  auto po = out.mutable_unchecked<2>();
  for (as::IpIndex ip = 1; ip <= m.n_ips(); ++ip) {
    const auto row = m.row(ip);
    for (std::size_t b = 0; b < row.size(); ++b) po(ip - 1, b) = row[b];
  }
  return out;
}

py::object optional_float(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

}  // namespace

PYBIND11_MODULE(_attackscope, m) {
  m.doc() = "Honeypot attack-traffic analysis";

  static py::exception<as::Error> error(m, "AttackscopeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const as::Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("module") = e.module();
      inst.attr("kind") = e.kind();
      if (const auto* ma = dynamic_cast<const as::MissingAnalysis*>(&e)) inst.attr("prerequisite") = ma->prerequisite();
      if (const auto* io = dynamic_cast<const as::IoError*>(&e)) inst.attr("path") = io->path();
      PyErr_SetObject(exc.ptr(), inst.ptr());
    }
  });

  m.def("parse_flow_csv", [](const std::string& text) {
    std::istringstream in(text);
    return to_arrays(as::parse_flow_records(in));
  }, py::arg("text"), "Parse flow-record CSV text into (ips, times) arrays.");

  m.def("read_flow_file", [](const std::string& path) { return to_arrays(as::read_flow_file(path)); },
        py::arg("path"));

  m.def("bin_attacks",
        [](const IpArray& ips, const TimeArray& ts, double delta_t, std::size_t ip_count,
           std::optional<double> t0, std::optional<double> duration) {
          const auto recs = from_arrays(ips, ts);
          as::BinOptions opt;
          opt.t0 = t0;
          opt.duration = duration;
          const auto res = as::bin_attacks(recs, delta_t, ip_count, opt);
          return from_matrix(res.matrix);
        },
        py::arg("ips"), py::arg("times"), py::arg("delta_t"), py::arg("ip_count"), py::arg("t0") = py::none(),
        py::arg("duration") = py::none(), "Attack counts per IP (rows) and time bin (columns).");

  m.def("region_flux",
        [](const CountArray& w, std::uint32_t first, std::uint32_t last) {
          const auto rep = as::analyze_region_flux(to_matrix(w, 1.0), {first, last});
          py::dict d;
          d["mean_flux"] = rep.stats.mean_flux;
          d["std_flux"] = rep.stats.std_flux;
          d["mean_drive"] = rep.stats.mean_drive;
          d["std_drive"] = rep.stats.std_drive;
          d["slope"] = rep.fit ? py::object(py::float_(rep.fit->slope)) : py::object(py::none());
          d["drive_class"] = as::to_string(rep.drive_class);
          return d;
        },
        py::arg("matrix"), py::arg("first"), py::arg("last"),
        "Flux-fluctuation statistics, slope and drive class of IPs first..last (1-based).");

  m.def("theoretical_sigma", &as::theoretical_sigma, py::arg("mean_flux"), py::arg("mean_drive"),
        py::arg("std_drive"));
  m.def("homogeneous_bound", &as::homogeneous_bound, py::arg("mean"));
  m.def("concentrated_bound", &as::concentrated_bound, py::arg("mean"), py::arg("region_size"));

  m.def("solve_fano", [](double entropy, std::size_t n_states) { return as::solve_fano(entropy, n_states).pi_max; },
        py::arg("entropy"), py::arg("n_states"));
  m.def("fano_entropy", &as::fano_entropy, py::arg("pi"), py::arg("n_states"));
  m.def("estimate_entropy",
        [](const std::vector<int>& states) { return as::estimate_entropy(states).value; }, py::arg("states"),
        "Entropy rate in bits per symbol.");

  m.def("predictability",
        [](const CountArray& w, double delta_t, double h) {
          const auto rep = as::predictability_profile(to_matrix(w, delta_t), h, std::span<const as::IpGroup>{});
          py::list per_ip;
          for (const auto& ip : rep.per_ip) per_ip.append(optional_float(ip.mean_pi_max));
          py::dict d;
          d["per_ip"] = per_ip;
          d["mean_pi_max"] = optional_float(rep.overall.mean_pi_max);
          d["ground_fraction"] = rep.overall.mean_ground_fraction;
          d["states_per_section"] = rep.states_per_section;
          return d;
        },
        py::arg("matrix"), py::arg("delta_t"), py::arg("h"), "Per-IP mean Pi_max over sections of h hours.");

  m.def("generate_fig1",
        [](std::uint64_t seed, double duration) { return to_arrays(as::generate(as::fig1_composite(seed, duration)).records); },
        py::arg("seed") = 1, py::arg("duration") = 172800.0,
        "Composite 491-IP scenario as (ips, times) arrays.");

  m.def("run_pipeline_json",
        [](const std::string& config_json) {
          std::istringstream in(config_json);
          const auto cfg = as::parse_run_config(in, {});
          py::gil_scoped_release release;
          const auto b = as::run_pipeline(cfg);
          return b.files;
        },
        py::arg("config_json"), "Run every analysis stage; returns the written file names.");

  m.def("sha256_hex", [](const py::bytes& data) { return as::sha256_hex(std::string(data)); }, py::arg("data"));
}
