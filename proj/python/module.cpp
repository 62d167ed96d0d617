#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jpcg/controller.hpp"
#include "jpcg/matrix_io.hpp"
#include "jpcg/reference.hpp"
#include "jpcg/report_io.hpp"

namespace py = pybind11;
using namespace jpcg;

namespace {

std::vector<double> to_vector(py::array_t<double, py::array::c_style |
                                                      py::array::forcecast>
                                  arr) {
  auto r = arr.unchecked<1>();
  std::vector<double> v(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    v[static_cast<std::size_t>(i)] = r(i);
  }
  return v;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
  auto w = arr.mutable_unchecked<1>();
  for (std::size_t i = 0; i < v.size(); ++i) {
    w(static_cast<py::ssize_t>(i)) = v[i];
  }
  return arr;
}

SolverConfig config_from_kwargs(double tol, std::int64_t max_iters,
                                const std::string& scheme,
                                const std::string& schedule,
                                const std::string& scheduler,
                                bool hardware_faithful,
                                const std::map<std::string, std::size_t>&
                                    fifo_depths) {
  SolverConfig cfg;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  cfg.scheme = scheme_from_name(scheme);
  cfg.schedule_mode = schedule == "naive" ? ScheduleMode::Naive
                                          : ScheduleMode::Decentralized;
  cfg.scheduler = scheduler == "conc" ? SchedulerKind::Concurrent
                                      : SchedulerKind::Deterministic;
  cfg.hardware_faithful = hardware_faithful;
  cfg.fifo_depths = fifo_depths;
  return cfg;
}

py::dict report_to_dict(const SolverReport& rep) {
  py::dict d;
  d["converged"] = rep.converged;
  d["iterations"] = rep.iterations;
  d["final_rr"] = rep.final_rr;
  d["termination_reason"] = rep.termination_reason;
  py::list trace;
  for (const auto& [it, rr] : rep.residual_trace) {
    trace.append(py::make_tuple(it, rr));
  }
  d["residual_trace"] = trace;
  d["reads_per_iteration"] = rep.reads_per_iteration;
  d["writes_per_iteration"] = rep.writes_per_iteration;
  d["instruction_log_length"] = rep.instruction_log_length;
  d["padding_count"] = rep.padding_count;
  d["estimated_cycles"] = rep.estimated_cycles;
  py::list counters;
  for (const auto& c : rep.counters) {
    py::dict cd;
    cd["iteration"] = c.rp;
    cd["reads"] = c.reads;
    cd["writes"] = c.writes;
    counters.append(cd);
  }
  d["counters"] = counters;
  return d;
}

}  // namespace

PYBIND11_MODULE(jpcgstream, m) {
  m.doc() = "Stream-dataflow Jacobi-preconditioned CG solver";

  py::class_<CsrMatrix>(m, "CsrMatrix")
      .def_readonly("n", &CsrMatrix::n)
      .def_property_readonly("nnz", &CsrMatrix::nnz)
      .def_property_readonly(
          "row_ptr", [](const CsrMatrix& a) { return a.row_ptr; })
      .def_property_readonly(
          "col_idx", [](const CsrMatrix& a) { return a.col_idx; })
      .def_property_readonly(
          "values", [](const CsrMatrix& a) { return to_array(a.values); });

  m.def("load_matrix", [](const std::string& path) {
    CooMatrix coo = parse_matrix_market_file(path);
    if (coo.symmetric_stored) coo = expand_symmetric(coo);
    return to_csr(coo);
  });
  m.def("parse_matrix_market_text", [](const std::string& text) {
    CooMatrix coo = parse_matrix_market(text);
    if (coo.symmetric_stored) coo = expand_symmetric(coo);
    return to_csr(coo);
  });
  m.def("extract_jacobi", [](const CsrMatrix& a) {
    return to_array(extract_jacobi(a).diag);
  });
  m.def("validate_solver_input",
        [](const CsrMatrix& a, py::array_t<double> b, py::array_t<double> x0) {
          return validate_solver_input(a, to_vector(b), to_vector(x0));
        });

  m.def(
      "solve",
      [](const CsrMatrix& a, py::array_t<double> b, py::array_t<double> x0,
         double tol, std::int64_t max_iters, const std::string& scheme,
         const std::string& schedule, const std::string& scheduler,
         bool hardware_faithful,
         const std::map<std::string, std::size_t>& fifo_depths) {
        SolverConfig cfg =
            config_from_kwargs(tol, max_iters, scheme, schedule, scheduler,
                               hardware_faithful, fifo_depths);
        SolveResult res = run_jpcg(a, to_vector(b), to_vector(x0), cfg);
        return py::make_tuple(to_array(res.x), report_to_dict(res.report));
      },
      py::arg("a"), py::arg("b"), py::arg("x0"), py::arg("tol") = 1e-12,
      py::arg("max_iters") = 20000, py::arg("scheme") = "fp64",
      py::arg("schedule") = "decentralized", py::arg("scheduler") = "det",
      py::arg("hardware_faithful") = false,
      py::arg("fifo_depths") = std::map<std::string, std::size_t>{});

  m.def(
      "solve_reference",
      [](const CsrMatrix& a, py::array_t<double> b, py::array_t<double> x0,
         double tol, std::int64_t max_iters, const std::string& scheme) {
        OracleTrace t = jpcg_reference(a, to_vector(b), to_vector(x0), tol,
                                       max_iters, scheme_from_name(scheme));
        py::dict d;
        d["converged"] = t.converged;
        d["iterations"] = t.iterations();
        py::list rr;
        for (const auto& rec : t.records) rr.append(rec.rr);
        d["rr_trace"] = rr;
        return py::make_tuple(to_array(t.x), d);
      },
      py::arg("a"), py::arg("b"), py::arg("x0"), py::arg("tol") = 1e-12,
      py::arg("max_iters") = 20000, py::arg("scheme") = "fp64");

  m.def("spmv", [](const CsrMatrix& a, py::array_t<double> x,
                   const std::string& scheme) {
    return to_array(spmv_reference_scheme(a, to_vector(x),
                                          scheme_from_name(scheme)));
  }, py::arg("a"), py::arg("x"), py::arg("scheme") = "fp64");

  m.def("compare_traces",
        [](const std::vector<double>& rr1, const std::vector<double>& rr2,
           double rel_tol) {
          TraceDivergence d = compare_traces(rr1, rr2, rel_tol);
          return py::make_tuple(d.first_divergence, d.iteration_delta);
        });

  m.def("matching_frequency", &matching_frequency);
  m.def("min_safe_depth",
        [](std::int64_t latency) { return min_safe_depth(latency); });
}
