// Command-line entry point: load a Matrix Market system, run the streamed
// dataflow solver and/or the sequential reference, and emit residual traces
// and reports.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jpcg/controller.hpp"
#include "jpcg/matrix_io.hpp"
#include "jpcg/reference.hpp"
#include "jpcg/report_io.hpp"

namespace {

std::vector<double> read_vector_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw jpcg::SolverError("cannot open vector file: " + path);
  std::vector<double> v;
  double x;
  while (f >> x) v.push_back(x);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streamed Jacobi-preconditioned CG solver"};

  std::string matrix_path;
  std::string mode = "streamed";
  std::string scheme = "fp64";
  std::string schedule = "decentralized";
  std::string scheduler = "det";
  std::string trace_path, report_path, b_path, x0_path;
  std::string instr_log_path, transcript_path, schedule_dump_path;
  double tol = 1e-12;
  std::int64_t max_iters = 20000;
  std::vector<std::string> fifo_depths;
  bool hw_faithful = false;
  double compare_rel_tol = 1e-6;

  app.add_option("--matrix", matrix_path, "Matrix Market file (.mtx)")
      ->required();
  app.add_option("--mode", mode, "streamed | reference | compare")
      ->check(CLI::IsMember({"streamed", "reference", "compare"}));
  app.add_option("--scheme", scheme,
                 "fp64 | mixed-v1 | mixed-v2 | mixed-v3")
      ->check(CLI::IsMember({"fp64", "mixed-v1", "mixed-v2", "mixed-v3"}));
  app.add_option("--schedule", schedule, "naive | decentralized")
      ->check(CLI::IsMember({"naive", "decentralized"}));
  app.add_option("--tol", tol, "convergence threshold on |r|^2");
  app.add_option("--max-iters", max_iters, "iteration budget");
  app.add_option("--fifo-depth", fifo_depths,
                 "per-channel depth override NAME=N (repeatable)");
  app.add_option("--scheduler", scheduler, "det | conc")
      ->check(CLI::IsMember({"det", "conc"}));
  app.add_option("--trace", trace_path, "residual trace CSV output");
  app.add_option("--report", report_path, "report JSON output");
  app.add_option("--instr-log", instr_log_path,
                 "issued-instruction log JSON output (streamed mode)");
  app.add_option("--transcript", transcript_path,
                 "channel transcript dump for determinism checks (streamed)");
  app.add_option("--dump-schedule", schedule_dump_path,
                 "scheduled-nonzero dump (pe_id seq row col value-hex)");
  app.add_option("--b", b_path, "right-hand side file, one FP64 per line");
  app.add_option("--x0", x0_path, "initial guess file, one FP64 per line");
  app.add_flag("--hw-faithful", hw_faithful,
               "enforce on-chip index/window limits and column tiling");
  app.add_option("--compare-tol", compare_rel_tol,
                 "relative tolerance for compare mode");

  CLI11_PARSE(app, argc, argv);

  try {
    jpcg::CooMatrix coo = jpcg::parse_matrix_market_file(matrix_path);
    if (coo.symmetric_stored) coo = jpcg::expand_symmetric(coo);
    jpcg::CsrMatrix a = jpcg::to_csr(coo);

    // b defaults to all ones, x0 to all zeros.
    std::vector<double> b(static_cast<std::size_t>(a.n), 1.0);
    std::vector<double> x0(static_cast<std::size_t>(a.n), 0.0);
    if (!b_path.empty()) b = read_vector_file(b_path);
    if (!x0_path.empty()) x0 = read_vector_file(x0_path);

    auto diags = jpcg::validate_solver_input(a, b, x0);
    if (!diags.empty()) {
      for (const auto& d : diags) std::cerr << "invalid input: " << d << "\n";
      return 1;
    }

    jpcg::SolverConfig cfg;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    cfg.scheme = jpcg::scheme_from_name(scheme);
    cfg.schedule_mode = schedule == "naive"
                            ? jpcg::ScheduleMode::Naive
                            : jpcg::ScheduleMode::Decentralized;
    cfg.scheduler = scheduler == "conc" ? jpcg::SchedulerKind::Concurrent
                                        : jpcg::SchedulerKind::Deterministic;
    cfg.hardware_faithful = hw_faithful;
    for (const auto& spec : fifo_depths) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) {
        std::cerr << "bad --fifo-depth, want NAME=N: " << spec << "\n";
        return 1;
      }
      cfg.fifo_depths[spec.substr(0, eq)] =
          static_cast<std::size_t>(std::stoull(spec.substr(eq + 1)));
    }

    if (!schedule_dump_path.empty()) {
      jpcg::ScheduledNonzeros sched =
          cfg.hardware_faithful
              ? jpcg::schedule_nonzeros_tiled(a, cfg.n_channels, cfg.n_pes,
                                              cfg.dep_distance,
                                              jpcg::kXWindowDepth, cfg.scheme)
              : jpcg::schedule_nonzeros(a, cfg.n_channels, cfg.n_pes,
                                        cfg.dep_distance, cfg.scheme);
      std::ofstream f(schedule_dump_path);
      for (const auto& line : jpcg::dump_schedule(sched)) f << line << "\n";
    }
    cfg.record_transcripts = !transcript_path.empty();

    bool converged = false;
    if (mode == "streamed") {
      jpcg::SolveResult res = jpcg::run_jpcg(a, b, x0, cfg);
      converged = res.report.converged;
      if (!transcript_path.empty()) {
        std::ofstream f(transcript_path);
        for (const auto& line : res.report.transcript) f << line << "\n";
      }
      if (!trace_path.empty()) {
        jpcg::emit_trace_csv(res.report.residual_trace, trace_path);
      }
      if (!report_path.empty()) {
        jpcg::emit_report_json(res.report, report_path, true);
      }
      if (!instr_log_path.empty()) {
        nlohmann::json j = res.report.instruction_log;
        std::ofstream f(instr_log_path);
        f << j.dump(2) << "\n";
      }
      std::printf("%s in %lld iterations, rr = %.6e\n",
                  converged ? "converged" : "not converged",
                  static_cast<long long>(res.report.iterations),
                  res.report.final_rr);
    } else if (mode == "reference") {
      jpcg::OracleTrace t =
          jpcg::jpcg_reference(a, b, x0, tol, max_iters, cfg.scheme);
      converged = t.converged;
      jpcg::SolverReport rep;
      rep.converged = t.converged;
      rep.iterations = t.iterations();
      rep.final_rr = t.records.back().rr;
      rep.termination_reason = t.converged ? "converged" : "budget";
      rep.residual_trace = jpcg::trace_from_oracle(t);
      if (!trace_path.empty()) {
        jpcg::emit_trace_csv(rep.residual_trace, trace_path);
      }
      if (!report_path.empty()) {
        jpcg::emit_report_json(rep, report_path, false);
      }
      std::printf("%s in %lld iterations, rr = %.6e\n",
                  converged ? "converged" : "not converged",
                  static_cast<long long>(rep.iterations),
                  rep.final_rr);
    } else {  // compare
      jpcg::SolveResult res = jpcg::run_jpcg(a, b, x0, cfg);
      jpcg::OracleTrace ref =
          jpcg::jpcg_reference(a, b, x0, tol, max_iters, cfg.scheme);
      converged = res.report.converged;
      std::vector<double> rr_streamed, rr_ref;
      for (const auto& [it, rr] : res.report.residual_trace) {
        rr_streamed.push_back(rr);
      }
      for (const auto& rec : ref.records) rr_ref.push_back(rec.rr);
      jpcg::TraceDivergence d =
          jpcg::compare_traces(rr_streamed, rr_ref, compare_rel_tol);
      if (!trace_path.empty()) {
        jpcg::emit_trace_csv(res.report.residual_trace, trace_path);
      }
      if (!report_path.empty()) {
        nlohmann::json j = nlohmann::json::parse(
            jpcg::report_to_json(res.report, true));
        j["compare"] = {
            {"reference_iterations", ref.iterations()},
            {"reference_converged", ref.converged},
            {"iteration_delta", res.report.iterations - ref.iterations()},
            {"first_divergence", d.first_divergence},
            {"rel_tol", compare_rel_tol},
        };
        std::ofstream f(report_path);
        if (!f) throw jpcg::SolverError("cannot write report: " + report_path);
        f << j.dump(2) << "\n";
      }
      std::printf(
          "streamed %lld iterations, reference %lld, delta %lld, first "
          "divergence %lld\n",
          static_cast<long long>(res.report.iterations),
          static_cast<long long>(ref.iterations()),
          static_cast<long long>(res.report.iterations - ref.iterations()),
          static_cast<long long>(d.first_divergence));
    }
    return converged ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
