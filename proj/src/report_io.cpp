#include "jpcg/report_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace jpcg {

std::string trace_to_csv(
    std::span<const std::pair<std::int64_t, double>> trace) {
  std::string out = "iteration,rr\n";
  char buf[64];
  for (const auto& [it, rr] : trace) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(it),
                  rr);
    out += buf;
  }
  return out;
}

void emit_trace_csv(std::span<const std::pair<std::int64_t, double>> trace,
                    const std::string& path) {
  std::ofstream f(path);
  if (!f) throw SolverError("cannot write trace file: " + path);
  f << trace_to_csv(trace);
  if (!f.good()) throw SolverError("write failed: " + path);
}

std::string report_to_json(const SolverReport& report, bool with_counters) {
  nlohmann::json j;
  j["converged"] = report.converged;
  j["iterations"] = report.iterations;
  j["final_rr"] = report.final_rr;
  j["termination_reason"] = report.termination_reason;
  auto trace = nlohmann::json::array();
  for (const auto& [it, rr] : report.residual_trace) {
    trace.push_back({{"iteration", it}, {"rr", rr}});
  }
  j["residual_trace"] = std::move(trace);
  j["instruction_log_length"] = report.instruction_log_length;

  if (with_counters) {
    j["reads_per_iteration"] = report.reads_per_iteration;
    j["writes_per_iteration"] = report.writes_per_iteration;
    j["padding_count"] = report.padding_count;
    j["estimated_cycles"] = report.estimated_cycles;
    auto counters = nlohmann::json::array();
    for (const auto& c : report.counters) {
      counters.push_back({{"iteration", c.rp},
                          {"reads", c.reads},
                          {"writes", c.writes},
                          {"phase_reads", {c.phase_reads[0], c.phase_reads[1],
                                           c.phase_reads[2]}},
                          {"phase_writes",
                           {c.phase_writes[0], c.phase_writes[1],
                            c.phase_writes[2]}}});
    }
    j["counters"] = std::move(counters);
    j["writes_issued"] = report.writes_issued;
    j["write_responses"] = report.write_responses;
    j["parity_flips"] = report.parity_flips;
    j["fsm_cycles"] = report.fsm_cycles;
  } else {
    j["reads_per_iteration"] = nullptr;
    j["writes_per_iteration"] = nullptr;
    j["padding_count"] = nullptr;
    j["estimated_cycles"] = nullptr;
    j["counters"] = nullptr;
  }
  return j.dump(2);
}

void emit_report_json(const SolverReport& report, const std::string& path,
                      bool with_counters) {
  std::ofstream f(path);
  if (!f) throw SolverError("cannot write report file: " + path);
  f << report_to_json(report, with_counters) << "\n";
  if (!f.good()) throw SolverError("write failed: " + path);
}

std::vector<std::pair<std::int64_t, double>> trace_from_oracle(
    const OracleTrace& t) {
  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(t.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    out.emplace_back(static_cast<std::int64_t>(i) - 1, t.records[i].rr);
  }
  return out;
}

}  // namespace jpcg
