#pragma once

#include <span>
#include <string>

#include "jpcg/controller.hpp"
#include "jpcg/reference.hpp"

namespace jpcg {

// CSV with header "iteration,rr"; rr is rendered with 17 significant digits
// so a re-parse reproduces the FP64 bits.
void emit_trace_csv(std::span<const std::pair<std::int64_t, double>> trace,
                    const std::string& path);

std::string trace_to_csv(
    std::span<const std::pair<std::int64_t, double>> trace);

// Full SolverReport as JSON. Counter fields are null for reference runs.
std::string report_to_json(const SolverReport& report, bool with_counters);
void emit_report_json(const SolverReport& report, const std::string& path,
                      bool with_counters = true);

std::vector<std::pair<std::int64_t, double>> trace_from_oracle(
    const OracleTrace& t);

}  // namespace jpcg
