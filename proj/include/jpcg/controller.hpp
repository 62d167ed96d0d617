#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jpcg/isa.hpp"
#include "jpcg/matrix_io.hpp"
#include "jpcg/spmv.hpp"
#include "jpcg/stream_runtime.hpp"

namespace jpcg {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScheduleMode : std::uint8_t { Naive, Decentralized };

struct SolverConfig {
  double tol = 1e-12;               // threshold on rr = |r|^2, no square root
  std::int64_t max_iters = 20000;
  PrecisionScheme scheme = PrecisionScheme::DefaultFP64;
  ScheduleMode schedule_mode = ScheduleMode::Decentralized;
  SchedulerKind scheduler = SchedulerKind::Deterministic;
  std::map<std::string, std::size_t> fifo_depths;  // per-channel overrides
  int n_channels = 16;
  int n_pes = 8;
  int dep_distance = 5;
  bool hardware_faithful = false;
  std::uint32_t left_divide_latency = 33;  // M5 pipeline depth
  std::uint32_t delay_buffer_len = 8;
  bool early_exit = true;   // skip M5..M7 on the converged iteration
  bool record_transcripts = false;

  void check() const {
    if (!(tol > 0)) throw SolverError("tol must be > 0");
    if (max_iters < 1) throw SolverError("max_iters must be >= 1");
    if (n_channels < 1 || n_pes < 1) throw SolverError("bad fan-out");
    if (dep_distance < 1) throw SolverError("dep_distance must be >= 1");
  }
};

/// Main-loop scalars. The iteration counter rp starts at -1: the merged
/// initialization pass runs as the first loop trip.
struct ScalarState {
  double rz = 0.0;
  double rr = 0.0;
  double rz_new = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t rp = -1;
};

struct IterationCounters {
  std::int64_t rp = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t phase_reads[3] = {0, 0, 0};
  std::uint64_t phase_writes[3] = {0, 0, 0};
};

struct SolverReport {
  bool converged = false;
  std::int64_t iterations = 0;
  double final_rr = 0.0;
  std::vector<std::pair<std::int64_t, double>> residual_trace;  // (rp, rr)
  std::vector<IterationCounters> counters;  // streamed runs only
  std::uint64_t instruction_log_length = 0;
  std::uint64_t padding_count = 0;
  std::uint64_t estimated_cycles = 0;
  std::vector<std::string> instruction_log;  // rendered trace lines
  std::string termination_reason;            // "converged" | "budget"
  std::vector<double> alpha_trace;  // per trip, 1.0 at rp == -1
  std::vector<double> beta_trace;   // per trip, 0.0 at rp == -1 / skipped

  // Extra bookkeeping used by invariants and docs.
  std::map<std::string, std::uint64_t> write_responses;  // per vector
  std::map<std::string, std::uint64_t> writes_issued;    // per vector
  std::map<std::string, std::uint64_t> parity_flips;     // per binding
  std::map<std::string, std::uint64_t> fsm_cycles;       // per FSM
  std::vector<std::string> transcript;  // when recording was requested

  // Steady-state per-iteration access counts (max over non-init
  // iterations; the converged iteration runs reduced).
  std::uint64_t reads_per_iteration = 0;
  std::uint64_t writes_per_iteration = 0;
};

struct SolveResult {
  std::vector<double> x;
  std::vector<double> final_r;  // memory-resident r after the last write
  SolverReport report;
};

/// Runs the streamed dataflow solver: instruction-driven modules connected
/// by bounded FIFOs, a modeled off-chip memory with access counting, and
/// the selected precision scheme in the SpMV engine.
SolveResult run_jpcg(const CsrMatrix& a, std::span<const double> b,
                     std::span<const double> x0, const SolverConfig& cfg);

// alpha = rz / p_dot_ap, beta = rz_new / rz. Zero denominators are a CG
// breakdown.
std::pair<double, double> scalar_step(double rz, double rz_new,
                                      double p_dot_ap);

struct TerminationDecision {
  bool stop = false;
  std::string reason;  // "converged" | "budget"
};
TerminationDecision should_terminate(double rr, std::int64_t rp,
                                     const SolverConfig& cfg);

struct IssuedInstruction {
  std::string target;  // module the controller addresses; "mem" for the
                       // memory instruction a vector controller derives
  Instruction inst;
};

/// The ordered instruction bundle the controller issues for loop trip rp of
/// a problem with n rows, with the derived memory instruction appended
/// after each vector-control instruction. rp == -1 applies the
/// initialization skips (no M2, no M3); `converged` truncates the bundle
/// after the residual returns (no M5/M6/M7, r and x still written).
std::vector<IssuedInstruction> issue_sequence(std::int64_t rp, index_t n,
                                              ScheduleMode mode,
                                              bool converged = false);

}  // namespace jpcg
