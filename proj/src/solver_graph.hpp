#pragma once

// Internal wiring of the streamed solver: the instruction-driven modules,
// the vector control routes, and the memory ports. Only controller.cpp and
// the test helpers include this.

#include <array>
#include <deque>
#include <optional>

#include "jpcg/compute.hpp"
#include "jpcg/controller.hpp"
#include "jpcg/isa.hpp"
#include "jpcg/spmv.hpp"
#include "jpcg/stream_runtime.hpp"

namespace jpcg::detail {

using DataChan = Channel<StreamElement>;
using InstChan = Channel<Instruction>;
using MemInstChan = Channel<InstRdWr>;
using ScalarChan = Channel<double>;
using RespChan = Channel<MemResponse>;

/// Either one off-chip channel or a ping-pong pair, behind one interface.
/// Writes always land on the write side; flip() swaps roles after the
/// iteration's write completes.
class MemoryPort {
 public:
  MemoryPort(std::string vector, bool double_channel, std::size_t capacity,
             int first_channel_id);

  const std::string& vector() const { return vector_; }
  bool is_double() const { return binding_.has_value(); }

  double read(std::int64_t addr);
  void write(std::int64_t addr, double v);
  void flip();

  int write_channel_id() const;
  std::uint64_t flip_count() const;
  std::uint64_t word_reads() const;
  std::uint64_t word_writes() const;
  void reset_counters();

  void preload_read_side(std::span<const double> data);
  std::span<const double> read_side_words() const;

 private:
  std::string vector_;
  std::optional<MemoryChannelModel> single_;
  std::optional<DoubleChannelBinding> binding_;
};

/// Shared per-solve bookkeeping. All module steps are serialized by the
/// scheduler (round-robin or the global lock), so plain fields suffice.
struct SolverStats {
  std::uint64_t iter_vector_reads = 0;
  std::uint64_t iter_vector_writes = 0;
  std::map<std::string, std::uint64_t> writes_issued;
  std::map<std::string, std::uint64_t> write_responses;
  std::uint64_t matrix_elements = 0;

  void reset_iteration() { iter_vector_reads = iter_vector_writes = 0; }
};

/// Memory read/write module: executes InstRdWr against its port, one word
/// per direction per cycle, and answers every write with one MemResponse.
class MemModule : public Module {
 public:
  MemModule(std::string name, MemoryPort& port, SolverStats& stats,
            MemInstChan& instr_in, DataChan& data_out, DataChan& data_in,
            RespChan& resp_out);

 protected:
  StepStatus try_cycle() override;

 private:
  MemoryPort& port_;
  SolverStats& stats_;
  MemInstChan& instr_in_;
  DataChan& data_out_;
  DataChan& data_in_;
  RespChan& resp_out_;

  enum class St { Idle, Run, Respond } st_ = St::Idle;
  InstRdWr inst_{};
  std::int64_t rd_done_ = 0;
  std::int64_t wr_done_ = 0;
};

/// One routing option of a vector control module, selected by q_id.
struct VcRoute {
  bool rd = false;
  bool wr = false;
  std::vector<DataChan*> rd_to;   // memory stream fan-out targets
  DataChan* wr_from = nullptr;    // module stream to store
  std::vector<DataChan*> wr_tee;  // extra copies of the stored stream
};

/// Vector control module: turns each InstVCtrl into one memory instruction
/// and moves the stream between the memory module and computation modules.
/// Read and write paths of a rd+wr instruction advance independently.
class VecCtrlModule : public Module {
 public:
  VecCtrlModule(std::string name, SolverStats& stats, InstChan& instr_in,
                MemInstChan& mem_instr, DataChan& mem_out, DataChan& mem_in,
                std::vector<VcRoute> routes);

  const std::vector<std::string>& issued_log() const { return issued_log_; }

 protected:
  StepStatus try_cycle() override;

 private:
  SolverStats& stats_;
  InstChan& instr_in_;
  MemInstChan& mem_instr_;
  DataChan& mem_out_;
  DataChan& mem_in_;
  std::vector<VcRoute> routes_;
  std::vector<std::string> issued_log_;

  enum class St { Idle, IssueMem, Run } st_ = St::Idle;
  InstVCtrl inst_{};
  const VcRoute* route_ = nullptr;
  std::int64_t rd_done_ = 0;
  std::int64_t wr_done_ = 0;
};

/// M1: consumes the whole input vector, runs the scheduled mixed-precision
/// SpMV, then streams the result. Output order constraints (no result
/// before the full input) follow the on-chip buffering of the engine.
class SpmvModule : public Module {
 public:
  SpmvModule(std::string name, const ScheduledNonzeros& sched,
             PrecisionScheme scheme, SolverStats& stats, InstChan& instr_in,
             DataChan& x_in, DataChan& y_out);

 protected:
  StepStatus try_cycle() override;

 private:
  const ScheduledNonzeros& sched_;
  PrecisionScheme scheme_;
  SolverStats& stats_;
  InstChan& instr_in_;
  DataChan& x_in_;
  DataChan& y_out_;

  enum class St { Idle, Collect, Emit } st_ = St::Idle;
  std::int64_t len_ = 0;
  std::int64_t collected_ = 0;
  std::int64_t emitted_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
  Precision out_tag_ = Precision::F64;
};

/// Streamed dot product (M2, M6, M8): strided delay-buffer accumulation at
/// II=1, then one scalar push after the left-to-right fold. Optionally
/// forwards its first input stream (the phase-2 r chain).
class DotModule : public Module {
 public:
  DotModule(std::string name, std::size_t delay_buffer_len,
            InstChan& instr_in, DataChan& in1, DataChan* in2,
            DataChan* forward1, ScalarChan& scalar_out);

 protected:
  StepStatus try_cycle() override;

 private:
  InstChan& instr_in_;
  DataChan& in1_;
  DataChan* in2_;
  DataChan* forward1_;
  ScalarChan& scalar_out_;
  DelayBuffer buf_;

  enum class St { Idle, Accumulate, Reduce } st_ = St::Idle;
  std::int64_t len_ = 0;
  std::int64_t i_ = 0;
};

/// Elementwise in1 +/- alpha*in2 at II=1 (M3, M4, M7); alpha == 0 passes
/// in1 through bit-exactly. The instruction carries the scalar; q_id picks
/// the route: second-input source, output target, and for M7 whether in2
/// (the old p) is forwarded on toward M3.
class AxpyModule : public Module {
 public:
  struct Route {
    DataChan* in2 = nullptr;       // per-route second input
    DataChan* out = nullptr;       // result stream
    DataChan* forward2 = nullptr;  // forwarded copy of in2
  };

  AxpyModule(std::string name, bool subtract, InstChan& instr_in,
             DataChan& in1, std::vector<Route> routes);

 protected:
  StepStatus try_cycle() override;

 private:
  bool subtract_;
  InstChan& instr_in_;
  DataChan& in1_;
  std::vector<Route> routes_;

  enum class St { Idle, Run } st_ = St::Idle;
  InstCmp inst_{};
  const Route* route_ = nullptr;
  std::int64_t i_ = 0;
};

/// M5: z = m \ r with a modeled pipeline of depth L on the z output and an
/// immediate r forward. A full stall (any blocked port) freezes the
/// pipeline, which is what makes the fast-FIFO depth bound tight.
class LeftDivModule : public Module {
 public:
  struct Route {
    DataChan* z_out = nullptr;
    DataChan* r_out = nullptr;
  };

  LeftDivModule(std::string name, std::uint32_t latency, InstChan& instr_in,
                DataChan& m_in, DataChan& r_in, std::vector<Route> routes);

 protected:
  StepStatus try_cycle() override;

 private:
  InstChan& instr_in_;
  DataChan& m_in_;
  DataChan& r_in_;
  std::vector<Route> routes_;
  PipelineStage stage_;

  enum class St { Idle, Run, Drain } st_ = St::Idle;
  InstCmp inst_{};
  const Route* route_ = nullptr;
  std::int64_t consumed_ = 0;
  std::int64_t emitted_ = 0;
};

struct ChannelDefaults {
  std::size_t data = 2;
  std::size_t instr = 8;
  std::size_t scalar = 2;
  std::size_t resp = 2;
};

/// Everything run_jpcg wires together, kept alive for the whole solve.
/// Members are ordered so stats and ports outlive the modules that
/// reference them.
struct SolverGraph {
  SolverStats stats;
  std::deque<MemoryPort> ports;  // p, r, x, ap, m (+ z in naive mode)
  DataflowGraph graph;

  // controller-facing channels
  std::map<std::string, InstChan*> instr;  // by module name
  ScalarChan* m2_scalar = nullptr;
  ScalarChan* m6_scalar = nullptr;
  ScalarChan* m8_scalar = nullptr;
  std::map<std::string, RespChan*> resps;  // by vector name
  std::vector<VecCtrlModule*> vecctrls;

  MemoryPort& port(std::string_view vec);
};

std::size_t channel_depth(const SolverConfig& cfg, const std::string& name,
                          std::size_t fallback);

// Builds the decentralized or naive graph for a problem of size n. The
// schedule must outlive the graph.
std::unique_ptr<SolverGraph> build_solver_graph(const SolverConfig& cfg,
                                                index_t n,
                                                const ScheduledNonzeros& sched);

}  // namespace jpcg::detail
