#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace jpcg {

struct IsaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr unsigned kQueueIdLimit = 8;  // q_id is a 3-bit field

/// Vector control instruction: tells a vector control module where and how
/// to deliver a vector. base_addr and len are in 64-bit words.
struct InstVCtrl {
  bool rd = false;
  bool wr = false;
  std::int64_t base_addr = 0;
  std::int64_t len = 0;
  std::uint8_t q_id = 0;  // destination (rd) or source (wr) module index
  friend bool operator==(const InstVCtrl&, const InstVCtrl&) = default;
};

/// Computation instruction. No opcode: a computation module has exactly one
/// function; alpha carries the scalar it needs, q_id selects output routing.
struct InstCmp {
  std::int64_t len = 0;
  double alpha = 0.0;
  std::uint8_t q_id = 0;
  friend bool operator==(const InstCmp&, const InstCmp&) = default;
};

/// Memory instruction: moves a vector between an off-chip channel and a
/// vector control module.
struct InstRdWr {
  bool rd = false;
  bool wr = false;
  std::int64_t base_addr = 0;
  std::int64_t len = 0;
  friend bool operator==(const InstRdWr&, const InstRdWr&) = default;
};

enum class MemOp : std::uint8_t { Read, Write };

/// Emitted exactly once per completed memory write instruction; the
/// controller uses it to keep read-after-write ordering across channels.
struct MemResponse {
  int channel = 0;
  MemOp op = MemOp::Write;
  std::int64_t len = 0;
  friend bool operator==(const MemResponse&, const MemResponse&) = default;
};

using Instruction = std::variant<InstVCtrl, InstCmp, InstRdWr>;

InstVCtrl make_vctrl(bool rd, bool wr, std::int64_t base_addr,
                     std::int64_t len, unsigned q_id);
InstCmp make_cmp(std::int64_t len, double alpha, unsigned q_id);
InstRdWr make_rdwr(bool rd, bool wr, std::int64_t base_addr, std::int64_t len);

// One line per instruction, stable across runs, parseable back losslessly:
//   "VEC rd base=0 len=100 q=1"
//   "CMP len=100 alpha=2 q=1"
//   "MEM rd base=0 len=100"
std::string render_trace(const Instruction& inst);
Instruction parse_trace(std::string_view line);

}  // namespace jpcg
