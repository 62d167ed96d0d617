#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jpcg/matrix_io.hpp"
#include "jpcg/stream_runtime.hpp"

namespace jpcg {

struct SpmvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Precision assignment for y = A x: (matrix, input vector, output vector).
enum class PrecisionScheme : std::uint8_t {
  DefaultFP64,  // (64, 64, 64)
  MixedV1,      // (32, 32, 32)
  MixedV2,      // (32, 32, 64)
  MixedV3,      // (32, 64, 64)
};

struct SchemeBits {
  unsigned matrix;
  unsigned input;
  unsigned output;
};
SchemeBits scheme_bits(PrecisionScheme s);
std::string scheme_name(PrecisionScheme s);
PrecisionScheme scheme_from_name(std::string_view name);

/// Matrix values at the scheme's matrix precision. FP32 values are stored
/// widened back to double (the widening is exact); tag records the storage
/// precision.
struct PrecisionValues {
  Precision tag = Precision::F64;
  std::vector<double> values;
};

// Rounds values to FP32 (round-to-nearest-even) for the 32-bit schemes;
// DefaultFP64 is the identity. A finite value that overflows to FP32
// infinity is an error naming the offending coordinate.
PrecisionValues cast_matrix(const CsrMatrix& a, PrecisionScheme scheme);

struct ScheduledEntry {
  index_t row = 0;
  index_t col = 0;
  double value = 0.0;
  bool noop = false;  // padding: +0.0 targeted at row 0, excluded from checks
};

/// Nonzeros distributed over channel/PE lanes and locally reordered so that
/// two entries accumulating into the same row sit >= dep_distance apart.
struct ScheduledNonzeros {
  int n_channels = 16;
  int n_pes_per_channel = 8;
  index_t n = 0;
  int dep_distance = 1;
  Precision value_tag = Precision::F64;
  bool tiled = false;
  index_t window_size = 0;  // column window when tiled
  std::vector<std::vector<ScheduledEntry>> pe_entries;  // [channel*pes + pe]
  std::uint64_t padding_count = 0;

  int fanout() const { return n_channels * n_pes_per_channel; }
};

// Rows are dealt round-robin: entry (r, c) goes to lane r mod fanout. Within
// one lane the stream is greedily reordered just enough to satisfy the
// same-row spacing; no-op padding fills the gaps reordering cannot.
ScheduledNonzeros schedule_nonzeros(const CsrMatrix& a, int n_channels,
                                    int n_pes, int dep_distance,
                                    PrecisionScheme scheme =
                                        PrecisionScheme::DefaultFP64);

// Column-tiled variant for hardware-faithful runs: each lane's stream is
// split into windows of `window_size` columns, spacing enforced per lane.
ScheduledNonzeros schedule_nonzeros_tiled(const CsrMatrix& a, int n_channels,
                                          int n_pes, int dep_distance,
                                          index_t window_size,
                                          PrecisionScheme scheme);

/// y = A x evaluated in the scheduled order at the scheme's precisions.
/// Lanes are combined in ascending lane index; the result is row order.
std::vector<double> spmv_streamed(const ScheduledNonzeros& sched,
                                  std::span<const double> x,
                                  PrecisionScheme scheme);

inline constexpr index_t kXWindowDepth = 4096;   // on-chip X memory
inline constexpr index_t kYPartitionDepth = 24576;  // on-chip Y memory
inline constexpr index_t kColIndexBits = 14;
inline constexpr index_t kRowIndexBits = 18;

struct HwLimitDiagnostics {
  bool ok = true;
  index_t n_windows = 1;
  std::vector<std::string> violations;
};

// Functional mode always passes. Hardware-faithful mode requires every
// column window to fit the X depth (tiling supplies the windows) and every
// lane-local row index to fit the row field.
HwLimitDiagnostics check_hw_limits(const ScheduledNonzeros& sched, index_t n,
                                   bool hardware_faithful);

// "pe_id seq row col value-hex" lines, one per scheduled slot.
std::vector<std::string> dump_schedule(const ScheduledNonzeros& sched);

}  // namespace jpcg
