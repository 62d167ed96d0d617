#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jpcg {

struct ComputeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cyclic buffer of partial sums that breaks the accumulation dependency in
/// streamed dot products: phase I strides terms across the slots, phase II
/// folds the slots left to right.
class DelayBuffer {
 public:
  explicit DelayBuffer(std::size_t len = 8) : partials_(len, 0.0) {}

  std::size_t length() const { return partials_.size(); }
  void clear() { partials_.assign(partials_.size(), 0.0); }

  void accumulate(std::uint64_t i, double term) {
    partials_[i % partials_.size()] += term;
  }

  double reduce() const {
    double total = partials_[0];
    for (std::size_t i = 1; i < partials_.size(); ++i) total += partials_[i];
    return total;
  }

 private:
  std::vector<double> partials_;
};

// Streamed dot product: phase I strided accumulation, phase II left-to-right
// fold of the partials. Both streams must deliver exactly len elements.
double dot_product(std::span<const double> xs, std::span<const double> ys,
                   std::size_t len, std::size_t delay_buffer_len = 8);

// x <- x + alpha * p, one separate multiply and add per element (no FMA).
// alpha == 0 passes x through untouched.
std::vector<double> update_x(std::span<const double> x,
                             std::span<const double> p, double alpha,
                             std::size_t len);

// r <- r - alpha * ap.
std::vector<double> update_r(std::span<const double> r,
                             std::span<const double> ap, double alpha,
                             std::size_t len);

// z = r / m elementwise; a zero divisor aborts the solve with the index.
std::vector<double> left_divide(std::span<const double> m,
                                std::span<const double> r, std::size_t len);

// p <- z + beta * p. beta == 0 passes z through bit-exactly (also the
// initialization path p <- z).
std::vector<double> update_p(std::span<const double> z,
                             std::span<const double> p, double beta,
                             std::size_t len);

/// Vectors the solver moves through memory and streams. z is never
/// memory-backed in the decentralized schedule: it is recomputed instead.
enum class VectorId : std::uint8_t { P, R, X, Ap, M, Z };
std::string_view vector_name(VectorId v);

/// One scheduling state of a vector control module: a memory operation and
/// the computation module it serves.
struct VecCtrlState {
  enum class Op : std::uint8_t { Rd, RdWr, Wr } op;
  std::string target;  // module the vector is delivered to / taken from
};

/// The cyclic per-iteration state list of a vector control module.
struct VecCtrlFsm {
  VectorId vector;
  std::vector<VecCtrlState> states;
  std::size_t current = 0;
  std::uint64_t completed_cycles = 0;

  bool at_initial() const { return current == 0; }
  void advance() {
    current = (current + 1) % states.size();
    if (current == 0) ++completed_cycles;
  }
};

/// One scheduling state of a computation module: input streams consumed and
/// output streams produced with their destinations.
struct ComputeState {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

struct ComputeFsm {
  std::string module;  // M1..M8
  std::vector<ComputeState> states;
  std::size_t current = 0;
  std::uint64_t completed_cycles = 0;

  bool at_initial() const { return current == 0; }
  void advance() {
    current = (current + 1) % states.size();
    if (current == 0) ++completed_cycles;
  }
};

// The decentralized scheduling tables: per-vector memory operation
// sequences and per-module stream wirings for one steady iteration.
std::vector<VecCtrlFsm> decentralized_vecctrl_fsms();
std::vector<ComputeFsm> decentralized_compute_fsms();

}  // namespace jpcg
