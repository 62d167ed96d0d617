#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jpcg/matrix_io.hpp"
#include "jpcg/spmv.hpp"

namespace jpcg {

/// Per-iteration scalars of a sequential solve; index 0 is the
/// initialization record, so length = iterations + 1.
struct OracleTrace {
  struct Record {
    double rr;
    double alpha;
    double beta;
  };
  std::vector<Record> records;
  bool converged = false;
  std::vector<double> x;

  std::int64_t iterations() const {
    return static_cast<std::int64_t>(records.size()) - 1;
  }
};

// Plain row-major SpMV, left-to-right FP64 accumulation per row.
std::vector<double> spmv_reference(const CsrMatrix& a,
                                   std::span<const double> x);

// Scheme-emulating reference SpMV: the matrix is cast per the scheme, the
// input vector is read at the scheme's input precision, products and
// accumulation run at the scheme's output precision.
std::vector<double> spmv_reference_scheme(const CsrMatrix& a,
                                          std::span<const double> x,
                                          PrecisionScheme scheme);

/// Sequential textbook solve. The precision scheme applies to the SpMV step
/// only; every main-loop vector stays FP64. Dot products accumulate left to
/// right.
OracleTrace jpcg_reference(const CsrMatrix& a, std::span<const double> b,
                           std::span<const double> x0, double tol,
                           std::int64_t max_iters,
                           PrecisionScheme scheme =
                               PrecisionScheme::DefaultFP64);

struct TraceDivergence {
  std::int64_t first_divergence = -1;  // -1: within tolerance everywhere
  std::int64_t iteration_delta = 0;
};

// First position where the residual traces differ by more than rel_tol
// (relative to the larger value), plus the iteration-count difference.
TraceDivergence compare_traces(std::span<const double> rr1,
                               std::span<const double> rr2, double rel_tol);
TraceDivergence compare_traces(const OracleTrace& t1, const OracleTrace& t2,
                               double rel_tol);

}  // namespace jpcg
