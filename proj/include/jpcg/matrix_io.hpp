#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jpcg {

using index_t = std::int64_t;

struct MatrixIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CooEntry {
  index_t row = 0;
  index_t col = 0;
  double value = 0.0;
  friend bool operator==(const CooEntry&, const CooEntry&) = default;
};

/// Coordinate-form matrix. Entries are kept canonical: sorted row-major,
/// no duplicate (row, col) pairs.
struct CooMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  std::vector<CooEntry> entries;
  // true while the file's lower/upper triangle is the only stored half
  bool symmetric_stored = false;
};

/// Compressed sparse row storage of a square matrix, FP64 values.
struct CsrMatrix {
  index_t n = 0;
  std::vector<index_t> row_ptr;  // length n+1, non-decreasing
  std::vector<index_t> col_idx;  // strictly increasing within a row
  std::vector<double> values;

  index_t nnz() const { return static_cast<index_t>(values.size()); }
};

/// Diagonal preconditioner stored as its diagonal; applying the inverse is
/// an element-wise divide.
struct JacobiPreconditioner {
  std::vector<double> diag;
};

// Matrix Market coordinate format, ASCII. Accepts real/integer/pattern
// fields with general or symmetric symmetry; pattern entries get value 1.0.
// Indices are converted to 0-based. Duplicate entries with identical values
// are collapsed; conflicting duplicates are an error.
CooMatrix parse_matrix_market(std::istream& in);
CooMatrix parse_matrix_market(const std::string& text);
CooMatrix parse_matrix_market_file(const std::string& path);

// Mirrors every off-diagonal (i,j,v) to (j,i,v); diagonal entries stay
// single. Errors when a mirrored entry conflicts with a stored one.
CooMatrix expand_symmetric(const CooMatrix& m);

CsrMatrix to_csr(const CooMatrix& m);

// Inverse of to_csr, mostly for round-trip checks and dumps.
CooMatrix to_coo(const CsrMatrix& a);

JacobiPreconditioner extract_jacobi(const CsrMatrix& a);

// Reports dimension mismatches, exact asymmetry, and zero diagonal entries.
// Returns an empty vector when the system is a valid solver input. Does not
// attempt to certify positive definiteness.
std::vector<std::string> validate_solver_input(const CsrMatrix& a,
                                               std::span<const double> b,
                                               std::span<const double> x0);

}  // namespace jpcg
