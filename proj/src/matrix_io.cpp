#include "jpcg/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace jpcg {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Sort row-major, collapse identical duplicates, reject conflicting ones.
void canonicalize(std::vector<CooEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const CooEntry& a, const CooEntry& b) {
              return std::tie(a.row, a.col) < std::tie(b.row, b.col);
            });
  std::size_t out = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (out > 0 && entries[out - 1].row == entries[i].row &&
        entries[out - 1].col == entries[i].col) {
      if (std::bit_cast<std::uint64_t>(entries[out - 1].value) !=
          std::bit_cast<std::uint64_t>(entries[i].value)) {
        throw MatrixIoError(
            "conflicting duplicate entry at (" + std::to_string(entries[i].row) +
            ", " + std::to_string(entries[i].col) + ")");
      }
      continue;  // identical duplicate, drop
    }
    entries[out++] = entries[i];
  }
  entries.resize(out);
}

}  // namespace

CooMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MatrixIoError("empty input");

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") {
    throw MatrixIoError("malformed header: missing %%MatrixMarket banner");
  }
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix" || format != "coordinate") {
    throw MatrixIoError("unsupported header: only 'matrix coordinate' input");
  }
  const bool pattern = field == "pattern";
  if (field != "real" && field != "integer" && !pattern) {
    throw MatrixIoError("unsupported field '" + field +
                        "': need real, integer, or pattern");
  }
  if (symmetry == "skew-symmetric" || symmetry == "hermitian") {
    throw MatrixIoError("unsupported symmetry '" + symmetry +
                        "': the solver needs real symmetric input");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw MatrixIoError("unsupported symmetry '" + symmetry + "'");
  }

  // Size line, after comments.
  index_t n_rows = 0, n_cols = 0, nnz = 0;
  for (;;) {
    if (!std::getline(in, line)) throw MatrixIoError("missing size line");
    if (line.empty() || line[0] == '%') continue;
    std::istringstream size_line(line);
    if (!(size_line >> n_rows >> n_cols >> nnz)) {
      throw MatrixIoError("malformed size line: '" + line + "'");
    }
    break;
  }
  if (n_rows < 0 || n_cols < 0 || nnz < 0) {
    throw MatrixIoError("negative dimension in size line");
  }

  CooMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.symmetric_stored = symmetry == "symmetric";
  m.entries.reserve(static_cast<std::size_t>(nnz));

  index_t seen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream entry_line(line);
    index_t r = 0, c = 0;
    double v = 1.0;
    if (!(entry_line >> r >> c)) {
      throw MatrixIoError("malformed entry line: '" + line + "'");
    }
    if (!pattern && !(entry_line >> v)) {
      throw MatrixIoError("missing value on entry line: '" + line + "'");
    }
    if (r < 1 || r > n_rows || c < 1 || c > n_cols) {
      throw MatrixIoError("index out of declared bounds on line: '" + line +
                          "'");
    }
    ++seen;
    if (seen > nnz) break;  // counted below as a mismatch
    m.entries.push_back({r - 1, c - 1, v});
  }
  if (seen != nnz) {
    throw MatrixIoError("entry count mismatch: declared " +
                        std::to_string(nnz) + ", found " +
                        std::to_string(seen));
  }

  canonicalize(m.entries);
  return m;
}

CooMatrix parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

CooMatrix parse_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MatrixIoError("cannot open matrix file: " + path);
  return parse_matrix_market(in);
}

CooMatrix expand_symmetric(const CooMatrix& m) {
  if (!m.symmetric_stored) {
    throw MatrixIoError("expand_symmetric: input is not symmetric-stored");
  }
  CooMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.symmetric_stored = false;
  out.entries.reserve(m.entries.size() * 2);
  for (const CooEntry& e : m.entries) {
    out.entries.push_back(e);
    if (e.row != e.col) out.entries.push_back({e.col, e.row, e.value});
  }
  canonicalize(out.entries);
  return out;
}

CsrMatrix to_csr(const CooMatrix& m) {
  if (m.n_rows != m.n_cols) {
    throw MatrixIoError("to_csr: matrix is not square (" +
                        std::to_string(m.n_rows) + " x " +
                        std::to_string(m.n_cols) + ")");
  }
  if (m.symmetric_stored) {
    throw MatrixIoError("to_csr: expand the symmetric storage first");
  }
  std::vector<CooEntry> entries = m.entries;
  canonicalize(entries);

  CsrMatrix a;
  a.n = m.n_rows;
  a.row_ptr.assign(static_cast<std::size_t>(a.n) + 1, 0);
  a.col_idx.resize(entries.size());
  a.values.resize(entries.size());
  for (const CooEntry& e : entries) {
    ++a.row_ptr[static_cast<std::size_t>(e.row) + 1];
  }
  for (std::size_t i = 1; i < a.row_ptr.size(); ++i) {
    a.row_ptr[i] += a.row_ptr[i - 1];
  }
  // Entries are row-major sorted, so a single pass fills CSR in order and
  // values stay bit-identical.
  std::vector<index_t> next(a.row_ptr.begin(), a.row_ptr.end() - 1);
  for (const CooEntry& e : entries) {
    index_t slot = next[static_cast<std::size_t>(e.row)]++;
    a.col_idx[static_cast<std::size_t>(slot)] = e.col;
    a.values[static_cast<std::size_t>(slot)] = e.value;
  }
  return a;
}

CooMatrix to_coo(const CsrMatrix& a) {
  CooMatrix m;
  m.n_rows = a.n;
  m.n_cols = a.n;
  m.symmetric_stored = false;
  m.entries.reserve(a.values.size());
  for (index_t i = 0; i < a.n; ++i) {
    for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      m.entries.push_back({i, a.col_idx[k], a.values[k]});
    }
  }
  return m;
}

JacobiPreconditioner extract_jacobi(const CsrMatrix& a) {
  JacobiPreconditioner m;
  m.diag.assign(static_cast<std::size_t>(a.n), 0.0);
  std::vector<bool> found(static_cast<std::size_t>(a.n), false);
  for (index_t i = 0; i < a.n; ++i) {
    for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      if (a.col_idx[k] == i) {
        m.diag[static_cast<std::size_t>(i)] = a.values[k];
        found[static_cast<std::size_t>(i)] = true;
        break;
      }
    }
  }
  for (index_t i = 0; i < a.n; ++i) {
    if (!found[static_cast<std::size_t>(i)] ||
        m.diag[static_cast<std::size_t>(i)] == 0.0) {
      throw MatrixIoError("singular Jacobi preconditioner: zero diagonal at " +
                          std::to_string(i));
    }
  }
  return m;
}

std::vector<std::string> validate_solver_input(const CsrMatrix& a,
                                               std::span<const double> b,
                                               std::span<const double> x0) {
  std::vector<std::string> diags;
  if (a.row_ptr.size() != static_cast<std::size_t>(a.n) + 1) {
    diags.push_back("row_ptr length mismatch");
    return diags;
  }
  if (static_cast<index_t>(b.size()) != a.n) {
    diags.push_back("dimension mismatch: len(b)=" + std::to_string(b.size()) +
                    ", n=" + std::to_string(a.n));
  }
  if (static_cast<index_t>(x0.size()) != a.n) {
    diags.push_back("dimension mismatch: len(x0)=" +
                    std::to_string(x0.size()) + ", n=" + std::to_string(a.n));
  }

  auto stored = [&](index_t row, index_t col) -> const double* {
    const index_t* begin = a.col_idx.data() + a.row_ptr[row];
    const index_t* end = a.col_idx.data() + a.row_ptr[row + 1];
    const index_t* it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) return nullptr;
    return a.values.data() + (it - a.col_idx.data());
  };

  bool has_zero_diag = false;
  for (index_t i = 0; i < a.n && diags.size() < 32; ++i) {
    const double* d = stored(i, i);
    if ((d == nullptr || *d == 0.0) && !has_zero_diag) {
      diags.push_back("zero diagonal at " + std::to_string(i));
      has_zero_diag = true;
    }
    for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      index_t j = a.col_idx[k];
      if (j <= i) continue;  // check each pair once
      const double* t = stored(j, i);
      if (t == nullptr ||
          std::bit_cast<std::uint64_t>(*t) !=
              std::bit_cast<std::uint64_t>(a.values[k])) {
        diags.push_back("asymmetric at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
        if (diags.size() >= 32) break;
      }
    }
  }
  return diags;
}

}  // namespace jpcg
