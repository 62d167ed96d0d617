#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "jpcg/matrix_io.hpp"
#include "test_support.hpp"

using namespace jpcg;

TEST_CASE("parse_matrix_market reads a symmetric coordinate file") {
  CooMatrix m = parse_matrix_market(std::string(testsupport::kTiny2x2));
  CHECK(m.n_rows == 2);
  CHECK(m.n_cols == 2);
  CHECK(m.symmetric_stored);
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].row == 0);
  CHECK(m.entries[0].col == 0);
  CHECK(m.entries[0].value == 4.0);
}

TEST_CASE("parse_matrix_market entry count mismatch") {
  std::string text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n";
  CHECK_THROWS_WITH_AS(parse_matrix_market(text),
                       doctest::Contains("entry count mismatch"),
                       MatrixIoError);
}

TEST_CASE("parse_matrix_market rejects bad headers and bounds") {
  CHECK_THROWS_AS(parse_matrix_market(std::string("%%NotMM matrix\n1 1 0\n")),
                  MatrixIoError);
  CHECK_THROWS_AS(
      parse_matrix_market(std::string(
          "%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 0\n")),
      MatrixIoError);
  CHECK_THROWS_AS(
      parse_matrix_market(std::string(
          "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n")),
      MatrixIoError);
  CHECK_THROWS_AS(parse_matrix_market(std::string(
                      "%%MatrixMarket matrix coordinate real general\n"
                      "2 2 1\n3 1 1.0\n")),
                  MatrixIoError);
}

TEST_CASE("parse_matrix_market pattern files get value 1.0") {
  CooMatrix m = parse_matrix_market(std::string(
      "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 2\n1 1\n2 1\n"));
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].value == 1.0);
  CHECK(m.entries[1].value == 1.0);
}

TEST_CASE("duplicate entries: identical collapse, conflicting reject") {
  std::string base = "%%MatrixMarket matrix coordinate real general\n2 2 3\n";
  CooMatrix ok = parse_matrix_market(base + "1 1 4\n1 1 4\n2 2 3\n");
  CHECK(ok.entries.size() == 2);
  CHECK_THROWS_WITH_AS(
      parse_matrix_market(base + "1 1 4\n1 1 5\n2 2 3\n"),
      doctest::Contains("conflicting duplicate"), MatrixIoError);
}

TEST_CASE("expand_symmetric mirrors off-diagonal entries") {
  CooMatrix m = parse_matrix_market(std::string(testsupport::kTiny2x2));
  CooMatrix e = expand_symmetric(m);
  CHECK_FALSE(e.symmetric_stored);
  REQUIRE(e.entries.size() == 4);
  // canonical row-major order
  CHECK(e.entries[1].row == 0);
  CHECK(e.entries[1].col == 1);
  CHECK(e.entries[1].value == 1.0);
}

TEST_CASE("expand_symmetric leaves an all-diagonal matrix unchanged") {
  CooMatrix m;
  m.n_rows = m.n_cols = 3;
  m.symmetric_stored = true;
  m.entries = {{0, 0, 1.0}, {1, 1, 2.0}, {2, 2, 3.0}};
  CHECK(expand_symmetric(m).entries.size() == 3);
}

TEST_CASE("to_csr lays out the expanded 2x2") {
  CsrMatrix a = testsupport::tiny_2x2();
  CHECK(a.row_ptr == std::vector<index_t>{0, 2, 4});
  CHECK(a.col_idx == std::vector<index_t>{0, 1, 0, 1});
  CHECK(a.values == std::vector<double>{4, 1, 1, 3});
}

TEST_CASE("to_csr single entry") {
  CooMatrix m;
  m.n_rows = m.n_cols = 1;
  m.entries = {{0, 0, 5.0}};
  CsrMatrix a = to_csr(m);
  CHECK(a.row_ptr == std::vector<index_t>{0, 1});
}

TEST_CASE("to_csr rejects non-square input") {
  CooMatrix m;
  m.n_rows = 2;
  m.n_cols = 3;
  CHECK_THROWS_AS(to_csr(m), MatrixIoError);
}

namespace {

// Independent canonicalization for the round-trip oracle.
std::vector<CooEntry> canonical(std::vector<CooEntry> v) {
  std::sort(v.begin(), v.end(), [](const CooEntry& a, const CooEntry& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  return v;
}

}  // namespace

TEST_CASE("csr round-trip preserves a random 50x50 coo exactly") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<index_t> idx(0, 49);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  CooMatrix m;
  m.n_rows = m.n_cols = 50;
  std::set<std::pair<index_t, index_t>> used;
  while (m.entries.size() < 300) {
    index_t i = idx(rng), j = idx(rng);
    if (!used.insert({i, j}).second) continue;
    m.entries.push_back({i, j, val(rng)});
  }
  std::vector<CooEntry> expect = canonical(m.entries);
  CooMatrix back = to_coo(to_csr(m));
  REQUIRE(back.entries.size() == expect.size());
  for (std::size_t k = 0; k < expect.size(); ++k) {
    CHECK(back.entries[k].row == expect[k].row);
    CHECK(back.entries[k].col == expect[k].col);
    CHECK(testsupport::bits_equal(back.entries[k].value, expect[k].value));
  }
}

TEST_CASE("extract_jacobi") {
  CsrMatrix a = testsupport::tiny_2x2();
  JacobiPreconditioner m = extract_jacobi(a);
  CHECK(m.diag == std::vector<double>{4.0, 3.0});

  SUBCASE("zero diagonal is singular") {
    a.values[3] = 0.0;  // A[1][1]
    CHECK_THROWS_WITH_AS(extract_jacobi(a),
                         doctest::Contains("singular Jacobi preconditioner"),
                         MatrixIoError);
  }
  SUBCASE("missing diagonal is singular") {
    CooMatrix m2;
    m2.n_rows = m2.n_cols = 2;
    m2.entries = {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}};
    CHECK_THROWS_AS(extract_jacobi(to_csr(m2)), MatrixIoError);
  }
}

TEST_CASE("extract_jacobi identity") {
  CooMatrix m;
  m.n_rows = m.n_cols = 10;
  for (index_t i = 0; i < 10; ++i) m.entries.push_back({i, i, 1.0});
  JacobiPreconditioner p = extract_jacobi(to_csr(m));
  CHECK(p.diag == std::vector<double>(10, 1.0));
}

TEST_CASE("validate_solver_input") {
  CsrMatrix a = testsupport::tiny_2x2();
  std::vector<double> b{1.0, 2.0}, x0{0.0, 0.0};
  CHECK(validate_solver_input(a, b, x0).empty());

  SUBCASE("asymmetry is reported with the coordinate") {
    a.values[1] = 2.0;  // A[0][1] != A[1][0]
    auto d = validate_solver_input(a, b, x0);
    REQUIRE_FALSE(d.empty());
    CHECK(d[0].find("asymmetric at (0,1)") != std::string::npos);
  }
  SUBCASE("dimension mismatch") {
    std::vector<double> b3{1.0, 2.0, 3.0};
    auto d = validate_solver_input(a, b3, x0);
    REQUIRE_FALSE(d.empty());
    CHECK(d[0].find("dimension mismatch") != std::string::npos);
  }
}

TEST_CASE("SPD pipeline yields strictly positive diagonals") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CsrMatrix a = testsupport::random_spd(16, seed);
    JacobiPreconditioner p = extract_jacobi(a);
    for (double d : p.diag) CHECK(d > 0.0);
  }
}
