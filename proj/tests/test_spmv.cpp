#include <doctest.h>

#include <bit>
#include <set>

#include "jpcg/reference.hpp"
#include "jpcg/spmv.hpp"
#include "test_support.hpp"

using namespace jpcg;

namespace {

// Exhaustive spacing oracle over one lane.
bool spacing_holds(const std::vector<ScheduledEntry>& lane, int dep) {
  for (std::size_t i = 0; i < lane.size(); ++i) {
    if (lane[i].noop) continue;
    for (std::size_t j = i + 1; j < lane.size() && j < i + std::size_t(dep);
         ++j) {
      if (!lane[j].noop && lane[j].row == lane[i].row) return false;
    }
  }
  return true;
}

std::multiset<std::tuple<index_t, index_t, std::uint64_t>> entry_multiset(
    const ScheduledNonzeros& s) {
  std::multiset<std::tuple<index_t, index_t, std::uint64_t>> out;
  for (const auto& lane : s.pe_entries) {
    for (const auto& e : lane) {
      if (!e.noop) {
        out.insert({e.row, e.col, std::bit_cast<std::uint64_t>(e.value)});
      }
    }
  }
  return out;
}

std::multiset<std::tuple<index_t, index_t, std::uint64_t>> csr_multiset(
    const CsrMatrix& a, PrecisionScheme scheme) {
  PrecisionValues v = cast_matrix(a, scheme);
  std::multiset<std::tuple<index_t, index_t, std::uint64_t>> out;
  for (index_t i = 0; i < a.n; ++i) {
    for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      out.insert({i, a.col_idx[k],
                  std::bit_cast<std::uint64_t>(
                      v.values[static_cast<std::size_t>(k)])});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("scheme precision table") {
  CHECK(scheme_bits(PrecisionScheme::DefaultFP64).matrix == 64);
  CHECK(scheme_bits(PrecisionScheme::MixedV1).output == 32);
  CHECK(scheme_bits(PrecisionScheme::MixedV2).input == 32);
  CHECK(scheme_bits(PrecisionScheme::MixedV2).output == 64);
  CHECK(scheme_bits(PrecisionScheme::MixedV3).matrix == 32);
  CHECK(scheme_bits(PrecisionScheme::MixedV3).input == 64);
  CHECK(scheme_from_name("mixed-v3") == PrecisionScheme::MixedV3);
  CHECK(scheme_name(PrecisionScheme::MixedV1) == "mixed-v1");
}

TEST_CASE("cast_matrix rounds to FP32 and keeps FP64 identity") {
  CooMatrix m;
  m.n_rows = m.n_cols = 2;
  m.entries = {{0, 0, 0.1}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}};
  CsrMatrix a = to_csr(m);

  PrecisionValues v3 = cast_matrix(a, PrecisionScheme::MixedV3);
  CHECK(v3.tag == Precision::F32);
  float f01 = static_cast<float>(0.1);
  CHECK(std::bit_cast<std::uint32_t>(f01) == 0x3DCCCCCDu);
  CHECK(v3.values[0] == static_cast<double>(f01));
  double rel = std::abs(v3.values[0] - 0.1) / 0.1;
  CHECK(rel == doctest::Approx(1.49e-9).epsilon(0.1));
  CHECK(v3.values[1] == 2.0);  // powers of two survive the cast

  PrecisionValues v64 = cast_matrix(a, PrecisionScheme::DefaultFP64);
  CHECK(testsupport::bits_equal(v64.values, a.values));
}

TEST_CASE("cast_matrix reports FP32 overflow with the coordinate") {
  CooMatrix m;
  m.n_rows = m.n_cols = 1;
  m.entries = {{0, 0, 1e200}};
  CHECK_THROWS_WITH_AS(cast_matrix(to_csr(m), PrecisionScheme::MixedV1),
                       doctest::Contains("(0, 0)"), SpmvError);
}

TEST_CASE("schedule_nonzeros identity needs no reorder or padding") {
  CooMatrix m;
  m.n_rows = m.n_cols = 8;
  for (index_t i = 0; i < 8; ++i) m.entries.push_back({i, i, double(i + 1)});
  ScheduledNonzeros s = schedule_nonzeros(to_csr(m), 1, 1, 3);
  CHECK(s.padding_count == 0);
  REQUIRE(s.pe_entries.size() == 1);
  REQUIRE(s.pe_entries[0].size() == 8);
  for (index_t i = 0; i < 8; ++i) CHECK(s.pe_entries[0][size_t(i)].row == i);
}

TEST_CASE("single dense row gets no-op spacing") {
  CooMatrix m;
  m.n_rows = m.n_cols = 5;
  for (index_t j = 0; j < 5; ++j) m.entries.push_back({0, j, 1.0});
  for (index_t i = 1; i < 5; ++i) m.entries.push_back({i, i, 1.0});

  ScheduledNonzeros s = schedule_nonzeros(to_csr(m), 1, 1, 3);
  for (const auto& lane : s.pe_entries) CHECK(spacing_holds(lane, 3));
  // Lane 0 holds row 0 (plus rows 1..4 spread mod 1... fan-out 1 keeps all);
  // five same-row entries at distance >= 3 force padding.
  CHECK(s.padding_count > 0);
  CHECK(entry_multiset(s) == csr_multiset(to_csr(m),
                                          PrecisionScheme::DefaultFP64));
}

TEST_CASE("scheduling preserves the nonzero multiset at full fan-out") {
  CsrMatrix a = testsupport::random_spd(40, 11);
  for (int dep : {1, 3, 5}) {
    ScheduledNonzeros s = schedule_nonzeros(a, 16, 8, dep);
    CHECK(entry_multiset(s) == csr_multiset(a, PrecisionScheme::DefaultFP64));
    for (const auto& lane : s.pe_entries) CHECK(spacing_holds(lane, dep));
  }
}

TEST_CASE("streamed spmv basics") {
  SUBCASE("identity returns x exactly") {
    CooMatrix m;
    m.n_rows = m.n_cols = 6;
    for (index_t i = 0; i < 6; ++i) m.entries.push_back({i, i, 1.0});
    CsrMatrix a = to_csr(m);
    auto x = testsupport::random_vector(6, 3);
    for (auto scheme : {PrecisionScheme::DefaultFP64, PrecisionScheme::MixedV3,
                        PrecisionScheme::MixedV2}) {
      ScheduledNonzeros s = schedule_nonzeros(a, 2, 2, 2, scheme);
      std::vector<double> y = spmv_streamed(s, x, scheme);
      if (scheme == PrecisionScheme::MixedV2) {
        // x is read at FP32; 1.0 * fp32(x) widened
        for (std::size_t i = 0; i < 6; ++i) {
          CHECK(y[i] == double(float(x[i])));
        }
      } else {
        CHECK(testsupport::bits_equal(y, x));
      }
    }
  }
  SUBCASE("2x2 small integers are exact") {
    CsrMatrix a = testsupport::tiny_2x2();
    ScheduledNonzeros s = schedule_nonzeros(a, 1, 1, 1);
    std::vector<double> y =
        spmv_streamed(s, std::vector<double>{1.0, 1.0},
                      PrecisionScheme::DefaultFP64);
    CHECK(y == std::vector<double>{5.0, 4.0});
  }
}

TEST_CASE("fp64 streamed spmv is bit-identical to the reference") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    CsrMatrix a = testsupport::random_spd(64, seed);
    auto x = testsupport::random_vector(64, seed + 100);
    std::vector<double> ref = spmv_reference(a, x);

    // single lane, in-order
    ScheduledNonzeros s1 = schedule_nonzeros(a, 1, 1, 1);
    CHECK(testsupport::bits_equal(
        spmv_streamed(s1, x, PrecisionScheme::DefaultFP64), ref));

    // full fan-out with dependency spacing: rows stay in one lane and keep
    // their within-row order, so the sums associate identically
    ScheduledNonzeros s2 = schedule_nonzeros(a, 16, 8, 5);
    CHECK(testsupport::bits_equal(
        spmv_streamed(s2, x, PrecisionScheme::DefaultFP64), ref));
  }
}

TEST_CASE("mixed schemes match the scheme-emulating reference bit-exactly") {
  CsrMatrix a = testsupport::random_spd(32, 9);
  auto x = testsupport::random_vector(32, 77);
  for (auto scheme : {PrecisionScheme::MixedV1, PrecisionScheme::MixedV2,
                      PrecisionScheme::MixedV3}) {
    ScheduledNonzeros s = schedule_nonzeros(a, 4, 2, 3, scheme);
    CHECK(testsupport::bits_equal(spmv_streamed(s, x, scheme),
                                  spmv_reference_scheme(a, x, scheme)));
  }
}

TEST_CASE("mixed-v3 deviation comes only from the matrix cast") {
  CsrMatrix a = testsupport::random_spd(24, 4);
  auto x = testsupport::random_vector(24, 5);
  // Oracle: cast the matrix, widen, then run plain FP64 reference SpMV.
  PrecisionValues cast = cast_matrix(a, PrecisionScheme::MixedV3);
  CsrMatrix a32 = a;
  a32.values = cast.values;
  std::vector<double> oracle = spmv_reference(a32, x);

  ScheduledNonzeros s = schedule_nonzeros(a, 1, 1, 1, PrecisionScheme::MixedV3);
  CHECK(testsupport::bits_equal(spmv_streamed(s, x, PrecisionScheme::MixedV3),
                                oracle));
}

TEST_CASE("hardware limit checks") {
  CooMatrix m;
  m.n_rows = m.n_cols = 1000;
  for (index_t i = 0; i < 1000; ++i) m.entries.push_back({i, i, 1.0});
  CsrMatrix a = to_csr(m);

  SUBCASE("functional mode always passes") {
    ScheduledNonzeros s = schedule_nonzeros(a, 1, 1, 1);
    CHECK(check_hw_limits(s, a.n, false).ok);
  }
  SUBCASE("n=1000 fits untiled") {
    ScheduledNonzeros s = schedule_nonzeros(a, 1, 1, 1);
    CHECK(check_hw_limits(s, a.n, true).ok);
  }
  SUBCASE("row field overflows at 2^18 rows in one partition") {
    CooMatrix big;
    big.n_rows = big.n_cols = index_t{1} << 18;
    big.entries = {{0, 0, 1.0}};
    ScheduledNonzeros s = schedule_nonzeros_tiled(to_csr(big), 1, 1, 1,
                                                  kXWindowDepth,
                                                  PrecisionScheme::DefaultFP64);
    HwLimitDiagnostics d = check_hw_limits(s, big.n_rows, true);
    CHECK_FALSE(d.ok);
    REQUIRE_FALSE(d.violations.empty());
    CHECK(d.violations[0].find("row index") != std::string::npos);
  }
  SUBCASE("untiled beyond the X window fails, tiling passes with 5 windows") {
    CooMatrix wide;
    wide.n_rows = wide.n_cols = 20000;
    wide.entries = {{0, 0, 1.0}, {19999, 19999, 1.0}};
    CsrMatrix aw = to_csr(wide);
    ScheduledNonzeros flat = schedule_nonzeros(aw, 1, 1, 1);
    CHECK_FALSE(check_hw_limits(flat, aw.n, true).ok);
    ScheduledNonzeros tiled = schedule_nonzeros_tiled(
        aw, 16, 8, 1, kXWindowDepth, PrecisionScheme::DefaultFP64);
    HwLimitDiagnostics d = check_hw_limits(tiled, aw.n, true);
    CHECK(d.ok);
    CHECK(d.n_windows == 5);
  }
}

TEST_CASE("tiled schedule computes the same product") {
  CsrMatrix a = testsupport::random_spd(48, 21);
  auto x = testsupport::random_vector(48, 22);
  ScheduledNonzeros tiled =
      schedule_nonzeros_tiled(a, 2, 2, 3, 16, PrecisionScheme::DefaultFP64);
  CHECK(entry_multiset(tiled) ==
        csr_multiset(a, PrecisionScheme::DefaultFP64));
  std::vector<double> y = spmv_streamed(tiled, x, PrecisionScheme::DefaultFP64);
  std::vector<double> ref = spmv_reference(a, x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("schedule dump has one line per slot") {
  CsrMatrix a = testsupport::tiny_2x2();
  ScheduledNonzeros s = schedule_nonzeros(a, 1, 1, 2);
  auto lines = dump_schedule(s);
  std::size_t slots = 0;
  for (const auto& lane : s.pe_entries) slots += lane.size();
  CHECK(lines.size() == slots);
}
