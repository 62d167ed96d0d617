#include <doctest.h>

#include <cmath>

#include "jpcg/reference.hpp"
#include "test_support.hpp"

using namespace jpcg;

TEST_CASE("spmv_reference basics") {
  CooMatrix m;
  m.n_rows = m.n_cols = 4;
  for (index_t i = 0; i < 4; ++i) m.entries.push_back({i, i, 1.0});
  auto x = testsupport::random_vector(4, 1);
  CHECK(testsupport::bits_equal(spmv_reference(to_csr(m), x), x));

  CsrMatrix a = testsupport::tiny_2x2();
  CHECK(spmv_reference(a, std::vector<double>{1.0, 1.0}) ==
        std::vector<double>{5.0, 4.0});
  CHECK_THROWS_AS(spmv_reference(a, std::vector<double>{1.0}), SpmvError);
}

TEST_CASE("streamed fp64 spmv equals the reference on 100 random matrices") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CsrMatrix a = testsupport::random_spd(12 + seed % 20, seed);
    auto x = testsupport::random_vector(static_cast<std::size_t>(a.n),
                                        seed + 1000);
    ScheduledNonzeros s = schedule_nonzeros(a, 1, 1, 1);
    CHECK(testsupport::bits_equal(
        spmv_streamed(s, x, PrecisionScheme::DefaultFP64),
        spmv_reference(a, x)));
  }
}

TEST_CASE("jpcg_reference solves the 2x2 system") {
  CsrMatrix a = testsupport::tiny_2x2();
  std::vector<double> b{1.0, 2.0}, x0{0.0, 0.0};
  OracleTrace t = jpcg_reference(a, b, x0, 1e-12, 100);
  CHECK(t.converged);
  CHECK(t.iterations() <= 3);
  // direct inverse of [[4,1],[1,3]]
  CHECK(t.x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-10));
  CHECK(t.x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-10));
  CHECK(t.records.size() == std::size_t(t.iterations()) + 1);
}

TEST_CASE("identity system converges in one iteration") {
  CooMatrix m;
  m.n_rows = m.n_cols = 5;
  for (index_t i = 0; i < 5; ++i) m.entries.push_back({i, i, 1.0});
  auto b = testsupport::random_vector(5, 2);
  std::vector<double> x0(5, 0.0);
  OracleTrace t = jpcg_reference(to_csr(m), b, x0, 1e-12, 100);
  CHECK(t.converged);
  CHECK(t.iterations() == 1);
  CHECK(testsupport::bits_equal(t.x, b));
}

TEST_CASE("SPD systems converge within n+5 iterations") {
  for (std::uint64_t seed : {1u, 7u, 13u, 29u}) {
    index_t n = 16 + static_cast<index_t>(seed) % 48;
    CsrMatrix a = testsupport::random_spd(n, seed);
    std::vector<double> b(static_cast<std::size_t>(n), 1.0);
    std::vector<double> x0(static_cast<std::size_t>(n), 0.0);
    OracleTrace t = jpcg_reference(a, b, x0, 1e-12, 20000);
    CHECK(t.converged);
    CHECK(t.iterations() <= n + 5);
  }
}

TEST_CASE("mixed-v3 oracle is exactly fp64 on the cast matrix") {
  CsrMatrix a = testsupport::random_spd(24, 3);
  std::vector<double> b(24, 1.0), x0(24, 0.0);
  OracleTrace v3 = jpcg_reference(a, b, x0, 1e-12, 20000,
                                  PrecisionScheme::MixedV3);

  CsrMatrix a32 = a;
  a32.values = cast_matrix(a, PrecisionScheme::MixedV3).values;
  OracleTrace fp64_on_cast = jpcg_reference(a32, b, x0, 1e-12, 20000);

  REQUIRE(v3.records.size() == fp64_on_cast.records.size());
  for (std::size_t i = 0; i < v3.records.size(); ++i) {
    CHECK(testsupport::bits_equal(v3.records[i].rr,
                                  fp64_on_cast.records[i].rr));
  }
  CHECK(testsupport::bits_equal(v3.x, fp64_on_cast.x));
}

TEST_CASE("compare_traces") {
  std::vector<double> a{1.0, 0.5, 0.25};
  SUBCASE("identical traces do not diverge") {
    TraceDivergence d = compare_traces(a, a, 1e-12);
    CHECK(d.first_divergence == -1);
    CHECK(d.iteration_delta == 0);
  }
  SUBCASE("divergence index and length delta") {
    std::vector<double> b2{1.0, 0.5, 0.30, 0.1};
    TraceDivergence d = compare_traces(a, b2, 1e-3);
    CHECK(d.first_divergence == 2);
    CHECK(d.iteration_delta == -1);
  }
  SUBCASE("zeros compare equal") {
    std::vector<double> z1{1.0, 0.0}, z2{1.0, 0.0};
    CHECK(compare_traces(z1, z2, 1e-12).first_divergence == -1);
  }
}

TEST_CASE("precision schemes separate on a hard spectrum") {
  // 1D biharmonic stencil [1 -4 6 -4 1]: condition grows like (n/pi)^4, so
  // FP32 SpMV error floors the all-FP32 scheme well above |r|^2 = 1e-12
  // while the FP64-vector schemes still converge.
  const index_t n = 400;
  CooMatrix m;
  m.n_rows = m.n_cols = n;
  m.symmetric_stored = true;
  for (index_t i = 0; i < n; ++i) {
    m.entries.push_back({i, i, 6.0});
    if (i + 1 < n) m.entries.push_back({i + 1, i, -4.0});
    if (i + 2 < n) m.entries.push_back({i + 2, i, 1.0});
  }
  CsrMatrix a = to_csr(expand_symmetric(m));
  std::vector<double> b(static_cast<std::size_t>(n), 1.0);
  std::vector<double> x0(static_cast<std::size_t>(n), 0.0);

  OracleTrace fp64 = jpcg_reference(a, b, x0, 1e-12, 20000);
  OracleTrace v3 =
      jpcg_reference(a, b, x0, 1e-12, 20000, PrecisionScheme::MixedV3);
  OracleTrace v2 =
      jpcg_reference(a, b, x0, 1e-12, 20000, PrecisionScheme::MixedV2);
  OracleTrace v1 =
      jpcg_reference(a, b, x0, 1e-12, 20000, PrecisionScheme::MixedV1);

  CHECK(fp64.converged);
  CHECK(v3.converged);
  CHECK(std::llabs(v3.iterations() - fp64.iterations()) <= 5);
  CHECK(v2.converged);
  CHECK(v2.iterations() > fp64.iterations());
  CHECK_FALSE(v1.converged);
  CHECK(v1.iterations() == 20000);
}
