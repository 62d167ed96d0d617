#include <doctest.h>

#include <random>

#include "jpcg/isa.hpp"

using namespace jpcg;

TEST_CASE("make_vctrl validates and carries fields") {
  InstVCtrl v = make_vctrl(true, false, 0, 100, 1);
  CHECK(v.rd);
  CHECK_FALSE(v.wr);
  CHECK(v.base_addr == 0);
  CHECK(v.len == 100);
  CHECK(v.q_id == 1);

  CHECK_THROWS_WITH_AS(make_vctrl(false, false, 0, 10, 0),
                       doctest::Contains("neither read nor write"), IsaError);
  CHECK_THROWS_AS(make_vctrl(true, false, 0, 0, 0), IsaError);
  CHECK_THROWS_AS(make_vctrl(true, false, 0, 10, 8), IsaError);
}

TEST_CASE("make_cmp and make_rdwr") {
  InstCmp c = make_cmp(100, 2.0, 1);
  CHECK(c.len == 100);
  CHECK(c.alpha == 2.0);
  CHECK(c.q_id == 1);
  CHECK_THROWS_AS(make_cmp(-5, 0.0, 0), IsaError);

  InstRdWr m = make_rdwr(true, false, 0, 100);
  CHECK(m.rd);
  CHECK_THROWS_AS(make_rdwr(false, false, 0, 1), IsaError);
}

TEST_CASE("render_trace formats are stable") {
  CHECK(render_trace(Instruction{make_cmp(100, 2.0, 1)}) ==
        "CMP len=100 alpha=2 q=1");
  CHECK(render_trace(Instruction{make_rdwr(true, false, 0, 100)}) ==
        "MEM rd base=0 len=100");
  CHECK(render_trace(Instruction{make_vctrl(true, true, 8, 64, 3)}) ==
        "VEC rdwr base=8 len=64 q=3");
}

TEST_CASE("trace render/parse round-trips 1000 random instructions") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<std::int64_t> base(0, 1 << 20);
  std::uniform_int_distribution<std::int64_t> len(1, 1 << 20);
  std::uniform_int_distribution<int> q(0, 7);
  std::uniform_int_distribution<int> rw(1, 3);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);

  for (int i = 0; i < 1000; ++i) {
    Instruction inst;
    switch (kind(rng)) {
      case 0: {
        int f = rw(rng);
        inst = make_vctrl(f & 1, f & 2, base(rng), len(rng),
                          static_cast<unsigned>(q(rng)));
        break;
      }
      case 1: {
        double alpha = std::ldexp(mant(rng), expo(rng));
        inst = make_cmp(len(rng), alpha, static_cast<unsigned>(q(rng)));
        break;
      }
      default: {
        int f = rw(rng);
        inst = make_rdwr(f & 1, f & 2, base(rng), len(rng));
        break;
      }
    }
    Instruction back = parse_trace(render_trace(inst));
    CHECK(back == inst);
  }
}

TEST_CASE("parse_trace rejects garbage") {
  CHECK_THROWS_AS(parse_trace("NOP"), IsaError);
  CHECK_THROWS_AS(parse_trace("CMP len=x alpha=1 q=0"), IsaError);
  CHECK_THROWS_AS(parse_trace("MEM zz base=0 len=1"), IsaError);
}
