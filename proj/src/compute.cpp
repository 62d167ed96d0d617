#include "jpcg/compute.hpp"

namespace jpcg {

namespace {

void check_len(std::span<const double> a, std::span<const double> b,
               std::size_t len, const char* what) {
  if (a.size() < len || b.size() < len) {
    throw ComputeError(std::string(what) + ": stream underrun, need " +
                       std::to_string(len) + " elements");
  }
}

}  // namespace

double dot_product(std::span<const double> xs, std::span<const double> ys,
                   std::size_t len, std::size_t delay_buffer_len) {
  check_len(xs, ys, len, "dot_product");
  DelayBuffer buf(delay_buffer_len);
  for (std::size_t i = 0; i < len; ++i) {
    buf.accumulate(i, xs[i] * ys[i]);
  }
  return buf.reduce();
}

std::vector<double> update_x(std::span<const double> x,
                             std::span<const double> p, double alpha,
                             std::size_t len) {
  check_len(x, p, len, "update_x");
  std::vector<double> out(len);
  if (alpha == 0.0) {
    for (std::size_t i = 0; i < len; ++i) out[i] = x[i];
    return out;
  }
  for (std::size_t i = 0; i < len; ++i) {
    double scaled = alpha * p[i];
    out[i] = x[i] + scaled;
  }
  return out;
}

std::vector<double> update_r(std::span<const double> r,
                             std::span<const double> ap, double alpha,
                             std::size_t len) {
  check_len(r, ap, len, "update_r");
  std::vector<double> out(len);
  if (alpha == 0.0) {
    for (std::size_t i = 0; i < len; ++i) out[i] = r[i];
    return out;
  }
  for (std::size_t i = 0; i < len; ++i) {
    double scaled = alpha * ap[i];
    out[i] = r[i] - scaled;
  }
  return out;
}

std::vector<double> left_divide(std::span<const double> m,
                                std::span<const double> r, std::size_t len) {
  check_len(m, r, len, "left_divide");
  std::vector<double> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (m[i] == 0.0) {
      throw ComputeError("left_divide: division by zero at index " +
                         std::to_string(i));
    }
    out[i] = r[i] / m[i];
  }
  return out;
}

std::vector<double> update_p(std::span<const double> z,
                             std::span<const double> p, double beta,
                             std::size_t len) {
  check_len(z, p, len, "update_p");
  std::vector<double> out(len);
  if (beta == 0.0) {
    // Also the p <- z initialization; bit-exact pass-through.
    for (std::size_t i = 0; i < len; ++i) out[i] = z[i];
    return out;
  }
  for (std::size_t i = 0; i < len; ++i) {
    double scaled = beta * p[i];
    out[i] = z[i] + scaled;
  }
  return out;
}

std::string_view vector_name(VectorId v) {
  switch (v) {
    case VectorId::P: return "p";
    case VectorId::R: return "r";
    case VectorId::X: return "x";
    case VectorId::Ap: return "ap";
    case VectorId::M: return "m";
    case VectorId::Z: return "z";
  }
  return "?";
}

std::vector<VecCtrlFsm> decentralized_vecctrl_fsms() {
  using Op = VecCtrlState::Op;
  std::vector<VecCtrlFsm> fsms;
  fsms.push_back({VectorId::P,
                  {{Op::Rd, "M1"}, {Op::Rd, "M2"}, {Op::RdWr, "M7"}},
                  0,
                  0});
  // state 2 reads the phase-3 copy to M4 while storing the update from M5
  fsms.push_back({VectorId::R, {{Op::Rd, "M4"}, {Op::RdWr, "M4/M5"}}, 0, 0});
  fsms.push_back({VectorId::M, {{Op::Rd, "M5"}, {Op::Rd, "M5"}}, 0, 0});
  fsms.push_back({VectorId::X, {{Op::RdWr, "M3"}}, 0, 0});
  fsms.push_back({VectorId::Ap,
                  {{Op::Wr, "M1"}, {Op::Rd, "M4"}, {Op::Rd, "M4"}},
                  0,
                  0});
  return fsms;
}

std::vector<ComputeFsm> decentralized_compute_fsms() {
  std::vector<ComputeFsm> fsms;
  fsms.push_back({"M1", {{{"p"}, {"ap->mem", "ap->M2"}}}, 0, 0});
  fsms.push_back({"M2", {{{"p", "ap"}, {"p_dot_ap->ctrl"}}}, 0, 0});
  fsms.push_back({"M3", {{{"x", "p_old"}, {"x->mem"}}}, 0, 0});
  fsms.push_back({"M4",
                  {{{"r", "ap"}, {"r->M5"}}, {{"r", "ap"}, {"r->M5"}}},
                  0,
                  0});
  fsms.push_back({"M5",
                  {{{"m", "r"}, {"z->M6", "r->M6"}},
                   {{"m", "r"}, {"z->M7", "r->mem"}}},
                  0,
                  0});
  fsms.push_back({"M6", {{{"z", "r"}, {"rz_new->ctrl", "r->M8"}}}, 0, 0});
  fsms.push_back({"M7", {{{"z", "p"}, {"p->mem", "p_old->M3"}}}, 0, 0});
  fsms.push_back({"M8", {{{"r"}, {"rr->ctrl"}}}, 0, 0});
  return fsms;
}

}  // namespace jpcg
