#include "jpcg/reference.hpp"

#include <algorithm>
#include <cmath>

#include "jpcg/controller.hpp"

namespace jpcg {

std::vector<double> spmv_reference(const CsrMatrix& a,
                                   std::span<const double> x) {
  if (static_cast<index_t>(x.size()) != a.n) {
    throw SpmvError("spmv_reference dimension mismatch");
  }
  std::vector<double> y(static_cast<std::size_t>(a.n), 0.0);
  for (index_t i = 0; i < a.n; ++i) {
    double acc = 0.0;
    for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      acc += a.values[static_cast<std::size_t>(k)] *
             x[static_cast<std::size_t>(a.col_idx[k])];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

namespace {

// SpMV over pre-cast matrix values at the scheme's vector precisions.
std::vector<double> spmv_with_values(const CsrMatrix& a,
                                     std::span<const double> vals,
                                     std::span<const double> x,
                                     PrecisionScheme scheme) {
  std::vector<double> y(static_cast<std::size_t>(a.n), 0.0);
  for (index_t i = 0; i < a.n; ++i) {
    if (scheme == PrecisionScheme::MixedV1) {
      float acc = 0.0f;
      for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        acc += static_cast<float>(vals[static_cast<std::size_t>(k)]) *
               static_cast<float>(x[static_cast<std::size_t>(a.col_idx[k])]);
      }
      y[static_cast<std::size_t>(i)] = static_cast<double>(acc);
    } else if (scheme == PrecisionScheme::MixedV2) {
      double acc = 0.0;
      for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        double xv = static_cast<double>(
            static_cast<float>(x[static_cast<std::size_t>(a.col_idx[k])]));
        acc += vals[static_cast<std::size_t>(k)] * xv;
      }
      y[static_cast<std::size_t>(i)] = acc;
    } else {  // DefaultFP64 / MixedV3: plain FP64 arithmetic
      double acc = 0.0;
      for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        acc += vals[static_cast<std::size_t>(k)] *
               x[static_cast<std::size_t>(a.col_idx[k])];
      }
      y[static_cast<std::size_t>(i)] = acc;
    }
  }
  return y;
}

}  // namespace

std::vector<double> spmv_reference_scheme(const CsrMatrix& a,
                                          std::span<const double> x,
                                          PrecisionScheme scheme) {
  if (scheme == PrecisionScheme::DefaultFP64) return spmv_reference(a, x);
  if (static_cast<index_t>(x.size()) != a.n) {
    throw SpmvError("spmv_reference dimension mismatch");
  }
  PrecisionValues vals = cast_matrix(a, scheme);
  return spmv_with_values(a, vals.values, x, scheme);
}

namespace {

double dot_ltr(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

OracleTrace jpcg_reference(const CsrMatrix& a, std::span<const double> b,
                           std::span<const double> x0, double tol,
                           std::int64_t max_iters, PrecisionScheme scheme) {
  if (static_cast<index_t>(b.size()) != a.n ||
      static_cast<index_t>(x0.size()) != a.n) {
    throw SolverError("jpcg_reference: dimension mismatch");
  }
  const auto n = static_cast<std::size_t>(a.n);
  // Matrix values, including the Jacobi diagonal, at the scheme's matrix
  // precision; every vector below stays FP64.
  PrecisionValues vals = cast_matrix(a, scheme);
  CsrMatrix a_eff = a;
  a_eff.values = vals.values;
  JacobiPreconditioner precond = extract_jacobi(a_eff);

  OracleTrace trace;
  trace.x.assign(x0.begin(), x0.end());

  std::vector<double> r(n), z(n), p(n), ap(n);
  std::vector<double> ax0 = spmv_with_values(a, vals.values, trace.x, scheme);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax0[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / precond.diag[i];
  p = z;
  double rz = dot_ltr(r, z);
  double rr = dot_ltr(r, r);
  trace.records.push_back({rr, 1.0, 0.0});

  for (std::int64_t it = 0; it < max_iters && rr > tol; ++it) {
    ap = spmv_with_values(a, vals.values, p, scheme);
    double p_dot_ap = dot_ltr(p, ap);
    if (p_dot_ap <= 0.0) {
      throw SolverError("CG breakdown: p.Ap = " + std::to_string(p_dot_ap));
    }
    double alpha = rz / p_dot_ap;
    for (std::size_t i = 0; i < n; ++i) {
      double scaled = alpha * p[i];
      trace.x[i] = trace.x[i] + scaled;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double scaled = alpha * ap[i];
      r[i] = r[i] - scaled;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / precond.diag[i];
    double rz_new = dot_ltr(r, z);
    if (rz == 0.0) throw SolverError("CG breakdown: rz = 0");
    double beta = rz_new / rz;
    for (std::size_t i = 0; i < n; ++i) {
      double scaled = beta * p[i];
      p[i] = z[i] + scaled;
    }
    rz = rz_new;
    rr = dot_ltr(r, r);
    trace.records.push_back({rr, alpha, beta});
  }
  trace.converged = rr <= tol;
  return trace;
}

TraceDivergence compare_traces(std::span<const double> rr1,
                               std::span<const double> rr2, double rel_tol) {
  TraceDivergence d;
  d.iteration_delta = static_cast<std::int64_t>(rr1.size()) -
                      static_cast<std::int64_t>(rr2.size());
  std::size_t common = std::min(rr1.size(), rr2.size());
  for (std::size_t i = 0; i < common; ++i) {
    double hi = std::max(std::abs(rr1[i]), std::abs(rr2[i]));
    if (hi == 0.0) continue;
    if (std::abs(rr1[i] - rr2[i]) / hi > rel_tol) {
      d.first_divergence = static_cast<std::int64_t>(i);
      break;
    }
  }
  return d;
}

TraceDivergence compare_traces(const OracleTrace& t1, const OracleTrace& t2,
                               double rel_tol) {
  std::vector<double> rr1, rr2;
  rr1.reserve(t1.records.size());
  rr2.reserve(t2.records.size());
  for (const auto& rec : t1.records) rr1.push_back(rec.rr);
  for (const auto& rec : t2.records) rr2.push_back(rec.rr);
  return compare_traces(rr1, rr2, rel_tol);
}

}  // namespace jpcg
