#include "jpcg/spmv.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <queue>
#include <unordered_map>

namespace jpcg {

SchemeBits scheme_bits(PrecisionScheme s) {
  switch (s) {
    case PrecisionScheme::DefaultFP64: return {64, 64, 64};
    case PrecisionScheme::MixedV1: return {32, 32, 32};
    case PrecisionScheme::MixedV2: return {32, 32, 64};
    case PrecisionScheme::MixedV3: return {32, 64, 64};
  }
  return {64, 64, 64};
}

std::string scheme_name(PrecisionScheme s) {
  switch (s) {
    case PrecisionScheme::DefaultFP64: return "fp64";
    case PrecisionScheme::MixedV1: return "mixed-v1";
    case PrecisionScheme::MixedV2: return "mixed-v2";
    case PrecisionScheme::MixedV3: return "mixed-v3";
  }
  return "fp64";
}

PrecisionScheme scheme_from_name(std::string_view name) {
  if (name == "fp64") return PrecisionScheme::DefaultFP64;
  if (name == "mixed-v1") return PrecisionScheme::MixedV1;
  if (name == "mixed-v2") return PrecisionScheme::MixedV2;
  if (name == "mixed-v3") return PrecisionScheme::MixedV3;
  throw SpmvError("unknown precision scheme: " + std::string(name));
}

PrecisionValues cast_matrix(const CsrMatrix& a, PrecisionScheme scheme) {
  PrecisionValues out;
  if (scheme_bits(scheme).matrix == 64) {
    out.tag = Precision::F64;
    out.values = a.values;
    return out;
  }
  out.tag = Precision::F32;
  out.values.resize(a.values.size());
  for (index_t i = 0; i < a.n; ++i) {
    for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      double v = a.values[static_cast<std::size_t>(k)];
      float f = static_cast<float>(v);  // round-to-nearest-even
      if (std::isinf(f) && std::isfinite(v)) {
        throw SpmvError("value overflows FP32 at (" + std::to_string(i) +
                        ", " + std::to_string(a.col_idx[k]) + ")");
      }
      out.values[static_cast<std::size_t>(k)] = static_cast<double>(f);
    }
  }
  return out;
}

namespace {

// Greedy list scheduling of one lane: at each slot emit the pending entry
// with the smallest original index among rows whose cooldown has expired;
// pad with a no-op when every pending row is still cooling. Same-row
// entries keep their relative order, so per-row accumulation order is
// unchanged.
void space_lane(std::vector<ScheduledEntry>& lane, int dep_distance,
                std::uint64_t& padding) {
  if (dep_distance <= 1 || lane.size() <= 1) return;

  struct RowStream {
    index_t row;
    std::vector<std::size_t> entry_idx;  // into lane, in order
    std::size_t next = 0;
  };
  std::vector<RowStream> rows;
  std::unordered_map<index_t, std::size_t> row_of;
  row_of.reserve(lane.size());
  for (std::size_t i = 0; i < lane.size(); ++i) {
    auto [it, fresh] = row_of.try_emplace(lane[i].row, rows.size());
    if (fresh) rows.push_back({lane[i].row, {}, 0});
    rows[it->second].entry_idx.push_back(i);
  }

  using Key = std::pair<std::size_t, std::size_t>;  // (slot/index, row id)
  // ready: ordered by original index of the row's head entry
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  // cooling: ordered by the slot at which the row becomes eligible
  std::priority_queue<Key, std::vector<Key>, std::greater<>> cooling;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ready.push({rows[r].entry_idx[0], r});
  }

  std::vector<ScheduledEntry> out;
  out.reserve(lane.size());
  std::size_t slot = 0;
  std::size_t remaining = lane.size();
  while (remaining > 0) {
    while (!cooling.empty() && cooling.top().first <= slot) {
      std::size_t r = cooling.top().second;
      cooling.pop();
      ready.push({rows[r].entry_idx[rows[r].next], r});
    }
    if (ready.empty()) {
      out.push_back(ScheduledEntry{0, 0, 0.0, true});
      ++padding;
      ++slot;
      continue;
    }
    std::size_t r = ready.top().second;
    ready.pop();
    RowStream& rs = rows[r];
    out.push_back(lane[rs.entry_idx[rs.next]]);
    ++rs.next;
    --remaining;
    if (rs.next < rs.entry_idx.size()) {
      cooling.push({slot + static_cast<std::size_t>(dep_distance), r});
    }
    ++slot;
  }
  lane = std::move(out);
}

ScheduledNonzeros schedule_impl(const CsrMatrix& a, int n_channels, int n_pes,
                                int dep_distance, PrecisionScheme scheme,
                                bool tiled, index_t window_size) {
  if (n_channels < 1 || n_pes < 1) throw SpmvError("fan-out must be >= 1");
  if (dep_distance < 1) throw SpmvError("dep_distance must be >= 1");
  PrecisionValues vals = cast_matrix(a, scheme);

  ScheduledNonzeros sched;
  sched.n_channels = n_channels;
  sched.n_pes_per_channel = n_pes;
  sched.n = a.n;
  sched.dep_distance = dep_distance;
  sched.value_tag = vals.tag;
  sched.tiled = tiled;
  sched.window_size = tiled ? window_size : 0;
  const int fanout = sched.fanout();
  sched.pe_entries.assign(static_cast<std::size_t>(fanout), {});

  const index_t n_windows =
      tiled ? (a.n + window_size - 1) / window_size : 1;
  for (index_t w = 0; w < n_windows; ++w) {
    const index_t col_lo = tiled ? w * window_size : 0;
    const index_t col_hi = tiled ? col_lo + window_size : a.n;
    for (index_t i = 0; i < a.n; ++i) {
      auto lane = static_cast<std::size_t>(i % fanout);
      for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        index_t c = a.col_idx[static_cast<std::size_t>(k)];
        if (c < col_lo || c >= col_hi) continue;
        sched.pe_entries[lane].push_back(
            {i, c, vals.values[static_cast<std::size_t>(k)], false});
      }
    }
  }

  for (auto& lane : sched.pe_entries) {
    space_lane(lane, dep_distance, sched.padding_count);
  }
  return sched;
}

}  // namespace

ScheduledNonzeros schedule_nonzeros(const CsrMatrix& a, int n_channels,
                                    int n_pes, int dep_distance,
                                    PrecisionScheme scheme) {
  return schedule_impl(a, n_channels, n_pes, dep_distance, scheme, false, 0);
}

ScheduledNonzeros schedule_nonzeros_tiled(const CsrMatrix& a, int n_channels,
                                          int n_pes, int dep_distance,
                                          index_t window_size,
                                          PrecisionScheme scheme) {
  if (window_size < 1) throw SpmvError("window size must be >= 1");
  return schedule_impl(a, n_channels, n_pes, dep_distance, scheme, true,
                       window_size);
}

std::vector<double> spmv_streamed(const ScheduledNonzeros& sched,
                                  std::span<const double> x,
                                  PrecisionScheme scheme) {
  if (static_cast<index_t>(x.size()) != sched.n) {
    throw SpmvError("spmv dimension mismatch: len(x)=" +
                    std::to_string(x.size()) + ", n=" +
                    std::to_string(sched.n));
  }
  SchemeBits bits = scheme_bits(scheme);
  if ((bits.matrix == 32) != (sched.value_tag == Precision::F32)) {
    throw SpmvError("schedule precision does not match the scheme");
  }

  const auto n = static_cast<std::size_t>(sched.n);
  std::vector<double> y(n, 0.0);
  std::vector<float> y32;
  if (bits.output == 32) y32.assign(n, 0.0f);

  // Lanes combine in ascending lane index; each row lives in exactly one
  // lane, and within a lane its terms arrive in scheduled order.
  for (const auto& lane : sched.pe_entries) {
    for (const ScheduledEntry& e : lane) {
      if (e.noop) continue;
      const auto row = static_cast<std::size_t>(e.row);
      const auto col = static_cast<std::size_t>(e.col);
      switch (scheme) {
        case PrecisionScheme::DefaultFP64:
        case PrecisionScheme::MixedV3: {
          // Matrix value already at scheme precision (widened), FP64 math.
          y[row] += e.value * x[col];
          break;
        }
        case PrecisionScheme::MixedV2: {
          // FP32 operands widen before the multiply, FP64 accumulation.
          double xv = static_cast<double>(static_cast<float>(x[col]));
          y[row] += e.value * xv;
          break;
        }
        case PrecisionScheme::MixedV1: {
          float term = static_cast<float>(e.value) * static_cast<float>(x[col]);
          y32[row] += term;
          break;
        }
      }
    }
  }

  if (bits.output == 32) {
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(y32[i]);
  }
  return y;
}

HwLimitDiagnostics check_hw_limits(const ScheduledNonzeros& sched, index_t n,
                                   bool hardware_faithful) {
  HwLimitDiagnostics d;
  if (!hardware_faithful) return d;

  if (!sched.tiled && n > kXWindowDepth) {
    d.ok = false;
    d.violations.push_back(
        "column window of " + std::to_string(n) + " exceeds the X depth " +
        std::to_string(kXWindowDepth) + " and no tiling is in effect");
  }
  if (sched.tiled) {
    d.n_windows = (n + sched.window_size - 1) / sched.window_size;
    if (sched.window_size > kXWindowDepth ||
        sched.window_size >= (index_t{1} << kColIndexBits)) {
      d.ok = false;
      d.violations.push_back("window size " +
                             std::to_string(sched.window_size) +
                             " exceeds the X depth");
    }
  }

  // Lane-local row indices must fit the 18-bit row field, and the lane's
  // rows must fit its Y partition.
  const index_t rows_per_lane =
      (n + sched.fanout() - 1) / static_cast<index_t>(sched.fanout());
  if (rows_per_lane >= (index_t{1} << kRowIndexBits)) {
    d.ok = false;
    d.violations.push_back(
        "rows per channel partition " + std::to_string(rows_per_lane) +
        " exceeds the " + std::to_string(kRowIndexBits) + "-bit row index");
  }
  if (rows_per_lane > kYPartitionDepth) {
    d.ok = false;
    d.violations.push_back("rows per lane " + std::to_string(rows_per_lane) +
                           " exceed the Y partition depth " +
                           std::to_string(kYPartitionDepth));
  }
  return d;
}

std::vector<std::string> dump_schedule(const ScheduledNonzeros& sched) {
  std::vector<std::string> lines;
  char buf[128];
  for (std::size_t pe = 0; pe < sched.pe_entries.size(); ++pe) {
    const auto& lane = sched.pe_entries[pe];
    for (std::size_t s = 0; s < lane.size(); ++s) {
      const ScheduledEntry& e = lane[s];
      std::snprintf(buf, sizeof buf, "%zu %zu %lld %lld %016llx%s", pe, s,
                    static_cast<long long>(e.row),
                    static_cast<long long>(e.col),
                    static_cast<unsigned long long>(
                        std::bit_cast<std::uint64_t>(e.value)),
                    e.noop ? " noop" : "");
      lines.emplace_back(buf);
    }
  }
  return lines;
}

}  // namespace jpcg
