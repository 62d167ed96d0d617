#include "jpcg/stream_runtime.hpp"

#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

namespace jpcg {

ChannelBase::ChannelBase(std::string name, std::size_t depth)
    : name_(std::move(name)), depth_(depth) {}

void ChannelBase::bind_producer(const Module& m) {
  if (producer_ != nullptr) {
    throw RuntimeError("channel '" + name_ + "' already has a producer");
  }
  producer_ = &m;
}

void ChannelBase::bind_consumer(const Module& m) {
  if (consumer_ != nullptr) {
    throw RuntimeError("channel '" + name_ + "' already has a consumer");
  }
  consumer_ = &m;
}

ChannelBase* DataflowGraph::find_channel(std::string_view name) {
  for (auto& ch : channels_) {
    if (ch->name() == name) return ch.get();
  }
  return nullptr;
}

void DataflowGraph::validate() const {
  for (const auto& ch : channels_) {
    if (ch->producer() == nullptr || ch->consumer() == nullptr) {
      throw RuntimeError("malformed graph: channel '" + ch->name() +
                         "' needs exactly one producer and one consumer");
    }
  }
}

void DataflowGraph::set_record_transcripts(bool on) {
  for (auto& ch : channels_) ch->set_recording(on);
}

std::vector<std::string> DataflowGraph::dump_transcripts() const {
  std::vector<std::string> lines;
  char buf[96];
  for (const auto& ch : channels_) {
    const auto& bits = ch->transcript();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s %zu %016llx", ch->name().c_str(), i,
                    static_cast<unsigned long long>(bits[i]));
      lines.emplace_back(buf);
    }
  }
  return lines;
}

std::string DeadlockReport::to_string() const {
  std::string s;
  for (const auto& e : entries) {
    if (!s.empty()) s += "; ";
    s += e.module;
    s += e.kind == BlockedOp::Kind::Push ? ": push " : ": pop ";
    s += e.channel;
  }
  return s;
}

namespace {

DeadlockReport collect_blocked(DataflowGraph& g) {
  DeadlockReport report;
  for (std::size_t i = 0; i < g.module_count(); ++i) {
    Module& m = g.module_at(i);
    if (m.done()) continue;
    for (const BlockedOp& op : m.blocked_ops()) {
      report.entries.push_back({m.name(), op.kind, op.channel->name()});
    }
    if (m.blocked_ops().empty()) {
      // Blocked without a named op should not happen; surface it anyway.
      report.entries.push_back(
          {m.name(), BlockedOp::Kind::Pop, std::string("<unknown>")});
    }
  }
  return report;
}

RunOutcome run_deterministic(DataflowGraph& g, std::uint64_t round_budget) {
  RunOutcome outcome;
  std::uint64_t rounds = 0;
  for (;;) {
    if (rounds >= round_budget) {
      outcome.kind = RunOutcome::Kind::BudgetExhausted;
      outcome.rounds = rounds;
      return outcome;
    }
    ++rounds;
    bool progressed = false;
    bool all_done = true;
    for (std::size_t i = 0; i < g.module_count(); ++i) {
      Module& m = g.module_at(i);
      const bool was_done = m.done();
      switch (m.step()) {
        case StepStatus::Progress:
          progressed = true;
          all_done = false;
          break;
        case StepStatus::Blocked:
          all_done = false;
          break;
        case StepStatus::Done:
          // Finishing counts: the module just closed its outputs.
          if (!was_done) progressed = true;
          break;
      }
    }
    if (all_done) {
      outcome.kind = RunOutcome::Kind::Completed;
      outcome.rounds = rounds;
      return outcome;
    }
    if (!progressed) {
      outcome.kind = RunOutcome::Kind::Deadlock;
      outcome.rounds = rounds;
      outcome.deadlock = collect_blocked(g);
      return outcome;
    }
  }
}

// Each module runs on its own thread; channel operations are serialized
// under one lock, so interleaving order is up to the OS scheduler while
// channel contents stay deterministic (single producer/consumer per FIFO).
RunOutcome run_concurrent(DataflowGraph& g, std::uint64_t round_budget) {
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t generation = 0;
  std::size_t waiting = 0;
  std::size_t unfinished = 0;
  std::uint64_t steps = 0;
  bool deadlock = false;
  bool budget_hit = false;
  std::exception_ptr failure;

  for (std::size_t i = 0; i < g.module_count(); ++i) {
    if (!g.module_at(i).done()) ++unfinished;
  }

  // Steps every unfinished module once while holding the lock. Returns true
  // if anything moved; used to confirm quiescence before declaring deadlock.
  auto sweep = [&]() -> bool {
    bool any = false;
    for (std::size_t i = 0; i < g.module_count(); ++i) {
      Module& mi = g.module_at(i);
      if (mi.done()) continue;
      StepStatus s = mi.step();
      if (s == StepStatus::Progress) {
        any = true;
      } else if (s == StepStatus::Done) {
        any = true;
        --unfinished;
      }
    }
    return any;
  };

  auto worker = [&](Module& m) {
    std::unique_lock lock(mu);
    while (!m.done() && !deadlock && !budget_hit && !failure) {
      if (steps >= round_budget) {
        budget_hit = true;
        cv.notify_all();
        break;
      }
      ++steps;
      StepStatus s;
      try {
        s = m.step();
      } catch (...) {
        if (!failure) failure = std::current_exception();
        cv.notify_all();
        break;
      }
      if (s == StepStatus::Progress) {
        ++generation;
        cv.notify_all();
        continue;
      }
      if (s == StepStatus::Done) {
        --unfinished;
        ++generation;
        cv.notify_all();
        break;
      }
      if (waiting + 1 == unfinished) {
        // Every other unfinished module is parked; a full sweep decides
        // between a transient stall and a real deadlock.
        bool moved;
        try {
          moved = sweep();
        } catch (...) {
          if (!failure) failure = std::current_exception();
          cv.notify_all();
          break;
        }
        if (moved) {
          ++generation;
          cv.notify_all();
          continue;
        }
        deadlock = true;
        cv.notify_all();
        break;
      }
      std::uint64_t seen = generation;
      ++waiting;
      cv.wait(lock, [&] {
        return generation != seen || deadlock || budget_hit || !!failure;
      });
      --waiting;
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(g.module_count());
  for (std::size_t i = 0; i < g.module_count(); ++i) {
    Module& m = g.module_at(i);
    if (!m.done()) threads.emplace_back(worker, std::ref(m));
  }
  for (auto& t : threads) t.join();

  if (failure) std::rethrow_exception(failure);

  RunOutcome outcome;
  outcome.rounds = steps;
  if (budget_hit) {
    outcome.kind = RunOutcome::Kind::BudgetExhausted;
  } else if (deadlock) {
    outcome.kind = RunOutcome::Kind::Deadlock;
    outcome.deadlock = collect_blocked(g);
  } else {
    outcome.kind = RunOutcome::Kind::Completed;
  }
  return outcome;
}

}  // namespace

RunOutcome run_dataflow(DataflowGraph& g, SchedulerKind scheduler,
                        std::uint64_t round_budget) {
  g.validate();
  return scheduler == SchedulerKind::Deterministic
             ? run_deterministic(g, round_budget)
             : run_concurrent(g, round_budget);
}

DeadlockReport detect_deadlock(DataflowGraph& g) {
  bool progressed = false;
  bool any_unfinished = false;
  for (std::size_t i = 0; i < g.module_count(); ++i) {
    Module& m = g.module_at(i);
    if (m.done()) continue;
    StepStatus s = m.step();
    if (s == StepStatus::Progress) progressed = true;
    if (!m.done()) any_unfinished = true;
  }
  if (progressed || !any_unfinished) return {};
  return collect_blocked(g);
}

double matching_frequency(double bytes_per_second_per_channel,
                          double max_datawidth_bytes) {
  if (!(bytes_per_second_per_channel > 0)) {
    throw RuntimeError("matching_frequency: bandwidth must be positive");
  }
  if (!(max_datawidth_bytes > 0)) {
    throw RuntimeError("matching_frequency: datawidth must be positive");
  }
  return bytes_per_second_per_channel / max_datawidth_bytes;
}

void MemoryChannelModel::preload(std::span<const double> data,
                                 std::int64_t base) {
  if (base < 0 ||
      static_cast<std::size_t>(base) + data.size() > words_.size()) {
    throw RuntimeError("preload out of bounds on channel " +
                       std::to_string(id_));
  }
  std::copy(data.begin(), data.end(),
            words_.begin() + static_cast<std::ptrdiff_t>(base));
}

void DoubleChannelBinding::write_to_side(int side_index, std::int64_t addr,
                                         double v) {
  if (side_index == parity_) {
    throw RuntimeError(
        "write to the read-side channel of a double-channel binding within "
        "one iteration (channel " +
        std::to_string(side(side_index).id()) + ")");
  }
  side(side_index).write(addr, v);
}

std::vector<double> mem_read(MemoryChannelModel& ch, std::int64_t base,
                             std::int64_t len) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(len));
  for (std::int64_t i = 0; i < len; ++i) out.push_back(ch.read(base + i));
  return out;
}

MemResponse mem_write(MemoryChannelModel& ch, std::int64_t base,
                      std::span<const double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    ch.write(base + static_cast<std::int64_t>(i), data[i]);
  }
  return MemResponse{ch.id(), MemOp::Write,
                     static_cast<std::int64_t>(data.size())};
}

std::vector<double> mem_read(DoubleChannelBinding& b, std::int64_t base,
                             std::int64_t len) {
  return mem_read(b.read_side(), base, len);
}

MemResponse mem_write(DoubleChannelBinding& b, std::int64_t base,
                      std::span<const double> data) {
  return mem_write(b.write_side(), base, data);
}

std::uint64_t phase_cycles(const PhaseCycleModel& phase) {
  std::uint64_t longest = 0;
  for (std::uint64_t len : phase.stream_lengths) {
    longest = std::max(longest, len);
  }
  std::uint64_t depths = 0;
  for (std::uint64_t d : phase.stage_depths) depths += d;
  return longest + depths +
         std::uint64_t{5} * phase.delay_buffer_len * phase.dot_products;
}

std::uint64_t estimate_iteration_cycles(
    std::span<const PhaseCycleModel> phases) {
  std::uint64_t total = 0;
  for (const auto& p : phases) total += phase_cycles(p);
  return total;
}

}  // namespace jpcg
