#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jpcg/isa.hpp"

namespace jpcg {

struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Precision : std::uint8_t { F64, F32 };

/// One element of a vector stream. FP32 payloads are carried widened to
/// double with the tag recording the producing precision.
struct StreamElement {
  double value = 0.0;
  Precision tag = Precision::F64;
  friend bool operator==(const StreamElement&, const StreamElement&) = default;
};

enum class PushResult : std::uint8_t { Accepted, WouldBlock };
enum class PopStatus : std::uint8_t { Ok, WouldBlock, EndOfStream };

class Module;

class ChannelBase {
 public:
  ChannelBase(std::string name, std::size_t depth);
  virtual ~ChannelBase() = default;

  const std::string& name() const { return name_; }
  std::size_t depth() const { return depth_; }
  std::size_t size() const { return size_; }
  bool closed() const { return closed_; }
  void close() { closed_ = true; }

  void bind_producer(const Module& m);
  void bind_consumer(const Module& m);
  const Module* producer() const { return producer_; }
  const Module* consumer() const { return consumer_; }

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  const std::vector<std::uint64_t>& transcript() const { return transcript_; }

 protected:
  void record_bits(std::uint64_t bits) { transcript_.push_back(bits); }

  std::string name_;
  std::size_t depth_;
  std::size_t size_ = 0;
  bool closed_ = false;
  bool recording_ = false;
  const Module* producer_ = nullptr;
  const Module* consumer_ = nullptr;
  std::vector<std::uint64_t> transcript_;
};

/// Bounded FIFO connecting exactly one producer module to one consumer
/// module. Occupancy never exceeds depth; order is preserved.
template <class T>
class Channel : public ChannelBase {
 public:
  Channel(std::string name, std::size_t depth)
      : ChannelBase(std::move(name), depth) {
    if (depth == 0) throw RuntimeError("channel depth must be >= 1: " + name_);
  }

  bool can_push() const { return size_ < depth_; }
  bool can_pop() const { return size_ > 0; }
  bool at_end() const { return closed_ && size_ == 0; }

  void push(T v) {
    if (closed_) throw RuntimeError("push after stream-complete: " + name_);
    if (size_ >= depth_) throw RuntimeError("push on full channel: " + name_);
    if constexpr (std::is_same_v<T, StreamElement>) {
      if (recording_) record_bits(std::bit_cast<std::uint64_t>(v.value));
    }
    q_.push_back(std::move(v));
    ++size_;
  }

  T pop() {
    if (size_ == 0) throw RuntimeError("pop on empty channel: " + name_);
    T v = std::move(q_.front());
    q_.pop_front();
    --size_;
    return v;
  }

  PushResult try_push(T v) {
    if (closed_) throw RuntimeError("push after stream-complete: " + name_);
    if (!can_push()) return PushResult::WouldBlock;
    push(std::move(v));
    return PushResult::Accepted;
  }

  std::pair<PopStatus, T> try_pop() {
    if (size_ == 0) {
      return {closed_ ? PopStatus::EndOfStream : PopStatus::WouldBlock, T{}};
    }
    return {PopStatus::Ok, pop()};
  }

 private:
  std::deque<T> q_;
};

enum class StepStatus : std::uint8_t { Progress, Blocked, Done };

struct BlockedOp {
  enum class Kind : std::uint8_t { Push, Pop } kind;
  const ChannelBase* channel;
};

/// A processing module. step() attempts one cycle of work; a cycle is a
/// small set of channel operations that commit together (hardware stall
/// semantics: if any operation of a group cannot proceed, the whole group
/// waits). Modules with several independent data paths attempt each path's
/// group in one step.
class Module {
 public:
  explicit Module(std::string name) : name_(std::move(name)) {}
  virtual ~Module() = default;

  const std::string& name() const { return name_; }
  bool done() const { return done_; }

  StepStatus step() {
    if (done_) return StepStatus::Done;
    blocked_.clear();
    StepStatus s = try_cycle();
    if (s == StepStatus::Done) done_ = true;
    return s;
  }

  const std::vector<BlockedOp>& blocked_ops() const { return blocked_; }

 protected:
  virtual StepStatus try_cycle() = 0;

  void block_on_push(const ChannelBase& ch) {
    blocked_.push_back({BlockedOp::Kind::Push, &ch});
  }
  void block_on_pop(const ChannelBase& ch) {
    blocked_.push_back({BlockedOp::Kind::Pop, &ch});
  }

 private:
  std::string name_;
  bool done_ = false;
  std::vector<BlockedOp> blocked_;
};

/// Logical pipeline latency: an element inserted at cycle c may be taken
/// only after the stage has advanced `depth` times since the insertion.
class PipelineStage {
 public:
  explicit PipelineStage(std::uint32_t depth) : depth_(depth) {}

  std::uint32_t depth() const { return depth_; }
  bool empty() const { return q_.empty(); }
  std::size_t in_flight() const { return q_.size(); }

  bool has_ready() const {
    return !q_.empty() && ticks_ - q_.front().inserted_at >= depth_;
  }
  void insert(StreamElement e) { q_.push_back({e, ticks_}); }
  StreamElement take_ready() {
    StreamElement e = q_.front().elem;
    q_.pop_front();
    return e;
  }
  void advance() { ++ticks_; }

 private:
  struct InFlight {
    StreamElement elem;
    std::uint64_t inserted_at;
  };
  std::deque<InFlight> q_;
  std::uint32_t depth_;
  std::uint64_t ticks_ = 0;
};

class DataflowGraph {
 public:
  template <class T>
  Channel<T>& add_channel(std::string name, std::size_t depth) {
    auto ch = std::make_unique<Channel<T>>(std::move(name), depth);
    Channel<T>& ref = *ch;
    channels_.push_back(std::move(ch));
    return ref;
  }

  template <class M, class... Args>
  M& add_module(Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *m;
    modules_.push_back(std::move(m));
    return ref;
  }

  std::size_t module_count() const { return modules_.size(); }
  Module& module_at(std::size_t i) { return *modules_[i]; }
  std::size_t channel_count() const { return channels_.size(); }
  ChannelBase& channel_at(std::size_t i) { return *channels_[i]; }
  ChannelBase* find_channel(std::string_view name);

  // Every channel must have exactly one producer and one consumer.
  void validate() const;

  void set_record_transcripts(bool on);
  // One line per recorded element: "<channel> <seq> <hex fp64 bits>".
  std::vector<std::string> dump_transcripts() const;

 private:
  std::vector<std::unique_ptr<ChannelBase>> channels_;
  std::vector<std::unique_ptr<Module>> modules_;
};

struct DeadlockReport {
  struct Entry {
    std::string module;
    BlockedOp::Kind kind;
    std::string channel;
  };
  std::vector<Entry> entries;
  bool empty() const { return entries.empty(); }
  std::string to_string() const;
};

struct RunOutcome {
  enum class Kind : std::uint8_t { Completed, Deadlock, BudgetExhausted };
  Kind kind = Kind::Completed;
  std::uint64_t rounds = 0;
  DeadlockReport deadlock;
};

enum class SchedulerKind : std::uint8_t { Deterministic, Concurrent };

/// Runs the graph until every module is done, no module can make progress
/// (deadlock), or the round budget is exhausted. The deterministic scheduler
/// steps modules round-robin in registration order; the concurrent one maps
/// each module to a thread. Channel contents are scheduler-independent.
RunOutcome run_dataflow(DataflowGraph& g, SchedulerKind scheduler,
                        std::uint64_t round_budget =
                            std::numeric_limits<std::uint64_t>::max());

/// Steps every unfinished module once; if none progressed, returns the set
/// of modules and the channel operation each is blocked on. Empty report
/// means some task is runnable or all are done.
DeadlockReport detect_deadlock(DataflowGraph& g);

/// Smallest fast-FIFO depth that avoids the two-FIFO join deadlock when the
/// slow side is produced by a pipeline of depth L.
constexpr std::int64_t min_safe_depth(std::int64_t pipeline_depth) {
  return pipeline_depth + 1;
}

/// f = BW / r: the processing frequency that matches one memory channel's
/// bandwidth given the maximum datawidth per cycle.
double matching_frequency(double bytes_per_second_per_channel,
                          double max_datawidth_bytes);

/// Modeled off-chip channel: addressable 64-bit words with per-iteration
/// read/write counters. Counters only move forward between resets; resets
/// happen at iteration boundaries, driven by the owner.
class MemoryChannelModel {
 public:
  MemoryChannelModel(int id, std::size_t capacity_words)
      : id_(id), words_(capacity_words, 0.0) {}

  int id() const { return id_; }
  std::size_t capacity() const { return words_.size(); }

  double read(std::int64_t addr) {
    check(addr);
    ++read_count_;
    return words_[static_cast<std::size_t>(addr)];
  }
  void write(std::int64_t addr, double v) {
    check(addr);
    ++write_count_;
    words_[static_cast<std::size_t>(addr)] = v;
  }

  std::uint64_t read_count() const { return read_count_; }
  std::uint64_t write_count() const { return write_count_; }
  void reset_counters() { read_count_ = write_count_ = 0; }

  void preload(std::span<const double> data, std::int64_t base = 0);
  std::span<const double> words() const { return words_; }

 private:
  void check(std::int64_t addr) const {
    if (addr < 0 || static_cast<std::size_t>(addr) >= words_.size()) {
      throw RuntimeError("memory access out of bounds on channel " +
                         std::to_string(id_) + ": addr " +
                         std::to_string(addr));
    }
  }

  int id_;
  std::vector<double> words_;
  std::uint64_t read_count_ = 0;
  std::uint64_t write_count_ = 0;
};

/// Two channels bound to one vector with alternating read/write roles:
/// iteration t reads v_t from one side and writes v_{t+1} to the other,
/// then the parity flips. Same-iteration read-write conflicts on a single
/// channel cannot happen by construction.
class DoubleChannelBinding {
 public:
  DoubleChannelBinding(int id_a, int id_b, std::size_t capacity_words)
      : a_(id_a, capacity_words), b_(id_b, capacity_words) {}

  MemoryChannelModel& read_side() { return parity_ == 0 ? a_ : b_; }
  MemoryChannelModel& write_side() { return parity_ == 0 ? b_ : a_; }
  MemoryChannelModel& side(int i) { return i == 0 ? a_ : b_; }

  int parity() const { return parity_; }
  std::uint64_t flip_count() const { return flips_; }
  void flip() {
    parity_ ^= 1;
    ++flips_;
  }

  // Explicit-side write; targeting the current read side is the
  // same-iteration conflict the binding exists to prevent.
  void write_to_side(int side_index, std::int64_t addr, double v);

  std::uint64_t read_count() const {
    return a_.read_count() + b_.read_count();
  }
  std::uint64_t write_count() const {
    return a_.write_count() + b_.write_count();
  }
  void reset_counters() {
    a_.reset_counters();
    b_.reset_counters();
  }

 private:
  MemoryChannelModel a_;
  MemoryChannelModel b_;
  int parity_ = 0;
  std::uint64_t flips_ = 0;
};

// Word-granular transfers used directly by tests and tools; the dataflow
// memory modules stream the same accesses element at a time.
std::vector<double> mem_read(MemoryChannelModel& ch, std::int64_t base,
                             std::int64_t len);
MemResponse mem_write(MemoryChannelModel& ch, std::int64_t base,
                      std::span<const double> data);
std::vector<double> mem_read(DoubleChannelBinding& b, std::int64_t base,
                             std::int64_t len);
MemResponse mem_write(DoubleChannelBinding& b, std::int64_t base,
                      std::span<const double> data);

/// Analytic cycle model for one phase: concurrent streams overlap (max),
/// pipeline depths on the critical path add, and each dot product pays a
/// fixed 5 * delay-buffer-length drain.
struct PhaseCycleModel {
  std::vector<std::uint64_t> stream_lengths;
  std::vector<std::uint64_t> stage_depths;
  std::uint32_t dot_products = 0;
  std::uint32_t delay_buffer_len = 8;
};

std::uint64_t phase_cycles(const PhaseCycleModel& phase);
std::uint64_t estimate_iteration_cycles(std::span<const PhaseCycleModel> phases);

}  // namespace jpcg
