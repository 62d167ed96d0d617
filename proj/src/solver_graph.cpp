#include "solver_graph.hpp"

#include <algorithm>
#include <set>

namespace jpcg::detail {

namespace {

// Routes may share channels; register each unique channel once.
template <class Fn>
void for_unique(const std::vector<DataChan*>& chans, Fn&& fn) {
  std::set<DataChan*> seen;
  for (DataChan* ch : chans) {
    if (ch != nullptr && seen.insert(ch).second) fn(*ch);
  }
}

}  // namespace

MemoryPort::MemoryPort(std::string vector, bool double_channel,
                       std::size_t capacity, int first_channel_id)
    : vector_(std::move(vector)) {
  if (double_channel) {
    binding_.emplace(first_channel_id, first_channel_id + 1, capacity);
  } else {
    single_.emplace(first_channel_id, capacity);
  }
}

double MemoryPort::read(std::int64_t addr) {
  return binding_ ? binding_->read_side().read(addr) : single_->read(addr);
}

void MemoryPort::write(std::int64_t addr, double v) {
  if (binding_) {
    binding_->write_side().write(addr, v);
  } else {
    single_->write(addr, v);
  }
}

void MemoryPort::flip() {
  if (binding_) binding_->flip();
}

int MemoryPort::write_channel_id() const {
  return binding_ ? const_cast<DoubleChannelBinding&>(*binding_).write_side().id()
                  : single_->id();
}

std::uint64_t MemoryPort::flip_count() const {
  return binding_ ? binding_->flip_count() : 0;
}

std::uint64_t MemoryPort::word_reads() const {
  return binding_ ? binding_->read_count() : single_->read_count();
}

std::uint64_t MemoryPort::word_writes() const {
  return binding_ ? binding_->write_count() : single_->write_count();
}

void MemoryPort::reset_counters() {
  if (binding_) {
    binding_->reset_counters();
  } else {
    single_->reset_counters();
  }
}

void MemoryPort::preload_read_side(std::span<const double> data) {
  if (binding_) {
    binding_->read_side().preload(data);
  } else {
    single_->preload(data);
  }
}

std::span<const double> MemoryPort::read_side_words() const {
  return binding_ ? const_cast<DoubleChannelBinding&>(*binding_).read_side().words()
                  : single_->words();
}

MemoryPort& SolverGraph::port(std::string_view vec) {
  for (auto& p : ports) {
    if (p.vector() == vec) return p;
  }
  throw SolverError("no memory port for vector '" + std::string(vec) + "'");
}

// ---------------------------------------------------------------------------

MemModule::MemModule(std::string name, MemoryPort& port, SolverStats& stats,
                     MemInstChan& instr_in, DataChan& data_out,
                     DataChan& data_in, RespChan& resp_out)
    : Module(std::move(name)),
      port_(port),
      stats_(stats),
      instr_in_(instr_in),
      data_out_(data_out),
      data_in_(data_in),
      resp_out_(resp_out) {
  instr_in_.bind_consumer(*this);
  data_in_.bind_consumer(*this);
  data_out_.bind_producer(*this);
  resp_out_.bind_producer(*this);
}

StepStatus MemModule::try_cycle() {
  switch (st_) {
    case St::Idle: {
      if (instr_in_.at_end()) {
        data_out_.close();
        resp_out_.close();
        return StepStatus::Done;
      }
      if (!instr_in_.can_pop()) {
        block_on_pop(instr_in_);
        return StepStatus::Blocked;
      }
      inst_ = instr_in_.pop();
      rd_done_ = inst_.rd ? 0 : inst_.len;
      wr_done_ = inst_.wr ? 0 : inst_.len;
      st_ = St::Run;
      return StepStatus::Progress;
    }
    case St::Run: {
      bool progressed = false;
      if (rd_done_ < inst_.len) {
        if (data_out_.can_push()) {
          data_out_.push({port_.read(inst_.base_addr + rd_done_)});
          ++rd_done_;
          progressed = true;
          if (rd_done_ == inst_.len && inst_.rd) ++stats_.iter_vector_reads;
        } else {
          block_on_push(data_out_);
        }
      }
      if (wr_done_ < inst_.len) {
        if (data_in_.can_pop()) {
          port_.write(inst_.base_addr + wr_done_, data_in_.pop().value);
          ++wr_done_;
          progressed = true;
          if (wr_done_ == inst_.len) ++stats_.iter_vector_writes;
        } else {
          block_on_pop(data_in_);
        }
      }
      if (rd_done_ == inst_.len && wr_done_ == inst_.len) {
        if (inst_.wr) {
          // The write is architecturally complete: swap the ping-pong roles
          // before anyone can act on the response.
          port_.flip();
          st_ = St::Respond;
        } else {
          st_ = St::Idle;
        }
      }
      return progressed ? StepStatus::Progress : StepStatus::Blocked;
    }
    case St::Respond: {
      if (!resp_out_.can_push()) {
        block_on_push(resp_out_);
        return StepStatus::Blocked;
      }
      resp_out_.push({port_.write_channel_id(), MemOp::Write, inst_.len});
      stats_.write_responses[port_.vector()]++;
      st_ = St::Idle;
      return StepStatus::Progress;
    }
  }
  return StepStatus::Blocked;
}

// ---------------------------------------------------------------------------

VecCtrlModule::VecCtrlModule(std::string name, SolverStats& stats,
                             InstChan& instr_in, MemInstChan& mem_instr,
                             DataChan& mem_out, DataChan& mem_in,
                             std::vector<VcRoute> routes)
    : Module(std::move(name)),
      stats_(stats),
      instr_in_(instr_in),
      mem_instr_(mem_instr),
      mem_out_(mem_out),
      mem_in_(mem_in),
      routes_(std::move(routes)) {
  instr_in_.bind_consumer(*this);
  mem_instr_.bind_producer(*this);
  mem_out_.bind_consumer(*this);
  mem_in_.bind_producer(*this);
  std::vector<DataChan*> produced, consumed;
  for (const VcRoute& r : routes_) {
    produced.insert(produced.end(), r.rd_to.begin(), r.rd_to.end());
    produced.insert(produced.end(), r.wr_tee.begin(), r.wr_tee.end());
    consumed.push_back(r.wr_from);
  }
  for_unique(produced, [&](DataChan& ch) { ch.bind_producer(*this); });
  for_unique(consumed, [&](DataChan& ch) { ch.bind_consumer(*this); });
}

StepStatus VecCtrlModule::try_cycle() {
  switch (st_) {
    case St::Idle: {
      if (instr_in_.at_end()) {
        mem_instr_.close();
        mem_in_.close();
        for (const VcRoute& r : routes_) {
          for (DataChan* ch : r.rd_to) {
            if (!ch->closed()) ch->close();
          }
          for (DataChan* ch : r.wr_tee) {
            if (!ch->closed()) ch->close();
          }
        }
        return StepStatus::Done;
      }
      if (!instr_in_.can_pop()) {
        block_on_pop(instr_in_);
        return StepStatus::Blocked;
      }
      Instruction raw = instr_in_.pop();
      const auto* vi = std::get_if<InstVCtrl>(&raw);
      if (vi == nullptr) {
        throw SolverError(name() + ": expected a vector control instruction");
      }
      inst_ = *vi;
      if (inst_.q_id >= routes_.size()) {
        throw SolverError(name() + ": no route for q_id " +
                          std::to_string(inst_.q_id));
      }
      route_ = &routes_[inst_.q_id];
      if (route_->rd != inst_.rd || route_->wr != inst_.wr) {
        throw SolverError(name() + ": rd/wr flags do not match route " +
                          std::to_string(inst_.q_id));
      }
      st_ = St::IssueMem;
      return StepStatus::Progress;
    }
    case St::IssueMem: {
      if (!mem_instr_.can_push()) {
        block_on_push(mem_instr_);
        return StepStatus::Blocked;
      }
      InstRdWr mi = make_rdwr(inst_.rd, inst_.wr, inst_.base_addr, inst_.len);
      mem_instr_.push(mi);
      issued_log_.push_back(render_trace(Instruction{mi}));
      if (mi.wr) stats_.writes_issued[name().substr(3)]++;  // strip "vc_"
      rd_done_ = inst_.rd ? 0 : inst_.len;
      wr_done_ = inst_.wr ? 0 : inst_.len;
      st_ = St::Run;
      return StepStatus::Progress;
    }
    case St::Run: {
      bool progressed = false;
      if (rd_done_ < inst_.len) {
        bool ok = mem_out_.can_pop();
        if (!ok) block_on_pop(mem_out_);
        for (DataChan* ch : route_->rd_to) {
          if (!ch->can_push()) {
            if (ok) block_on_push(*ch);
            ok = false;
          }
        }
        if (ok) {
          StreamElement e = mem_out_.pop();
          for (DataChan* ch : route_->rd_to) ch->push(e);
          ++rd_done_;
          progressed = true;
        }
      }
      if (wr_done_ < inst_.len) {
        bool ok = route_->wr_from->can_pop();
        if (!ok) block_on_pop(*route_->wr_from);
        if (ok && !mem_in_.can_push()) {
          block_on_push(mem_in_);
          ok = false;
        }
        for (DataChan* ch : route_->wr_tee) {
          if (!ch->can_push()) {
            if (ok) block_on_push(*ch);
            ok = false;
          }
        }
        if (ok) {
          StreamElement e = route_->wr_from->pop();
          mem_in_.push(e);
          for (DataChan* ch : route_->wr_tee) ch->push(e);
          ++wr_done_;
          progressed = true;
        }
      }
      if (rd_done_ == inst_.len && wr_done_ == inst_.len) st_ = St::Idle;
      return progressed ? StepStatus::Progress : StepStatus::Blocked;
    }
  }
  return StepStatus::Blocked;
}

// ---------------------------------------------------------------------------

SpmvModule::SpmvModule(std::string name, const ScheduledNonzeros& sched,
                       PrecisionScheme scheme, SolverStats& stats,
                       InstChan& instr_in, DataChan& x_in, DataChan& y_out)
    : Module(std::move(name)),
      sched_(sched),
      scheme_(scheme),
      stats_(stats),
      instr_in_(instr_in),
      x_in_(x_in),
      y_out_(y_out) {
  instr_in_.bind_consumer(*this);
  x_in_.bind_consumer(*this);
  y_out_.bind_producer(*this);
  out_tag_ = scheme_bits(scheme).output == 32 ? Precision::F32 : Precision::F64;
}

StepStatus SpmvModule::try_cycle() {
  switch (st_) {
    case St::Idle: {
      if (instr_in_.at_end()) {
        y_out_.close();
        return StepStatus::Done;
      }
      if (!instr_in_.can_pop()) {
        block_on_pop(instr_in_);
        return StepStatus::Blocked;
      }
      const auto ci = std::get<InstCmp>(instr_in_.pop());
      len_ = ci.len;
      collected_ = emitted_ = 0;
      x_.resize(static_cast<std::size_t>(len_));
      st_ = St::Collect;
      return StepStatus::Progress;
    }
    case St::Collect: {
      if (!x_in_.can_pop()) {
        block_on_pop(x_in_);
        return StepStatus::Blocked;
      }
      x_[static_cast<std::size_t>(collected_)] = x_in_.pop().value;
      ++collected_;
      if (collected_ == len_) {
        y_ = spmv_streamed(sched_, x_, scheme_);
        for (const auto& lane : sched_.pe_entries) {
          stats_.matrix_elements += lane.size();
        }
        st_ = St::Emit;
      }
      return StepStatus::Progress;
    }
    case St::Emit: {
      if (!y_out_.can_push()) {
        block_on_push(y_out_);
        return StepStatus::Blocked;
      }
      y_out_.push({y_[static_cast<std::size_t>(emitted_)], out_tag_});
      ++emitted_;
      if (emitted_ == len_) st_ = St::Idle;
      return StepStatus::Progress;
    }
  }
  return StepStatus::Blocked;
}

// ---------------------------------------------------------------------------

DotModule::DotModule(std::string name, std::size_t delay_buffer_len,
                     InstChan& instr_in, DataChan& in1, DataChan* in2,
                     DataChan* forward1, ScalarChan& scalar_out)
    : Module(std::move(name)),
      instr_in_(instr_in),
      in1_(in1),
      in2_(in2),
      forward1_(forward1),
      scalar_out_(scalar_out),
      buf_(delay_buffer_len) {
  instr_in_.bind_consumer(*this);
  in1_.bind_consumer(*this);
  if (in2_ != nullptr) in2_->bind_consumer(*this);
  if (forward1_ != nullptr) forward1_->bind_producer(*this);
  scalar_out_.bind_producer(*this);
}

StepStatus DotModule::try_cycle() {
  switch (st_) {
    case St::Idle: {
      if (instr_in_.at_end()) {
        if (forward1_ != nullptr) forward1_->close();
        scalar_out_.close();
        return StepStatus::Done;
      }
      if (!instr_in_.can_pop()) {
        block_on_pop(instr_in_);
        return StepStatus::Blocked;
      }
      const auto ci = std::get<InstCmp>(instr_in_.pop());
      len_ = ci.len;
      i_ = 0;
      buf_.clear();
      st_ = St::Accumulate;
      return StepStatus::Progress;
    }
    case St::Accumulate: {
      bool ok = in1_.can_pop();
      if (!ok) block_on_pop(in1_);
      if (ok && in2_ != nullptr && !in2_->can_pop()) {
        block_on_pop(*in2_);
        ok = false;
      }
      if (ok && forward1_ != nullptr && !forward1_->can_push()) {
        block_on_push(*forward1_);
        ok = false;
      }
      if (!ok) return StepStatus::Blocked;
      StreamElement a = in1_.pop();
      double term;
      if (in2_ != nullptr) {
        term = a.value * in2_->pop().value;
      } else {
        term = a.value * a.value;
      }
      if (forward1_ != nullptr) forward1_->push(a);
      buf_.accumulate(static_cast<std::uint64_t>(i_), term);
      ++i_;
      if (i_ == len_) st_ = St::Reduce;
      return StepStatus::Progress;
    }
    case St::Reduce: {
      if (!scalar_out_.can_push()) {
        block_on_push(scalar_out_);
        return StepStatus::Blocked;
      }
      scalar_out_.push(buf_.reduce());
      st_ = St::Idle;
      return StepStatus::Progress;
    }
  }
  return StepStatus::Blocked;
}

// ---------------------------------------------------------------------------

AxpyModule::AxpyModule(std::string name, bool subtract, InstChan& instr_in,
                       DataChan& in1, std::vector<Route> routes)
    : Module(std::move(name)),
      subtract_(subtract),
      instr_in_(instr_in),
      in1_(in1),
      routes_(std::move(routes)) {
  instr_in_.bind_consumer(*this);
  in1_.bind_consumer(*this);
  std::vector<DataChan*> produced, consumed;
  for (const Route& r : routes_) {
    consumed.push_back(r.in2);
    produced.push_back(r.out);
    produced.push_back(r.forward2);
  }
  for_unique(produced, [&](DataChan& ch) { ch.bind_producer(*this); });
  for_unique(consumed, [&](DataChan& ch) { ch.bind_consumer(*this); });
}

StepStatus AxpyModule::try_cycle() {
  switch (st_) {
    case St::Idle: {
      if (instr_in_.at_end()) {
        for (const Route& r : routes_) {
          if (r.out != nullptr && !r.out->closed()) r.out->close();
          if (r.forward2 != nullptr && !r.forward2->closed()) {
            r.forward2->close();
          }
        }
        return StepStatus::Done;
      }
      if (!instr_in_.can_pop()) {
        block_on_pop(instr_in_);
        return StepStatus::Blocked;
      }
      inst_ = std::get<InstCmp>(instr_in_.pop());
      if (inst_.q_id >= routes_.size()) {
        throw SolverError(name() + ": no route for q_id " +
                          std::to_string(inst_.q_id));
      }
      route_ = &routes_[inst_.q_id];
      i_ = 0;
      st_ = St::Run;
      return StepStatus::Progress;
    }
    case St::Run: {
      bool ok = in1_.can_pop();
      if (!ok) block_on_pop(in1_);
      if (ok && !route_->in2->can_pop()) {
        block_on_pop(*route_->in2);
        ok = false;
      }
      if (ok && !route_->out->can_push()) {
        block_on_push(*route_->out);
        ok = false;
      }
      if (ok && route_->forward2 != nullptr && !route_->forward2->can_push()) {
        block_on_push(*route_->forward2);
        ok = false;
      }
      if (!ok) return StepStatus::Blocked;
      StreamElement a = in1_.pop();
      StreamElement b = route_->in2->pop();
      double result;
      if (inst_.alpha == 0.0) {
        result = a.value;
      } else {
        double scaled = inst_.alpha * b.value;
        result = subtract_ ? a.value - scaled : a.value + scaled;
      }
      route_->out->push({result});
      if (route_->forward2 != nullptr) route_->forward2->push(b);
      ++i_;
      if (i_ == inst_.len) st_ = St::Idle;
      return StepStatus::Progress;
    }
  }
  return StepStatus::Blocked;
}

// ---------------------------------------------------------------------------

LeftDivModule::LeftDivModule(std::string name, std::uint32_t latency,
                             InstChan& instr_in, DataChan& m_in,
                             DataChan& r_in, std::vector<Route> routes)
    : Module(std::move(name)),
      instr_in_(instr_in),
      m_in_(m_in),
      r_in_(r_in),
      routes_(std::move(routes)),
      stage_(latency) {
  instr_in_.bind_consumer(*this);
  m_in_.bind_consumer(*this);
  r_in_.bind_consumer(*this);
  std::vector<DataChan*> produced;
  for (const Route& r : routes_) {
    produced.push_back(r.z_out);
    produced.push_back(r.r_out);
  }
  for_unique(produced, [&](DataChan& ch) { ch.bind_producer(*this); });
}

StepStatus LeftDivModule::try_cycle() {
  switch (st_) {
    case St::Idle: {
      if (instr_in_.at_end()) {
        for (const Route& r : routes_) {
          if (r.z_out != nullptr && !r.z_out->closed()) r.z_out->close();
          if (r.r_out != nullptr && !r.r_out->closed()) r.r_out->close();
        }
        return StepStatus::Done;
      }
      if (!instr_in_.can_pop()) {
        block_on_pop(instr_in_);
        return StepStatus::Blocked;
      }
      inst_ = std::get<InstCmp>(instr_in_.pop());
      if (inst_.q_id >= routes_.size()) {
        throw SolverError(name() + ": no route for q_id " +
                          std::to_string(inst_.q_id));
      }
      route_ = &routes_[inst_.q_id];
      consumed_ = emitted_ = 0;
      st_ = St::Run;
      return StepStatus::Progress;
    }
    case St::Run: {
      // One pipeline cycle: emit the due z (if any), forward r, consume the
      // next (m, r) pair. All ports must be free or the pipeline stalls.
      bool ready = stage_.has_ready();
      bool ok = true;
      if (ready && !route_->z_out->can_push()) {
        ok = false;
        block_on_push(*route_->z_out);
      }
      if (ok && !m_in_.can_pop()) {
        ok = false;
        block_on_pop(m_in_);
      }
      if (ok && !r_in_.can_pop()) {
        ok = false;
        block_on_pop(r_in_);
      }
      if (ok && route_->r_out != nullptr && !route_->r_out->can_push()) {
        ok = false;
        block_on_push(*route_->r_out);
      }
      if (!ok) return StepStatus::Blocked;

      if (ready) {
        route_->z_out->push(stage_.take_ready());
        ++emitted_;
      }
      StreamElement m = m_in_.pop();
      StreamElement r = r_in_.pop();
      if (m.value == 0.0) {
        throw SolverError("left divide: zero divisor at index " +
                          std::to_string(consumed_));
      }
      if (route_->r_out != nullptr) route_->r_out->push(r);
      stage_.insert({r.value / m.value});
      stage_.advance();
      ++consumed_;
      if (consumed_ == inst_.len) st_ = St::Drain;
      return StepStatus::Progress;
    }
    case St::Drain: {
      if (emitted_ == inst_.len) {
        st_ = St::Idle;
        return StepStatus::Progress;
      }
      if (stage_.has_ready()) {
        if (!route_->z_out->can_push()) {
          block_on_push(*route_->z_out);
          return StepStatus::Blocked;
        }
        route_->z_out->push(stage_.take_ready());
        ++emitted_;
        stage_.advance();
        return StepStatus::Progress;
      }
      stage_.advance();
      return StepStatus::Progress;
    }
  }
  return StepStatus::Blocked;
}

// ---------------------------------------------------------------------------

std::size_t channel_depth(const SolverConfig& cfg, const std::string& name,
                          std::size_t fallback) {
  auto it = cfg.fifo_depths.find(name);
  return it == cfg.fifo_depths.end() ? fallback : it->second;
}

namespace {

struct Builder {
  const SolverConfig& cfg;
  index_t n;
  SolverGraph& sg;
  ChannelDefaults def;

  DataChan& data(const std::string& name, std::size_t fallback) {
    return sg.graph.add_channel<StreamElement>(
        name, channel_depth(cfg, name, fallback));
  }
  InstChan& inst(const std::string& name) {
    InstChan& ch = sg.graph.add_channel<Instruction>(
        name, channel_depth(cfg, name, def.instr));
    sg.instr[name.substr(6)] = &ch;  // strip "instr_"
    return ch;
  }
  ScalarChan& scalar(const std::string& name) {
    return sg.graph.add_channel<double>(name,
                                        channel_depth(cfg, name, def.scalar));
  }

  // One memory port with its mem module and the vc-facing channels.
  struct MemHookup {
    MemInstChan* mi;
    DataChan* out;
    DataChan* in;
    RespChan* resp;
  };
  MemHookup memory(const std::string& vec, bool double_channel,
                   int& next_channel_id) {
    sg.ports.emplace_back(vec, double_channel,
                          static_cast<std::size_t>(n) + 1,
                          next_channel_id);
    next_channel_id += double_channel ? 2 : 1;
    MemoryPort& port = sg.ports.back();
    auto& mi = sg.graph.add_channel<InstRdWr>(
        "mi_" + vec, channel_depth(cfg, "mi_" + vec, def.instr));
    auto& out = data("md_" + vec + "_out", def.data);
    auto& in = data("md_" + vec + "_in", def.data);
    auto& resp = sg.graph.add_channel<MemResponse>(
        "resp_" + vec, channel_depth(cfg, "resp_" + vec, def.resp));
    sg.resps[vec] = &resp;
    sg.graph.add_module<MemModule>("mem_" + vec, port, sg.stats, mi, out, in,
                                   resp);
    return {&mi, &out, &in, &resp};
  }

  VecCtrlModule& vecctrl(const std::string& vec, const MemHookup& hook,
                         std::vector<VcRoute> routes) {
    auto& vc = sg.graph.add_module<VecCtrlModule>(
        "vc_" + vec, sg.stats, inst("instr_vc_" + vec), *hook.mi, *hook.out,
        *hook.in, std::move(routes));
    sg.vecctrls.push_back(&vc);
    return vc;
  }
};

}  // namespace

std::unique_ptr<SolverGraph> build_solver_graph(
    const SolverConfig& cfg, index_t n, const ScheduledNonzeros& sched) {
  auto sg = std::make_unique<SolverGraph>();
  Builder b{cfg, n, *sg, {}};
  const bool decentralized = cfg.schedule_mode == ScheduleMode::Decentralized;
  int channel_id = 0;

  // Data channels between modules.
  DataChan& p_to_m1 = b.data("p_to_m1", b.def.data);
  DataChan& p_to_m2 = b.data("p_to_m2", b.def.data);
  DataChan& p_to_m3 = b.data("p_to_m3", b.def.data);
  DataChan& p_to_m7 = b.data("p_to_m7", b.def.data);
  DataChan& ap_m1_out = b.data("ap_m1_out", b.def.data);
  DataChan& ap_to_m2 = b.data("ap_to_m2", b.def.data);
  DataChan& ap_to_m4 = b.data("ap_to_m4", b.def.data);
  DataChan& r_to_m4 = b.data("r_to_m4", b.def.data);
  DataChan& m_to_m5 = b.data("m_to_m5", b.def.data);
  DataChan& x_to_m3 = b.data("x_to_m3", b.def.data);
  DataChan& m3_x_out = b.data("m3_x_out", b.def.data);
  DataChan& m7_p_out = b.data("m7_p_out", b.def.data);

  ScalarChan& m2_scalar = b.scalar("m2_scalar");
  ScalarChan& m6_scalar = b.scalar("m6_scalar");
  ScalarChan& m8_scalar = b.scalar("m8_scalar");
  sg->m2_scalar = &m2_scalar;
  sg->m6_scalar = &m6_scalar;
  sg->m8_scalar = &m8_scalar;

  if (decentralized) {
    DataChan& m4_to_m5 = b.data("m4_to_m5", b.def.data);
    DataChan& m4_to_r_wr = b.data("m4_to_r_wr", b.def.data);
    DataChan& m5_z_to_m6 = b.data("m5_z_to_m6", b.def.data);
    // The r forward outruns z by the divide latency; the join at M6 needs
    // at least latency+1 slots on the fast side.
    DataChan& m5_r_to_m6 = b.data(
        "m5_r_to_m6",
        static_cast<std::size_t>(min_safe_depth(cfg.left_divide_latency)));
    DataChan& m5_z_to_m7 = b.data("m5_z_to_m7", b.def.data);
    DataChan& m5_r_to_wr = b.data("m5_r_to_wr", b.def.data);
    DataChan& m6_r_to_m8 = b.data("m6_r_to_m8", b.def.data);
    DataChan& m7_pold_to_m3 = b.data("m7_pold_to_m3", b.def.data);

    auto hp = b.memory("p", true, channel_id);
    auto hr = b.memory("r", true, channel_id);
    auto hx = b.memory("x", true, channel_id);
    auto hap = b.memory("ap", true, channel_id);
    auto hm = b.memory("m", false, channel_id);

    b.vecctrl("p", hp,
              {{true, false, {&p_to_m1}, nullptr, {}},
               {true, false, {&p_to_m2}, nullptr, {}},
               {true, true, {&p_to_m7}, &m7_p_out, {}},
               {true, false, {&p_to_m3}, nullptr, {}}});
    // Phase-3 reads r back to M4 while storing the update from M5 (or from
    // M4 directly on the converged trip); the two paths run concurrently.
    b.vecctrl("r", hr,
              {{true, false, {&r_to_m4}, nullptr, {}},
               {true, true, {&r_to_m4}, &m5_r_to_wr, {}},
               {true, true, {&r_to_m4}, &m4_to_r_wr, {}}});
    b.vecctrl("x", hx, {{true, true, {&x_to_m3}, &m3_x_out, {}}});
    b.vecctrl("ap", hap,
              {{false, true, {}, &ap_m1_out, {&ap_to_m2}},
               {false, true, {}, &ap_m1_out, {}},
               {true, false, {&ap_to_m4}, nullptr, {}}});
    b.vecctrl("m", hm, {{true, false, {&m_to_m5}, nullptr, {}}});

    sg->graph.add_module<SpmvModule>("m1", sched, cfg.scheme, sg->stats,
                                     b.inst("instr_m1"), p_to_m1, ap_m1_out);
    sg->graph.add_module<DotModule>("m2", cfg.delay_buffer_len,
                                    b.inst("instr_m2"), p_to_m2, &ap_to_m2,
                                    nullptr, m2_scalar);
    sg->graph.add_module<AxpyModule>(
        "m3", false, b.inst("instr_m3"), x_to_m3,
        std::vector<AxpyModule::Route>{{&m7_pold_to_m3, &m3_x_out, nullptr},
                                       {&p_to_m3, &m3_x_out, nullptr}});
    sg->graph.add_module<AxpyModule>(
        "m4", true, b.inst("instr_m4"), r_to_m4,
        std::vector<AxpyModule::Route>{{&ap_to_m4, &m4_to_m5, nullptr},
                                       {&ap_to_m4, &m4_to_r_wr, nullptr}});
    sg->graph.add_module<LeftDivModule>(
        "m5", cfg.left_divide_latency, b.inst("instr_m5"), m_to_m5, m4_to_m5,
        std::vector<LeftDivModule::Route>{{&m5_z_to_m6, &m5_r_to_m6},
                                          {&m5_z_to_m7, &m5_r_to_wr}});
    sg->graph.add_module<DotModule>("m6", cfg.delay_buffer_len,
                                    b.inst("instr_m6"), m5_r_to_m6,
                                    &m5_z_to_m6, &m6_r_to_m8, m6_scalar);
    sg->graph.add_module<AxpyModule>(
        "m7", false, b.inst("instr_m7"), m5_z_to_m7,
        std::vector<AxpyModule::Route>{{&p_to_m7, &m7_p_out, &m7_pold_to_m3},
                                       {&p_to_m7, &m7_p_out, nullptr}});
    sg->graph.add_module<DotModule>("m8", cfg.delay_buffer_len,
                                    b.inst("instr_m8"), m6_r_to_m8, nullptr,
                                    nullptr, m8_scalar);
  } else {
    DataChan& m4_r_out = b.data("m4_r_out", b.def.data);
    DataChan& r_to_m5 = b.data("r_to_m5", b.def.data);
    DataChan& r_to_m6 = b.data("r_to_m6", b.def.data);
    DataChan& r_to_m8 = b.data("r_to_m8", b.def.data);
    DataChan& m5_z_out = b.data("m5_z_out", b.def.data);
    DataChan& z_to_m6 = b.data("z_to_m6", b.def.data);
    DataChan& z_to_m7 = b.data("z_to_m7", b.def.data);

    auto hp = b.memory("p", false, channel_id);
    auto hr = b.memory("r", false, channel_id);
    auto hx = b.memory("x", false, channel_id);
    auto hap = b.memory("ap", false, channel_id);
    auto hm = b.memory("m", false, channel_id);
    auto hz = b.memory("z", false, channel_id);

    b.vecctrl("p", hp,
              {{true, false, {&p_to_m1}, nullptr, {}},
               {true, false, {&p_to_m2}, nullptr, {}},
               {true, false, {&p_to_m3}, nullptr, {}},
               {true, true, {&p_to_m7}, &m7_p_out, {}}});
    b.vecctrl("r", hr,
              {{true, true, {&r_to_m4}, &m4_r_out, {}},
               {true, false, {&r_to_m8}, nullptr, {}},
               {true, false, {&r_to_m5}, nullptr, {}},
               {true, false, {&r_to_m6}, nullptr, {}}});
    b.vecctrl("x", hx, {{true, true, {&x_to_m3}, &m3_x_out, {}}});
    b.vecctrl("ap", hap,
              {{false, true, {}, &ap_m1_out, {}},
               {true, false, {&ap_to_m2}, nullptr, {}},
               {true, false, {&ap_to_m4}, nullptr, {}}});
    b.vecctrl("m", hm, {{true, false, {&m_to_m5}, nullptr, {}}});
    b.vecctrl("z", hz,
              {{false, true, {}, &m5_z_out, {}},
               {true, false, {&z_to_m6}, nullptr, {}},
               {true, false, {&z_to_m7}, nullptr, {}}});

    sg->graph.add_module<SpmvModule>("m1", sched, cfg.scheme, sg->stats,
                                     b.inst("instr_m1"), p_to_m1, ap_m1_out);
    sg->graph.add_module<DotModule>("m2", cfg.delay_buffer_len,
                                    b.inst("instr_m2"), p_to_m2, &ap_to_m2,
                                    nullptr, m2_scalar);
    sg->graph.add_module<AxpyModule>(
        "m3", false, b.inst("instr_m3"), x_to_m3,
        std::vector<AxpyModule::Route>{{&p_to_m3, &m3_x_out, nullptr}});
    sg->graph.add_module<AxpyModule>(
        "m4", true, b.inst("instr_m4"), r_to_m4,
        std::vector<AxpyModule::Route>{{&ap_to_m4, &m4_r_out, nullptr}});
    sg->graph.add_module<LeftDivModule>(
        "m5", cfg.left_divide_latency, b.inst("instr_m5"), m_to_m5, r_to_m5,
        std::vector<LeftDivModule::Route>{{&m5_z_out, nullptr}});
    sg->graph.add_module<DotModule>("m6", cfg.delay_buffer_len,
                                    b.inst("instr_m6"), r_to_m6, &z_to_m6,
                                    nullptr, m6_scalar);
    sg->graph.add_module<AxpyModule>(
        "m7", false, b.inst("instr_m7"), z_to_m7,
        std::vector<AxpyModule::Route>{{&p_to_m7, &m7_p_out, nullptr}});
    sg->graph.add_module<DotModule>("m8", cfg.delay_buffer_len,
                                    b.inst("instr_m8"), r_to_m8, nullptr,
                                    nullptr, m8_scalar);
  }

  return sg;
}

}  // namespace jpcg::detail
