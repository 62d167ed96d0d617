#include "jpcg/controller.hpp"

#include <algorithm>
#include <cmath>

#include "solver_graph.hpp"

namespace jpcg {

using detail::InstChan;
using detail::RespChan;
using detail::ScalarChan;
using detail::SolverGraph;

std::pair<double, double> scalar_step(double rz, double rz_new,
                                      double p_dot_ap) {
  if (p_dot_ap == 0.0) throw SolverError("CG breakdown: p.Ap = 0");
  if (rz == 0.0) throw SolverError("CG breakdown: rz = 0");
  return {rz / p_dot_ap, rz_new / rz};
}

TerminationDecision should_terminate(double rr, std::int64_t rp,
                                     const SolverConfig& cfg) {
  if (rr <= cfg.tol) return {true, "converged"};
  if (rp + 1 >= cfg.max_iters) return {true, "budget"};
  return {false, ""};
}

namespace detail {

/// The global controller: issues the per-trip instruction bundles, keeps
/// every scalar, applies the initialization merge at rp == -1 and the
/// residual-first reordering that skips M5..M7 once converged.
class ControllerModule : public Module {
 public:
  ControllerModule(SolverGraph& sg, const SolverConfig& cfg, index_t n,
                   std::uint64_t max_lane_len)
      : Module("ctrl"),
        sg_(sg),
        cfg_(cfg),
        n_(n),
        max_lane_(max_lane_len) {
    for (auto& [name, ch] : sg_.instr) ch->bind_producer(*this);
    sg_.m2_scalar->bind_consumer(*this);
    sg_.m6_scalar->bind_consumer(*this);
    sg_.m8_scalar->bind_consumer(*this);
    for (auto& [vec, ch] : sg_.resps) ch->bind_consumer(*this);
    if (cfg_.schedule_mode == ScheduleMode::Decentralized) {
      vec_fsms_ = decentralized_vecctrl_fsms();
      cmp_fsms_ = decentralized_compute_fsms();
    }
  }

  SolverReport report;
  ScalarState scalars;

 protected:
  StepStatus try_cycle() override;

 private:
  enum class Ph {
    IterStart,
    Issue,
    PopPAp,
    PopRzNew,
    PopRr,
    PopResp,
    IterEnd,
    Shutdown,
  };

  void emit(const std::string& module, Instruction inst, int phase);
  void build_phase1(std::int64_t rp);
  void build_after_alpha(std::int64_t rp);
  void build_phase3(std::int64_t rp, bool reduced);
  void expect_resp(std::initializer_list<const char*> vecs);
  std::uint64_t trip_cycle_estimate(std::int64_t rp, bool reduced) const;

  SolverGraph& sg_;
  const SolverConfig& cfg_;
  index_t n_;
  std::uint64_t max_lane_;

  Ph ph_ = Ph::IterStart;
  Ph next_ = Ph::IterStart;  // continuation after Issue / PopResp
  std::deque<std::pair<InstChan*, Instruction>> pending_;
  std::vector<RespChan*> pending_resps_;
  std::size_t resp_i_ = 0;
  bool reduced_tail_ = false;
  bool stopping_ = false;
  IterationCounters cur_{};

  std::vector<VecCtrlFsm> vec_fsms_;
  std::vector<ComputeFsm> cmp_fsms_;
};

void ControllerModule::emit(const std::string& module, Instruction inst,
                            int phase) {
  pending_.emplace_back(sg_.instr.at(module), inst);
  report.instruction_log.push_back(render_trace(inst));
  if (const auto* v = std::get_if<InstVCtrl>(&inst)) {
    if (v->rd) ++cur_.phase_reads[phase];
    if (v->wr) ++cur_.phase_writes[phase];
  }
}

void ControllerModule::expect_resp(
    std::initializer_list<const char*> vecs) {
  pending_resps_.clear();
  resp_i_ = 0;
  for (const char* v : vecs) pending_resps_.push_back(sg_.resps.at(v));
}

// Phase-1 plus every read that has no scalar dependency (prefetch).
void ControllerModule::build_phase1(std::int64_t rp) {
  const bool init = rp < 0;
  const bool dec = cfg_.schedule_mode == ScheduleMode::Decentralized;
  emit("vc_p", make_vctrl(1, 0, 0, n_, 0), 0);     // p -> M1
  emit("m1", make_cmp(n_, 0.0, 0), 0);
  emit("vc_ap", make_vctrl(0, 1, 0, n_, dec ? (init ? 1u : 0u) : 0u), 0);
  if (!init) {
    emit("vc_p", make_vctrl(1, 0, 0, n_, 1), 0);   // p -> M2
    if (!dec) emit("vc_ap", make_vctrl(1, 0, 0, n_, 1), 0);  // ap -> M2
    emit("m2", make_cmp(n_, 0.0, 0), 0);
  }
  if (dec) {
    // Phase-2 reads can stream ahead of the alpha barrier.
    emit("vc_r", make_vctrl(1, 0, 0, n_, 0), 1);   // r -> M4
    emit("vc_ap", make_vctrl(1, 0, 0, n_, 2), 1);  // ap -> M4
    emit("vc_m", make_vctrl(1, 0, 0, n_, 0), 1);   // m -> M5
  }
}

// Everything that needs alpha but not the residual decision.
void ControllerModule::build_after_alpha(std::int64_t rp) {
  const bool init = rp < 0;
  const double alpha = scalars.alpha;
  if (cfg_.schedule_mode == ScheduleMode::Decentralized) {
    emit("m4", make_cmp(n_, alpha, 0), 1);  // -> M5 chain
    emit("m5", make_cmp(n_, 0.0, 0), 1);    // z -> M6, r -> M6
    emit("m6", make_cmp(n_, 0.0, 0), 1);
    emit("m8", make_cmp(n_, 0.0, 0), 1);
    // Phase-3 reads whose routing is decision-independent. The second r
    // read is bundled with the r write (route depends on the decision).
    emit("vc_ap", make_vctrl(1, 0, 0, n_, 2), 2);  // ap -> M4 again
    if (!init) {
      emit("vc_x", make_vctrl(1, 1, 0, n_, 0), 2);  // x <-> M3
    }
  } else {
    if (!init) {
      emit("vc_x", make_vctrl(1, 1, 0, n_, 0), 2);
      emit("vc_p", make_vctrl(1, 0, 0, n_, 2), 2);  // p -> M3
      emit("m3", make_cmp(n_, alpha, 0), 2);
    }
    emit("vc_r", make_vctrl(1, 1, 0, n_, 0), 1);    // r <-> M4
    emit("vc_ap", make_vctrl(1, 0, 0, n_, 2), 1);   // ap -> M4
    emit("m4", make_cmp(n_, alpha, 0), 1);
    emit("vc_r", make_vctrl(1, 0, 0, n_, 1), 1);    // r -> M8
    emit("m8", make_cmp(n_, 0.0, 0), 1);
  }
}

void ControllerModule::build_phase3(std::int64_t rp, bool reduced) {
  const bool init = rp < 0;
  const double alpha = scalars.alpha;
  if (cfg_.schedule_mode == ScheduleMode::Decentralized) {
    if (!reduced) {
      emit("vc_m", make_vctrl(1, 0, 0, n_, 0), 2);     // m -> M5 again
      emit("vc_p", make_vctrl(1, 1, 0, n_, 2), 2);     // p <-> M7
      emit("vc_r", make_vctrl(1, 1, 0, n_, 1), 2);     // r -> M4, r <- M5
      emit("m4", make_cmp(n_, alpha, 0), 2);           // -> M5
      emit("m5", make_cmp(n_, 0.0, 1), 2);             // z -> M7, r -> mem
      emit("m7", make_cmp(n_, scalars.beta, init ? 1u : 0u), 2);
      if (!init) emit("m3", make_cmp(n_, alpha, 0), 2);  // p_old from M7
    } else {
      emit("vc_r", make_vctrl(1, 1, 0, n_, 2), 2);     // r -> M4, r <- M4
      emit("m4", make_cmp(n_, alpha, 1), 2);           // -> r writer
      if (!init) {
        emit("vc_p", make_vctrl(1, 0, 0, n_, 3), 2);   // p -> M3 directly
        emit("m3", make_cmp(n_, alpha, 1), 2);
      }
    }
  } else {
    if (!reduced) {
      emit("vc_m", make_vctrl(1, 0, 0, n_, 0), 2);     // m -> M5
      emit("vc_r", make_vctrl(1, 0, 0, n_, 2), 2);     // r -> M5
      emit("m5", make_cmp(n_, 0.0, 0), 2);             // z -> mem
      emit("vc_z", make_vctrl(0, 1, 0, n_, 0), 2);     // z <- M5
      emit("vc_z", make_vctrl(1, 0, 0, n_, 1), 2);     // z -> M6
      emit("vc_r", make_vctrl(1, 0, 0, n_, 3), 2);     // r -> M6
      emit("m6", make_cmp(n_, 0.0, 0), 2);
    }
  }
}

std::uint64_t ControllerModule::trip_cycle_estimate(std::int64_t rp,
                                                    bool reduced) const {
  const auto un = static_cast<std::uint64_t>(n_);
  const std::uint32_t L = cfg_.left_divide_latency;
  PhaseCycleModel ph1{{max_lane_, un, un},
                      {},
                      rp >= 0 ? 1u : 0u,
                      cfg_.delay_buffer_len};
  PhaseCycleModel ph2{{un}, {L}, 2, cfg_.delay_buffer_len};
  PhaseCycleModel ph3{{un},
                      reduced ? std::vector<std::uint64_t>{}
                              : std::vector<std::uint64_t>{L},
                      0,
                      cfg_.delay_buffer_len};
  std::array<PhaseCycleModel, 3> phases{ph1, ph2, ph3};
  return estimate_iteration_cycles(phases);
}

StepStatus ControllerModule::try_cycle() {
  switch (ph_) {
    case Ph::IterStart: {
      cur_ = IterationCounters{};
      cur_.rp = scalars.rp;
      sg_.stats.reset_iteration();
      for (auto& port : sg_.ports) port.reset_counters();
      build_phase1(scalars.rp);
      ph_ = Ph::Issue;
      const bool dec = cfg_.schedule_mode == ScheduleMode::Decentralized;
      if (scalars.rp >= 0) {
        next_ = Ph::PopPAp;
      } else {
        scalars.alpha = 1.0;  // line-1 of the merged initialization
        build_after_alpha(scalars.rp);
        next_ = dec ? Ph::PopRzNew : Ph::PopRr;
      }
      return StepStatus::Progress;
    }
    case Ph::Issue: {
      if (pending_.empty()) {
        ph_ = next_;
        return StepStatus::Progress;
      }
      auto& [ch, inst] = pending_.front();
      if (!ch->can_push()) {
        block_on_push(*ch);
        return StepStatus::Blocked;
      }
      ch->push(inst);
      pending_.pop_front();
      return StepStatus::Progress;
    }
    case Ph::PopPAp: {
      if (!sg_.m2_scalar->can_pop()) {
        block_on_pop(*sg_.m2_scalar);
        return StepStatus::Blocked;
      }
      double p_dot_ap = sg_.m2_scalar->pop();
      if (p_dot_ap <= 0.0) {
        throw SolverError("CG breakdown: p.Ap = " + std::to_string(p_dot_ap));
      }
      scalars.alpha = scalars.rz / p_dot_ap;
      build_after_alpha(scalars.rp);
      ph_ = Ph::Issue;
      next_ = cfg_.schedule_mode == ScheduleMode::Decentralized ? Ph::PopRzNew
                                                                : Ph::PopRr;
      return StepStatus::Progress;
    }
    case Ph::PopRzNew: {
      if (!sg_.m6_scalar->can_pop()) {
        block_on_pop(*sg_.m6_scalar);
        return StepStatus::Blocked;
      }
      scalars.rz_new = sg_.m6_scalar->pop();
      if (cfg_.schedule_mode == ScheduleMode::Decentralized) {
        ph_ = Ph::PopRr;
        return StepStatus::Progress;
      }
      // Naive order runs M6 after the residual decision; finish phase 3.
      if (scalars.rp >= 0 && scalars.rz == 0.0) {
        throw SolverError("CG breakdown: rz = 0");
      }
      scalars.beta = scalars.rp < 0 ? 0.0 : scalars.rz_new / scalars.rz;
      emit("vc_z", make_vctrl(1, 0, 0, n_, 2), 2);   // z -> M7
      emit("vc_p", make_vctrl(1, 1, 0, n_, 3), 2);   // p <-> M7
      emit("m7", make_cmp(n_, scalars.beta, 0), 2);
      scalars.rz = scalars.rz_new;
      ph_ = Ph::Issue;
      next_ = Ph::PopResp;
      if (scalars.rp < 0) {
        expect_resp({"ap", "r", "z", "p"});
      } else {
        expect_resp({"ap", "x", "r", "z", "p"});
      }
      return StepStatus::Progress;
    }
    case Ph::PopRr: {
      if (!sg_.m8_scalar->can_pop()) {
        block_on_pop(*sg_.m8_scalar);
        return StepStatus::Blocked;
      }
      scalars.rr = sg_.m8_scalar->pop();
      report.residual_trace.emplace_back(scalars.rp, scalars.rr);
      TerminationDecision td = should_terminate(scalars.rr, scalars.rp, cfg_);
      stopping_ = td.stop;
      if (stopping_) report.termination_reason = td.reason;
      reduced_tail_ = cfg_.early_exit && scalars.rr <= cfg_.tol;

      const bool dec = cfg_.schedule_mode == ScheduleMode::Decentralized;
      if (dec) {
        if (!reduced_tail_) {
          if (scalars.rp >= 0 && scalars.rz == 0.0) {
            throw SolverError("CG breakdown: rz = 0");
          }
          scalars.beta =
              scalars.rp < 0 ? 0.0 : scalars.rz_new / scalars.rz;
          build_phase3(scalars.rp, false);
          scalars.rz = scalars.rz_new;
        } else {
          build_phase3(scalars.rp, true);
        }
        if (scalars.rp < 0) {
          expect_resp(reduced_tail_
                          ? std::initializer_list<const char*>{"ap", "r"}
                          : std::initializer_list<const char*>{"ap", "r",
                                                               "p"});
        } else {
          expect_resp(reduced_tail_
                          ? std::initializer_list<const char*>{"ap", "r", "x"}
                          : std::initializer_list<const char*>{"ap", "r", "p",
                                                               "x"});
        }
        ph_ = Ph::Issue;
        next_ = Ph::PopResp;
        return StepStatus::Progress;
      }
      // Naive: M8 sits right after M4; a converged trip never runs M5..M7.
      if (reduced_tail_) {
        if (scalars.rp < 0) {
          expect_resp({"ap", "r"});
        } else {
          expect_resp({"ap", "x", "r"});
        }
        ph_ = Ph::PopResp;
        return StepStatus::Progress;
      }
      build_phase3(scalars.rp, false);
      ph_ = Ph::Issue;
      next_ = Ph::PopRzNew;
      return StepStatus::Progress;
    }
    case Ph::PopResp: {
      if (resp_i_ < pending_resps_.size()) {
        RespChan* ch = pending_resps_[resp_i_];
        if (!ch->can_pop()) {
          block_on_pop(*ch);
          return StepStatus::Blocked;
        }
        ch->pop();
        ++resp_i_;
        return StepStatus::Progress;
      }
      ph_ = Ph::IterEnd;
      return StepStatus::Progress;
    }
    case Ph::IterEnd: {
      cur_.reads = sg_.stats.iter_vector_reads;
      cur_.writes = sg_.stats.iter_vector_writes;
      // Word traffic must account exactly for the vector accesses; a
      // mismatch means a module moved data outside its instruction.
      std::uint64_t words_r = 0, words_w = 0;
      for (auto& port : sg_.ports) {
        words_r += port.word_reads();
        words_w += port.word_writes();
      }
      const auto un = static_cast<std::uint64_t>(n_);
      if (words_r != cur_.reads * un || words_w != cur_.writes * un) {
        throw SolverError("memory word counters disagree with the issued "
                          "vector accesses");
      }
      report.counters.push_back(cur_);
      report.alpha_trace.push_back(scalars.alpha);
      report.beta_trace.push_back(reduced_tail_ ? 0.0 : scalars.beta);
      report.estimated_cycles += trip_cycle_estimate(scalars.rp, reduced_tail_);
      for (auto& f : vec_fsms_) {
        for (std::size_t s = 0; s < f.states.size(); ++s) f.advance();
      }
      for (auto& f : cmp_fsms_) {
        for (std::size_t s = 0; s < f.states.size(); ++s) f.advance();
      }
      if (stopping_) {
        report.converged = scalars.rr <= cfg_.tol;
        report.iterations = scalars.rp + 1;
        report.final_rr = scalars.rr;
        ph_ = Ph::Shutdown;
        return StepStatus::Progress;
      }
      ++scalars.rp;
      ph_ = Ph::IterStart;
      return StepStatus::Progress;
    }
    case Ph::Shutdown: {
      for (auto& [name, ch] : sg_.instr) ch->close();
      for (auto& f : vec_fsms_) {
        report.fsm_cycles["vc_" + std::string(vector_name(f.vector))] =
            f.completed_cycles;
      }
      for (auto& f : cmp_fsms_) {
        report.fsm_cycles[f.module] = f.completed_cycles;
      }
      return StepStatus::Done;
    }
  }
  return StepStatus::Blocked;
}

}  // namespace detail

SolveResult run_jpcg(const CsrMatrix& a, std::span<const double> b,
                     std::span<const double> x0, const SolverConfig& cfg) {
  cfg.check();
  if (static_cast<index_t>(b.size()) != a.n ||
      static_cast<index_t>(x0.size()) != a.n) {
    throw SolverError("run_jpcg: dimension mismatch");
  }
  // The Jacobi diagonal comes from the matrix at the scheme's precision, so
  // the matrix cast is the only deviation a mixed run introduces.
  CsrMatrix a_eff = a;
  a_eff.values = cast_matrix(a, cfg.scheme).values;
  JacobiPreconditioner precond = extract_jacobi(a_eff);

  ScheduledNonzeros sched =
      cfg.hardware_faithful
          ? schedule_nonzeros_tiled(a, cfg.n_channels, cfg.n_pes,
                                    cfg.dep_distance, kXWindowDepth,
                                    cfg.scheme)
          : schedule_nonzeros(a, cfg.n_channels, cfg.n_pes, cfg.dep_distance,
                              cfg.scheme);
  if (cfg.hardware_faithful) {
    HwLimitDiagnostics d = check_hw_limits(sched, a.n, true);
    if (!d.ok) {
      std::string msg = "hardware limits violated:";
      for (const auto& v : d.violations) msg += " " + v;
      throw SolverError(msg);
    }
  }

  auto sg = detail::build_solver_graph(cfg, a.n, sched);
  for (const auto& [name, depth] : cfg.fifo_depths) {
    if (sg->graph.find_channel(name) == nullptr) {
      throw SolverError("fifo depth override names no channel: " + name);
    }
  }
  sg->port("p").preload_read_side(x0);
  sg->port("r").preload_read_side(b);
  sg->port("x").preload_read_side(x0);
  sg->port("m").preload_read_side(precond.diag);

  std::uint64_t max_lane = 0;
  for (const auto& lane : sched.pe_entries) {
    max_lane = std::max(max_lane, static_cast<std::uint64_t>(lane.size()));
  }
  auto& ctrl = sg->graph.add_module<detail::ControllerModule>(*sg, cfg, a.n,
                                                              max_lane);
  if (cfg.record_transcripts) sg->graph.set_record_transcripts(true);

  RunOutcome out = run_dataflow(sg->graph, cfg.scheduler);
  if (out.kind == RunOutcome::Kind::Deadlock) {
    throw SolverError("dataflow deadlock: " + out.deadlock.to_string());
  }
  if (out.kind != RunOutcome::Kind::Completed) {
    throw SolverError("dataflow run did not complete");
  }

  SolveResult res;
  res.report = std::move(ctrl.report);
  auto x_words = sg->port("x").read_side_words();
  res.x.assign(x_words.begin(), x_words.begin() + a.n);
  auto r_words = sg->port("r").read_side_words();
  res.final_r.assign(r_words.begin(), r_words.begin() + a.n);

  res.report.padding_count = sched.padding_count;
  for (auto* vc : sg->vecctrls) {
    for (const auto& line : vc->issued_log()) {
      res.report.instruction_log.push_back(line);
    }
  }
  res.report.instruction_log_length = res.report.instruction_log.size();
  for (const auto& port : sg->ports) {
    if (port.is_double()) {
      res.report.parity_flips[port.vector()] = port.flip_count();
    }
  }
  res.report.writes_issued = sg->stats.writes_issued;
  res.report.write_responses = sg->stats.write_responses;
  if (cfg.record_transcripts) {
    res.report.transcript = sg->graph.dump_transcripts();
  }

  std::uint64_t max_reads = 0, max_writes = 0;
  for (const auto& c : res.report.counters) {
    if (c.rp >= 0) {
      max_reads = std::max(max_reads, c.reads);
      max_writes = std::max(max_writes, c.writes);
    }
  }
  res.report.reads_per_iteration = max_reads;
  res.report.writes_per_iteration = max_writes;
  return res;
}

std::vector<IssuedInstruction> issue_sequence(std::int64_t rp, index_t n,
                                              ScheduleMode mode,
                                              bool converged) {
  // Mirrors the controller's per-trip program, with the memory instruction
  // each vector-control instruction expands to appended right after it.
  std::vector<IssuedInstruction> out;
  auto vec = [&](const char* vc, bool rd, bool wr, unsigned q) {
    out.push_back({std::string("vc_") + vc, make_vctrl(rd, wr, 0, n, q)});
    out.push_back({"mem_" + std::string(vc), make_rdwr(rd, wr, 0, n)});
  };
  auto cmp = [&](const char* target, double alpha, unsigned q) {
    out.push_back({target, make_cmp(n, alpha, q)});
  };
  const bool init = rp < 0;
  const bool dec = mode == ScheduleMode::Decentralized;

  vec("p", 1, 0, 0);
  cmp("m1", 0.0, 0);
  vec("ap", 0, 1, dec ? (init ? 1u : 0u) : 0u);
  if (!init) {
    vec("p", 1, 0, 1);
    if (!dec) vec("ap", 1, 0, 1);
    cmp("m2", 0.0, 0);
  }
  if (dec) {
    vec("r", 1, 0, 0);
    vec("ap", 1, 0, 2);
    vec("m", 1, 0, 0);
    cmp("m4", 0.0, 0);
    cmp("m5", 0.0, 0);
    cmp("m6", 0.0, 0);
    cmp("m8", 0.0, 0);
    vec("ap", 1, 0, 2);
    if (!init) {
      vec("x", 1, 1, 0);
    }
    if (!converged) {
      vec("m", 1, 0, 0);
      vec("p", 1, 1, 2);
      vec("r", 1, 1, 1);
      cmp("m4", 0.0, 0);
      cmp("m5", 0.0, 1);
      cmp("m7", 0.0, init ? 1u : 0u);
      if (!init) cmp("m3", 0.0, 0);
    } else {
      vec("r", 1, 1, 2);
      cmp("m4", 0.0, 1);
      if (!init) {
        vec("p", 1, 0, 3);
        cmp("m3", 0.0, 1);
      }
    }
  } else {
    if (!init) {
      vec("x", 1, 1, 0);
      vec("p", 1, 0, 2);
      cmp("m3", 0.0, 0);
    }
    vec("r", 1, 1, 0);
    vec("ap", 1, 0, 2);
    cmp("m4", 0.0, 0);
    vec("r", 1, 0, 1);
    cmp("m8", 0.0, 0);
    if (!converged) {
      vec("m", 1, 0, 0);
      vec("r", 1, 0, 2);
      cmp("m5", 0.0, 0);
      vec("z", 0, 1, 0);
      vec("z", 1, 0, 1);
      vec("r", 1, 0, 3);
      cmp("m6", 0.0, 0);
      vec("z", 1, 0, 2);
      vec("p", 1, 1, 3);
      cmp("m7", 0.0, 0);
    }
  }
  return out;
}

}  // namespace jpcg
