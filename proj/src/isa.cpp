#include "jpcg/isa.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>

namespace jpcg {

namespace {

void check_len(std::int64_t len) {
  if (len <= 0) throw IsaError("len must be > 0, got " + std::to_string(len));
}

void check_q(unsigned q_id) {
  if (q_id >= kQueueIdLimit) {
    throw IsaError("q_id out of range: " + std::to_string(q_id));
  }
}

std::string fp_to_string(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const char* rw_token(bool rd, bool wr) {
  if (rd && wr) return "rdwr";
  if (rd) return "rd";
  return "wr";
}

struct FieldParser {
  std::string_view rest;

  std::string_view next_token() {
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    std::size_t end = rest.find(' ');
    std::string_view tok = rest.substr(0, end);
    rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
    return tok;
  }

  std::int64_t field_i64(std::string_view key) {
    std::string_view tok = next_token();
    if (!tok.starts_with(key) || tok.size() <= key.size() ||
        tok[key.size()] != '=') {
      throw IsaError("trace parse: expected '" + std::string(key) + "='");
    }
    tok.remove_prefix(key.size() + 1);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(tok.begin(), tok.end(), v);
    if (ec != std::errc{} || p != tok.end()) {
      throw IsaError("trace parse: bad integer in '" + std::string(tok) + "'");
    }
    return v;
  }

  double field_f64(std::string_view key) {
    std::string_view tok = next_token();
    if (!tok.starts_with(key) || tok.size() <= key.size() ||
        tok[key.size()] != '=') {
      throw IsaError("trace parse: expected '" + std::string(key) + "='");
    }
    tok.remove_prefix(key.size() + 1);
    double v = 0;
    auto [p, ec] = std::from_chars(tok.begin(), tok.end(), v);
    if (ec != std::errc{} || p != tok.end()) {
      throw IsaError("trace parse: bad number in '" + std::string(tok) + "'");
    }
    return v;
  }

  std::pair<bool, bool> field_rw() {
    std::string_view tok = next_token();
    if (tok == "rd") return {true, false};
    if (tok == "wr") return {false, true};
    if (tok == "rdwr") return {true, true};
    throw IsaError("trace parse: bad rd/wr token '" + std::string(tok) + "'");
  }
};

}  // namespace

InstVCtrl make_vctrl(bool rd, bool wr, std::int64_t base_addr,
                     std::int64_t len, unsigned q_id) {
  if (!rd && !wr) throw IsaError("neither read nor write");
  if (base_addr < 0) throw IsaError("negative base_addr");
  check_len(len);
  check_q(q_id);
  return InstVCtrl{rd, wr, base_addr, len, static_cast<std::uint8_t>(q_id)};
}

InstCmp make_cmp(std::int64_t len, double alpha, unsigned q_id) {
  check_len(len);
  check_q(q_id);
  return InstCmp{len, alpha, static_cast<std::uint8_t>(q_id)};
}

InstRdWr make_rdwr(bool rd, bool wr, std::int64_t base_addr,
                   std::int64_t len) {
  if (!rd && !wr) throw IsaError("neither read nor write");
  if (base_addr < 0) throw IsaError("negative base_addr");
  check_len(len);
  return InstRdWr{rd, wr, base_addr, len};
}

std::string render_trace(const Instruction& inst) {
  if (const auto* v = std::get_if<InstVCtrl>(&inst)) {
    return std::string("VEC ") + rw_token(v->rd, v->wr) +
           " base=" + std::to_string(v->base_addr) +
           " len=" + std::to_string(v->len) + " q=" + std::to_string(v->q_id);
  }
  if (const auto* c = std::get_if<InstCmp>(&inst)) {
    return "CMP len=" + std::to_string(c->len) +
           " alpha=" + fp_to_string(c->alpha) + " q=" + std::to_string(c->q_id);
  }
  const auto& m = std::get<InstRdWr>(inst);
  return std::string("MEM ") + rw_token(m.rd, m.wr) +
         " base=" + std::to_string(m.base_addr) +
         " len=" + std::to_string(m.len);
}

Instruction parse_trace(std::string_view line) {
  FieldParser p{line};
  std::string_view kind = p.next_token();
  if (kind == "VEC") {
    auto [rd, wr] = p.field_rw();
    std::int64_t base = p.field_i64("base");
    std::int64_t len = p.field_i64("len");
    std::int64_t q = p.field_i64("q");
    return make_vctrl(rd, wr, base, len, static_cast<unsigned>(q));
  }
  if (kind == "CMP") {
    std::int64_t len = p.field_i64("len");
    double alpha = p.field_f64("alpha");
    std::int64_t q = p.field_i64("q");
    return make_cmp(len, alpha, static_cast<unsigned>(q));
  }
  if (kind == "MEM") {
    auto [rd, wr] = p.field_rw();
    std::int64_t base = p.field_i64("base");
    std::int64_t len = p.field_i64("len");
    return make_rdwr(rd, wr, base, len);
  }
  throw IsaError("trace parse: unknown instruction kind '" +
                 std::string(kind) + "'");
}

}  // namespace jpcg
