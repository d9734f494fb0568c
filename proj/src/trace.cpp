#include "morpheus/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>

#include "morpheus/errors.hpp"
#include "text_util.hpp"

namespace morpheus {

namespace {

constexpr std::string_view kMagic = "#morpheus-trace v1";

struct OpInfo {
  Op op;
  std::string_view mnemonic;
  std::uint8_t min_operands;
  std::uint8_t max_operands;
};

constexpr std::array<OpInfo, 5> kOps{{
    {Op::Read, "R", 0, 0},
    {Op::Write, "W", 0, 1},
    {Op::AtomicAdd, "AADD", 1, 1},
    {Op::AtomicExch, "AEXCH", 1, 1},
    {Op::AtomicCAS, "ACAS", 2, 2},
}};

const OpInfo& info(Op op) { return kOps[static_cast<std::size_t>(op)]; }

// Returns an empty string when the request is fine.
std::string request_problem(const MemoryRequest& r) {
  if (r.size == 0 || r.size > kBlockBytes) return "size must be in [1, 128]";
  if (r.address % kBlockBytes + r.size > kBlockBytes) return "access crosses a 128 B block boundary";
  const auto& oi = info(r.op);
  if (r.operand_count < oi.min_operands || r.operand_count > oi.max_operands)
    return "wrong operand count for " + std::string(oi.mnemonic);
  if (is_atomic(r.op)) {
    if (r.size != 4 && r.size != 8) return "atomic size must be 4 or 8";
    if (r.address % r.size != 0) return "atomic address must be size-aligned";
  }
  return {};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

class AddressStream {
 public:
  AddressStream(const TraceSpec& spec, Rng& rng)
      : spec_(spec), rng_(rng), blocks_(spec.footprint_bytes / kBlockBytes) {
    switch (spec.kind) {
      case TraceKind::Zipfian: build_zipf(); break;
      case TraceKind::PointerChase: build_chase(); break;
      default: break;
    }
  }

  std::uint64_t next(std::uint64_t i) {
    switch (spec_.kind) {
      case TraceKind::Uniform: return rng_.below(blocks_) * kBlockBytes;
      case TraceKind::Zipfian: {
        double u = rng_.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        auto rank = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(
            it - cdf_.begin(), static_cast<std::ptrdiff_t>(blocks_ - 1)));
        return scramble(rank) * kBlockBytes;
      }
      case TraceKind::Strided: {
        std::uint64_t span = blocks_ * kBlockBytes;
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(i) * spec_.stride_bytes) % span);
      }
      case TraceKind::Streaming: return (i % blocks_) * kBlockBytes;
      case TraceKind::PointerChase: {
        std::uint64_t at = cursor_;
        cursor_ = chain_[cursor_];
        return at * kBlockBytes;
      }
    }
    return 0;
  }

 private:
  void build_zipf() {
    cdf_.resize(blocks_);
    double acc = 0.0;
    for (std::uint64_t r = 0; r < blocks_; ++r) {
      acc += std::pow(static_cast<double>(r + 1), -spec_.alpha);
      cdf_[r] = acc;
    }
    for (auto& c : cdf_) c /= acc;
    // Spread hot ranks over the footprint with an affine bijection.
    if (blocks_ > 1) {
      mult_ = splitmix64(spec_.seed) % blocks_ | 1;
      while (std::gcd(mult_, blocks_) != 1) mult_ = (mult_ + 2) % blocks_;
      offset_ = splitmix64(spec_.seed ^ 0x5bd1e995ull) % blocks_;
    }
  }

  std::uint64_t scramble(std::uint64_t rank) const {
    if (blocks_ <= 1) return 0;
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rank) * mult_ + offset_) % blocks_);
  }

  void build_chase() {
    // Sattolo's algorithm: a single cycle through every block.
    chain_.resize(blocks_);
    std::iota(chain_.begin(), chain_.end(), 0);
    for (std::uint64_t i = blocks_ - 1; i > 0; --i) {
      std::uint64_t j = rng_.below(i);
      std::swap(chain_[i], chain_[j]);
    }
  }

  const TraceSpec& spec_;
  Rng& rng_;
  std::uint64_t blocks_;
  std::vector<double> cdf_;
  std::uint64_t mult_ = 1;
  std::uint64_t offset_ = 0;
  std::vector<std::uint64_t> chain_;
  std::uint64_t cursor_ = 0;
};

}  // namespace

bool is_atomic(Op op) {
  return op == Op::AtomicAdd || op == Op::AtomicExch || op == Op::AtomicCAS;
}

std::string_view op_mnemonic(Op op) { return info(op).mnemonic; }

std::optional<Op> parse_op(std::string_view token) {
  for (const auto& oi : kOps)
    if (oi.mnemonic == token) return oi.op;
  return std::nullopt;
}

std::string_view trace_kind_name(TraceKind kind) {
  switch (kind) {
    case TraceKind::Uniform: return "uniform";
    case TraceKind::Zipfian: return "zipfian";
    case TraceKind::Strided: return "strided";
    case TraceKind::Streaming: return "streaming";
    case TraceKind::PointerChase: return "pointer_chase";
  }
  return "?";
}

std::optional<TraceKind> parse_trace_kind(std::string_view name) {
  for (auto k : {TraceKind::Uniform, TraceKind::Zipfian, TraceKind::Strided, TraceKind::Streaming,
                 TraceKind::PointerChase})
    if (trace_kind_name(k) == name) return k;
  return std::nullopt;
}

void validate_request(const MemoryRequest& r) {
  auto problem = request_problem(r);
  if (!problem.empty()) throw TraceError("request " + std::to_string(r.id) + ": " + problem);
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::uint64_t next_id = 0;
  std::uint64_t last_cycle = 0;

  while (std::getline(in, line)) {
    ++line_no;
    auto view = text::trim(line);
    if (view.empty()) continue;
    if (!have_header) {
      if (view != kMagic) throw HeaderMissing();
      have_header = true;
      continue;
    }
    if (view.front() == '#') {
      auto toks = text::split_ws(view);
      if (toks.size() == 2 && (toks[0] == "#instructions" || toks[0] == "#sms")) {
        auto v = text::parse_u64(toks[1]);
        if (!v) throw MalformedLine(line_no, line, "bad header value");
        if (toks[0] == "#instructions") {
          if (*v == 0) throw MalformedLine(line_no, line, "instruction count must be positive");
          trace.meta.total_instructions = *v;
        } else {
          trace.meta.origin_sm_count = static_cast<std::uint32_t>(*v);
        }
      }
      continue;
    }
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = text::trim(view.substr(0, hash));
    auto toks = text::split_ws(view);
    if (toks.size() < 4) throw MalformedLine(line_no, line, "expected <cycle> <sm> <op> <address>");

    MemoryRequest r;
    auto cycle = text::parse_u64(toks[0]);
    auto sm = text::parse_u64(toks[1]);
    auto op = parse_op(toks[2]);
    auto addr = text::parse_hex(toks[3]);
    if (!cycle) throw MalformedLine(line_no, line, "bad cycle");
    if (!sm || *sm > UINT32_MAX) throw MalformedLine(line_no, line, "bad SM index");
    if (!op) throw MalformedLine(line_no, line, "unknown op");
    if (!addr) throw MalformedLine(line_no, line, "bad hex address");
    r.issue_cycle = *cycle;
    r.origin_sm = static_cast<std::uint32_t>(*sm);
    r.op = *op;
    r.address = *addr;

    const auto& oi = info(r.op);
    std::vector<std::uint64_t> rest;
    for (std::size_t i = 4; i < toks.size(); ++i) {
      auto v = text::parse_u64(toks[i]);
      if (!v) throw MalformedLine(line_no, line, "bad numeric field");
      rest.push_back(*v);
    }
    // A leading extra field beyond the operand count is the size.
    std::size_t n = rest.size();
    std::size_t operands = 0;
    bool has_size = false;
    if (r.op == Op::Read) {
      if (n > 1) throw MalformedLine(line_no, line, "too many fields for R");
      has_size = n == 1;
    } else if (r.op == Op::Write) {
      if (n > 2) throw MalformedLine(line_no, line, "too many fields for W");
      has_size = n >= 1;
      operands = n == 2 ? 1 : 0;
    } else {
      if (n == oi.min_operands) {
        operands = n;
      } else if (n == oi.min_operands + 1u) {
        has_size = true;
        operands = oi.min_operands;
      } else {
        throw MalformedLine(line_no, line, "wrong operand count");
      }
    }
    std::size_t k = 0;
    if (has_size) {
      if (rest[0] > kBlockBytes) throw MalformedLine(line_no, line, "size must be in [1, 128]");
      r.size = static_cast<std::uint32_t>(rest[k++]);
    }
    r.operand_count = static_cast<std::uint8_t>(operands);
    for (std::size_t i = 0; i < operands; ++i) r.operands[i] = rest[k++];

    if (auto problem = request_problem(r); !problem.empty()) throw MalformedLine(line_no, line, problem);
    if (r.issue_cycle < last_cycle) throw MalformedLine(line_no, line, "issue cycle decreases");
    if (trace.meta.origin_sm_count > 0 && r.origin_sm >= trace.meta.origin_sm_count)
      throw MalformedLine(line_no, line, "SM index exceeds #sms");
    last_cycle = r.issue_cycle;
    r.id = next_id++;
    trace.requests.push_back(r);
  }
  if (!have_header) throw HeaderMissing();
  return trace;
}

Trace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

void serialize_trace(const Trace& trace, std::ostream& out) {
  out << kMagic << '\n';
  if (trace.meta.total_instructions) out << "#instructions " << *trace.meta.total_instructions << '\n';
  if (trace.meta.origin_sm_count > 0) out << "#sms " << trace.meta.origin_sm_count << '\n';
  char addr[32];
  for (const auto& r : trace.requests) {
    std::snprintf(addr, sizeof addr, "0x%llx", static_cast<unsigned long long>(r.address));
    out << r.issue_cycle << ' ' << r.origin_sm << ' ' << op_mnemonic(r.op) << ' ' << addr << ' ' << r.size;
    for (std::size_t i = 0; i < r.operand_count; ++i) out << ' ' << r.operands[i];
    out << '\n';
  }
}

std::string serialize_trace(const Trace& trace) {
  std::ostringstream out;
  serialize_trace(trace, out);
  return out.str();
}

void validate_spec(const TraceSpec& s) {
  auto bad = [](const std::string& why) { throw InvalidSpec("invalid trace spec: " + why); };
  if (s.footprint_bytes < kBlockBytes) bad("footprint_bytes must be >= 128");
  if (!(s.write_fraction >= 0.0 && s.write_fraction <= 1.0)) bad("write_fraction must be in [0,1]");
  if (!(s.atomic_fraction >= 0.0 && s.atomic_fraction <= 1.0)) bad("atomic_fraction must be in [0,1]");
  if (s.write_fraction + s.atomic_fraction > 1.0 + 1e-12) bad("write_fraction + atomic_fraction exceeds 1");
  if (s.kind == TraceKind::Zipfian && !(s.alpha > 0.0)) bad("alpha must be > 0");
  if (s.kind == TraceKind::Strided && (s.stride_bytes == 0 || s.stride_bytes % 4 != 0))
    bad("stride_bytes must be a positive multiple of 4");
  if (!(s.inter_arrival_cycles >= 0.0)) bad("inter_arrival_cycles must be >= 0");
  if (s.origin_sms == 0) bad("origin_sms must be >= 1");
  if (!(s.instructions_per_request >= 0.0)) bad("instructions_per_request must be >= 0");
}

Trace generate(const TraceSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  AddressStream addresses(spec, rng);

  Trace trace;
  trace.meta.origin_sm_count = spec.origin_sms;
  if (spec.instructions_per_request > 0.0 && spec.request_count > 0)
    trace.meta.total_instructions = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(spec.instructions_per_request * spec.request_count)));
  trace.requests.reserve(spec.request_count);

  double clock = 0.0;
  for (std::uint64_t i = 0; i < spec.request_count; ++i) {
    MemoryRequest r;
    r.id = i;
    if (i > 0 && spec.inter_arrival_cycles > 0.0) clock += -std::log1p(-rng.uniform()) * spec.inter_arrival_cycles;
    r.issue_cycle = static_cast<std::uint64_t>(clock);
    r.origin_sm = static_cast<std::uint32_t>(rng.below(spec.origin_sms));
    r.address = addresses.next(i);
    r.size = 4;

    double u = rng.uniform();
    if (u < spec.atomic_fraction) {
      switch (rng.below(3)) {
        case 0:
          r.op = Op::AtomicAdd;
          r.operand_count = 1;
          r.operands[0] = 1;
          break;
        case 1:
          r.op = Op::AtomicExch;
          r.operand_count = 1;
          r.operands[0] = rng.next() & 0xffffffffu;
          break;
        default:
          r.op = Op::AtomicCAS;
          r.operand_count = 2;
          r.operands[0] = 0;
          r.operands[1] = rng.next() & 0xffffffffu;
          break;
      }
    } else if (u < spec.atomic_fraction + spec.write_fraction) {
      r.op = Op::Write;
    } else {
      r.op = Op::Read;
    }
    trace.requests.push_back(r);
  }
  return trace;
}

TraceSpec parse_trace_spec(std::string_view text) {
  TraceSpec spec;
  std::size_t line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = text::trim(line.substr(0, hash));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidSpec("trace spec line " + std::to_string(line_no) + ": expected key = value");
    auto key = text::trim(line.substr(0, eq));
    auto val = text::trim(line.substr(eq + 1));
    auto fail = [&] {
      throw InvalidSpec("trace spec line " + std::to_string(line_no) + ": bad value for '" + std::string(key) + "'");
    };
    auto num = [&] {
      auto v = text::parse_double(val);
      if (!v) fail();
      return *v;
    };
    auto size = [&] {
      auto v = text::parse_size(val);
      if (!v) fail();
      return *v;
    };
    if (key == "kind") {
      auto k = parse_trace_kind(val);
      if (!k) fail();
      spec.kind = *k;
    } else if (key == "alpha") {
      spec.alpha = num();
    } else if (key == "stride_bytes") {
      spec.stride_bytes = size();
    } else if (key == "footprint_bytes") {
      spec.footprint_bytes = size();
    } else if (key == "request_count") {
      spec.request_count = size();
    } else if (key == "write_fraction") {
      spec.write_fraction = num();
    } else if (key == "atomic_fraction") {
      spec.atomic_fraction = num();
    } else if (key == "seed") {
      auto v = text::parse_u64(val);
      if (!v) fail();
      spec.seed = *v;
    } else if (key == "inter_arrival_cycles") {
      spec.inter_arrival_cycles = num();
    } else if (key == "origin_sms") {
      spec.origin_sms = static_cast<std::uint32_t>(size());
    } else if (key == "instructions_per_request") {
      spec.instructions_per_request = num();
    } else {
      throw InvalidSpec("trace spec line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  validate_spec(spec);
  return spec;
}

std::uint64_t trace_hash(const Trace& trace) { return text::fnv1a(serialize_trace(trace)); }

}  // namespace morpheus
