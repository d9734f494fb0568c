#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace morpheus {

inline constexpr std::uint32_t kBlockBytes = 128;

inline constexpr std::uint64_t block_number(std::uint64_t address) { return address / kBlockBytes; }
inline constexpr std::uint64_t block_base(std::uint64_t address) {
  return address - address % kBlockBytes;
}

enum class Op : std::uint8_t { Read, Write, AtomicAdd, AtomicExch, AtomicCAS };

bool is_atomic(Op op);
std::string_view op_mnemonic(Op op);  // R, W, AADD, AEXCH, ACAS
std::optional<Op> parse_op(std::string_view token);

// One LLC-level access.
struct MemoryRequest {
  std::uint64_t id = 0;
  std::uint64_t issue_cycle = 0;
  std::uint32_t origin_sm = 0;
  Op op = Op::Read;
  std::uint64_t address = 0;
  std::uint32_t size = 4;
  // Writes may carry the stored value; AADD/AEXCH carry one operand and ACAS
  // carries (compare, swap).
  std::uint8_t operand_count = 0;
  std::array<std::uint64_t, 2> operands{};

  bool operator==(const MemoryRequest&) const = default;
};

struct TraceMeta {
  std::optional<std::uint64_t> total_instructions;
  std::uint32_t origin_sm_count = 0;

  bool operator==(const TraceMeta&) const = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<MemoryRequest> requests;

  bool operator==(const Trace&) const = default;
};

enum class TraceKind { Uniform, Zipfian, Strided, Streaming, PointerChase };

std::string_view trace_kind_name(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view name);

struct TraceSpec {
  TraceKind kind = TraceKind::Uniform;
  double alpha = 1.0;               // Zipfian only
  std::uint64_t stride_bytes = 128;  // Strided only
  std::uint64_t footprint_bytes = 1 << 20;
  std::uint64_t request_count = 1000;
  double write_fraction = 0.0;
  double atomic_fraction = 0.0;
  std::uint64_t seed = 1;
  double inter_arrival_cycles = 1.0;
  std::uint32_t origin_sms = 17;
  // Declared instruction count per request; 0 leaves the header without
  // `#instructions` so MPKI falls back to misses per kilo-request.
  double instructions_per_request = 0.0;
};

// Throws MalformedLine / HeaderMissing.
Trace parse_trace(std::istream& in);
Trace parse_trace(std::string_view text);
void serialize_trace(const Trace& trace, std::ostream& out);
std::string serialize_trace(const Trace& trace);

// Checks per-request invariants; throws TraceError with the offending id.
void validate_request(const MemoryRequest& r);

// Deterministic synthetic workload. Throws InvalidSpec.
Trace generate(const TraceSpec& spec);
void validate_spec(const TraceSpec& spec);

// `key = value` text form used by `gen-trace --spec`.
TraceSpec parse_trace_spec(std::string_view text);

// FNV-1a over the canonical serialization; identifies a trace in reports.
std::uint64_t trace_hash(const Trace& trace);

}  // namespace morpheus
