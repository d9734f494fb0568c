#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_map>

#include "morpheus/errors.hpp"
#include "morpheus/trace.hpp"

using namespace morpheus;

TEST_CASE("parse: single read with instruction header") {
  auto t = parse_trace("#morpheus-trace v1\n#instructions 1000\n0 0 R 0x1000 4\n");
  REQUIRE(t.requests.size() == 1);
  const auto& r = t.requests[0];
  CHECK(r.op == Op::Read);
  CHECK(r.issue_cycle == 0);
  CHECK(r.origin_sm == 0);
  CHECK(r.address == 0x1000);
  CHECK(r.size == 4);
  CHECK(t.meta.total_instructions == 1000u);
}

TEST_CASE("parse: header only gives an empty trace") {
  auto t = parse_trace("#morpheus-trace v1\n#instructions 1000\n");
  CHECK(t.requests.empty());
  CHECK(t.meta.total_instructions == 1000u);
}

TEST_CASE("parse: access crossing a block boundary is rejected") {
  try {
    parse_trace("#morpheus-trace v1\n0 0 R 0x107E 8\n");
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no() == 2);
    CHECK(e.text() == "0 0 R 0x107E 8");
  }
}

TEST_CASE("parse: missing header") {
  CHECK_THROWS_AS(parse_trace("0 0 R 0x0\n"), HeaderMissing);
  CHECK_THROWS_AS(parse_trace(""), HeaderMissing);
}

TEST_CASE("parse: malformed lines") {
  const char* bad[] = {
      "0 0 R",               // too few fields
      "0 0 LOAD 0x0",        // unknown op
      "0 0 R zz",            // bad address
      "0 0 AADD 0x0",        // missing operand
      "0 0 ACAS 0x0 1",      // CAS needs two operands
      "0 0 AADD 0x2 4 1",    // misaligned atomic
      "0 0 R 0x0 0",         // zero size
      "0 0 R 0x0 129",       // oversized
      "5 0 R 0x0\n4 0 R 0x0" // cycle goes backwards
  };
  for (auto* body : bad) {
    CAPTURE(body);
    CHECK_THROWS_AS(parse_trace(std::string("#morpheus-trace v1\n") + body + "\n"), MalformedLine);
  }
}

TEST_CASE("parse: operands, comments and ids") {
  auto t = parse_trace(
      "#morpheus-trace v1\n"
      "# a comment\n"
      "#sms 4\n"
      "1 3 W 0x80 8 42   # trailing comment\n"
      "2 1 AADD 0x100 5\n"
      "2 1 ACAS 0x104 4 7 9\n");
  REQUIRE(t.requests.size() == 3);
  CHECK(t.meta.origin_sm_count == 4);
  CHECK(t.requests[0].op == Op::Write);
  CHECK(t.requests[0].size == 8);
  CHECK(t.requests[0].operand_count == 1);
  CHECK(t.requests[0].operands[0] == 42);
  CHECK(t.requests[1].operands[0] == 5);
  CHECK(t.requests[2].operands == std::array<std::uint64_t, 2>{7, 9});
  for (std::size_t i = 0; i < t.requests.size(); ++i) CHECK(t.requests[i].id == i);
  CHECK_THROWS_AS(parse_trace("#morpheus-trace v1\n#sms 2\n0 2 R 0x0\n"), MalformedLine);
}

TEST_CASE("serialize/parse round trip on random valid requests") {
  std::mt19937_64 rng(11);
  Trace t;
  t.meta.total_instructions = 12345;
  t.meta.origin_sm_count = 68;
  std::uint64_t cycle = 0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    MemoryRequest r;
    r.id = i;
    cycle += rng() % 3;
    r.issue_cycle = cycle;
    r.origin_sm = static_cast<std::uint32_t>(rng() % 68);
    r.op = static_cast<Op>(rng() % 5);
    if (is_atomic(r.op)) {
      r.size = rng() % 2 ? 4 : 8;
      r.address = (rng() >> 20) / r.size * r.size;
      r.operand_count = r.op == Op::AtomicCAS ? 2 : 1;
      r.operands = {rng() >> 32, rng() >> 32};
      if (r.operand_count == 1) r.operands[1] = 0;
    } else {
      r.size = 1 + static_cast<std::uint32_t>(rng() % 128);
      std::uint64_t base = (rng() >> 24) / kBlockBytes * kBlockBytes;
      r.address = base + rng() % (kBlockBytes - r.size + 1);
      if (r.op == Op::Write && rng() % 2) {
        r.operand_count = 1;
        r.operands[0] = rng() >> 16;
      }
    }
    t.requests.push_back(r);
  }
  CHECK(parse_trace(serialize_trace(t)) == t);
}

TEST_CASE("generate: strided example") {
  TraceSpec s;
  s.kind = TraceKind::Strided;
  s.stride_bytes = 128;
  s.footprint_bytes = 1024;
  s.request_count = 16;
  auto t = generate(s);
  REQUIRE(t.requests.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) CHECK(t.requests[i].address == (i % 8) * 128);
}

TEST_CASE("generate: determinism and seed sensitivity") {
  TraceSpec s;
  s.kind = TraceKind::Zipfian;
  s.footprint_bytes = 1 << 20;
  s.request_count = 5000;
  s.write_fraction = 0.3;
  s.atomic_fraction = 0.1;
  s.seed = 99;
  CHECK(serialize_trace(generate(s)) == serialize_trace(generate(s)));
  auto other = s;
  other.seed = 100;
  CHECK(serialize_trace(generate(s)) != serialize_trace(generate(other)));
}

TEST_CASE("generate: addresses in range and aligned for every kind") {
  for (auto kind : {TraceKind::Uniform, TraceKind::Zipfian, TraceKind::Strided, TraceKind::Streaming,
                    TraceKind::PointerChase}) {
    TraceSpec s;
    s.kind = kind;
    s.footprint_bytes = 64 * 1024;
    s.stride_bytes = 384;
    s.request_count = 4000;
    s.atomic_fraction = 0.2;
    auto t = generate(s);
    CAPTURE(trace_kind_name(kind));
    for (const auto& r : t.requests) {
      CHECK(r.address < s.footprint_bytes);
      CHECK(r.address % r.size == 0);
      validate_request(r);
    }
  }
}

TEST_CASE("generate: pointer chase visits every block once per lap") {
  TraceSpec s;
  s.kind = TraceKind::PointerChase;
  s.footprint_bytes = 128 * 97;
  s.request_count = 97;
  auto t = generate(s);
  std::map<std::uint64_t, int> seen;
  for (const auto& r : t.requests) ++seen[r.address];
  CHECK(seen.size() == 97);
}

TEST_CASE("generate: write and atomic fractions within 1%") {
  TraceSpec s;
  s.kind = TraceKind::Uniform;
  s.request_count = 100000;
  s.write_fraction = 0.25;
  s.atomic_fraction = 0.05;
  auto t = generate(s);
  double w = 0, a = 0;
  for (const auto& r : t.requests) {
    if (r.op == Op::Write) ++w;
    if (is_atomic(r.op)) ++a;
  }
  CHECK(std::abs(w / s.request_count - 0.25) < 0.01);
  CHECK(std::abs(a / s.request_count - 0.05) < 0.01);
}

TEST_CASE("generate: zipf rank-frequency slope near -alpha") {
  TraceSpec s;
  s.kind = TraceKind::Zipfian;
  s.alpha = 1.0;
  s.footprint_bytes = 1 << 20;
  s.request_count = 1000000;
  s.inter_arrival_cycles = 0;
  auto t = generate(s);
  std::unordered_map<std::uint64_t, double> freq;
  for (const auto& r : t.requests) ++freq[r.address];
  std::vector<double> f;
  for (auto& [a, c] : freq) f.push_back(c);
  std::sort(f.rbegin(), f.rend());
  // Least-squares slope of log(freq) against log(rank) over the well-sampled head.
  const std::size_t n = std::min<std::size_t>(1000, f.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::log(static_cast<double>(i + 1)), y = std::log(f[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("generate: instruction count header") {
  TraceSpec s;
  s.request_count = 100;
  s.instructions_per_request = 2.5;
  auto t = generate(s);
  CHECK(t.meta.total_instructions == 250u);
  s.instructions_per_request = 0;
  CHECK_FALSE(generate(s).meta.total_instructions.has_value());
}

TEST_CASE("spec validation") {
  TraceSpec s;
  s.footprint_bytes = 64;
  CHECK_THROWS_AS(generate(s), InvalidSpec);
  s = {};
  s.write_fraction = 1.5;
  CHECK_THROWS_AS(generate(s), InvalidSpec);
  s = {};
  s.kind = TraceKind::Zipfian;
  s.alpha = 0;
  CHECK_THROWS_AS(generate(s), InvalidSpec);
  s = {};
  s.write_fraction = 0.7;
  s.atomic_fraction = 0.7;
  CHECK_THROWS_AS(generate(s), InvalidSpec);
}

TEST_CASE("spec text parsing") {
  auto s = parse_trace_spec(
      "kind = zipfian  # hot set\nalpha = 0.9\nfootprint_bytes = 4MiB\nrequest_count = 1000\nseed = 5\n");
  CHECK(s.kind == TraceKind::Zipfian);
  CHECK(s.alpha == 0.9);
  CHECK(s.footprint_bytes == 4u << 20);
  CHECK(s.request_count == 1000);
  CHECK(s.seed == 5);
  CHECK_THROWS_AS(parse_trace_spec("colour = red\n"), InvalidSpec);
  CHECK_THROWS_AS(parse_trace_spec("kind = spiral\n"), InvalidSpec);
  CHECK_THROWS_AS(parse_trace_spec("just words\n"), InvalidSpec);
}

TEST_CASE("trace hash tracks content") {
  TraceSpec s;
  s.request_count = 50;
  auto a = generate(s);
  auto b = a;
  CHECK(trace_hash(a) == trace_hash(b));
  b.requests[3].address += 128;
  CHECK(trace_hash(a) != trace_hash(b));
}
