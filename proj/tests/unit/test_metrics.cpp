#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "morpheus/errors.hpp"
#include "morpheus/metrics.hpp"

using namespace morpheus;

namespace {

ReportContext context(std::optional<std::uint64_t> instructions = std::nullopt) {
  ReportContext ctx;
  ctx.trace = TraceInfo{"0x00000000000000aa", 0, instructions};
  ctx.config = {{"gpu.sms", "68"}, {"morpheus.cache_mode_sms", "34"}};
  ctx.model_notes = {{"note", "fixed"}};
  ctx.predictor_mode = "bloom";
  ctx.capacity.cache_mode_sms = 34;
  return ctx;
}

// 1000 conventional requests: 600 hits at 160 ns and 400 misses at 608 ns.
RawCounters conventional_only() {
  RawCounters r;
  r.requests = r.responses = r.routed_conventional = 1000;
  r.conv_hits = 600;
  r.conv_misses = 400;
  r.conv_bytes = 1000 * 128;
  r.dram_bytes = 400 * 128;
  r.latency_ps[0].assign(600, 160'000);
  r.latency_ps[1].assign(400, 608'000);
  r.first_issue_ps = 0;
  r.last_completion_ps = 1'000'000;
  return r;
}

// A small run touching every route.
RawCounters mixed() {
  RawCounters r;
  r.requests = r.responses = 10;
  r.routed_conventional = 4;
  r.conv_hits = 3;
  r.conv_misses = 1;
  r.conv_writebacks = 1;
  r.routed_extended = 4;
  r.ext_services = 4;
  r.ext_hits = 3;
  r.ext_misses = 1;
  r.true_hit = 3;
  r.false_positive = 1;
  r.routed_predicted_miss = 2;
  r.true_miss = 2;
  r.ext_fills = 2;
  r.ext_fill_inserts = 2;
  r.ext_evictions = 1;
  r.bf_swaps = 1;
  r.conv_bytes = 4 * 128;
  r.ext_bytes = 6 * 128;
  r.dram_bytes = 5 * 128;
  r.latency_ps[0] = {160'000, 161'000, 162'500};
  r.latency_ps[1] = {608'000};
  r.latency_ps[2] = {185'000, 185'000, 366'000};
  r.latency_ps[3] = {773'000};
  r.latency_ps[4] = {608'000, 700'000};
  r.first_issue_ps = 1000;
  r.last_completion_ps = 2'001'000;
  return r;
}

SimReport with_mpki(double mpki, const std::string& hash = "0x1") {
  SimReport r;
  r.trace.hash = hash;
  r.mpki.value = mpki;
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("zero requests give an all-zero report") {
  auto r = finalize(RawCounters{}, context());
  CHECK(r.routes.total == 0);
  CHECK(r.mpki.value == 0);
  CHECK(r.mpki.label == "misses_per_kilo_request");
  CHECK(r.latency_ns.overall.count == 0);
  CHECK(r.latency_ns.overall.mean == 0);
  CHECK(r.energy.total_j == 0);
  CHECK(r.throughput.makespan_ns == 0);
  CHECK(r.predictor.false_positive_rate == 0);
}

TEST_CASE("MPKI uses declared instructions when present") {
  auto r = finalize(conventional_only(), context(1'000'000));
  CHECK(r.mpki.label == "misses_per_kilo_instruction");
  CHECK(r.mpki.llc_misses == 400);
  CHECK(r.mpki.value == doctest::Approx(0.4));
  auto per_request = finalize(conventional_only(), context());
  CHECK(per_request.mpki.value == doctest::Approx(400.0));
}

TEST_CASE("derived statistics") {
  auto r = finalize(mixed(), context());
  CHECK(r.conventional_llc.hit_rate == doctest::Approx(0.75));
  CHECK(r.extended_llc.hit_rate == doctest::Approx(0.75));
  CHECK(r.predictor.false_positive_rate == doctest::Approx(1.0 / 3.0));
  CHECK(r.predictor.accuracy == doctest::Approx(5.0 / 6.0));
  // Conventional misses, extended misses and predicted misses all reach DRAM.
  CHECK(r.mpki.llc_misses == 4);
  CHECK(r.latency_ns.conv_hit.max == doctest::Approx(162.5));
  CHECK(r.latency_ns.overall.count == 10);
  CHECK(r.throughput.makespan_ns == doctest::Approx(2000));
  CHECK(r.throughput.ext_bytes_per_s == doctest::Approx(768 / 2e-6));
  CHECK(r.throughput.ext_bytes_per_s_per_cache_sm == doctest::Approx(768 / 2e-6 / 34));
  CHECK(r.energy.ext_j == doctest::Approx(768 * 61e-12));
}

TEST_CASE("nearest-rank percentiles") {
  std::vector<std::int64_t> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i * 1000);
  auto s = summarize_latencies(v);
  CHECK(s.p50 == 50);
  CHECK(s.p90 == 90);
  CHECK(s.p99 == 99);
  CHECK(s.max == 100);
  CHECK(s.mean == doctest::Approx(50.5));
  auto one = summarize_latencies({7000});
  CHECK(one.p50 == 7);
  CHECK(one.p99 == 7);
  auto odd = summarize_latencies({3000, 1000, 2000});
  CHECK(odd.p50 == 2);
  CHECK(odd.p90 == 3);
}

TEST_CASE("inconsistent counters are rejected") {
  auto fn = mixed();
  fn.false_negative = 1;
  fn.true_miss = 1;
  CHECK_THROWS_AS(finalize(fn, context()), InconsistentCounters);
  auto lost = mixed();
  lost.responses = 9;
  CHECK_THROWS_AS(finalize(lost, context()), InconsistentCounters);
  auto samples = mixed();
  samples.latency_ps[2].pop_back();
  CHECK_THROWS_AS(finalize(samples, context()), InconsistentCounters);
}

TEST_CASE("compare") {
  SUBCASE("identical reports give zero deltas") {
    auto r = finalize(mixed(), context());
    auto c = compare(r, r);
    CHECK(c.deltas.mpki_reduction_pct == 0.0);
    CHECK(c.deltas.mean_latency_delta_pct == 0.0);
    CHECK(c.deltas.energy_delta_pct == 0.0);
  }
  SUBCASE("MPKI 10 to 5.3 is a 47% reduction") {
    auto c = compare(with_mpki(10), with_mpki(5.3));
    REQUIRE(c.deltas.mpki_reduction_pct);
    CHECK(*c.deltas.mpki_reduction_pct == doctest::Approx(47));
    CHECK(*c.deltas.mpki_delta_pct == doctest::Approx(-47));
  }
  SUBCASE("energy 2 J to 1 J is -50%") {
    auto a = with_mpki(1), b = with_mpki(1);
    a.energy.total_j = 2;
    b.energy.total_j = 1;
    CHECK(*compare(a, b).deltas.energy_delta_pct == doctest::Approx(-50));
  }
  SUBCASE("zero baseline gives null unless the variant is zero too") {
    auto c = compare(with_mpki(0), with_mpki(3));
    CHECK_FALSE(c.deltas.mpki_delta_pct);
    CHECK_FALSE(c.deltas.mpki_reduction_pct);
  }
  SUBCASE("different traces") {
    CHECK_THROWS_AS(compare(with_mpki(1, "0x1"), with_mpki(1, "0x2")), TraceMismatch);
  }
}

TEST_CASE("JSON round trips") {
  auto r = finalize(mixed(), context(12345));
  CHECK(parse_report(to_json(r)) == r);
  auto c = compare(r, finalize(conventional_only(), context(12345)));
  CHECK(parse_comparison(to_json(c)) == c);
  auto z = compare(with_mpki(0), with_mpki(3));
  CHECK(parse_comparison(to_json(z)) == z);
}

TEST_CASE("malformed reports are rejected") {
  CHECK_THROWS_AS(parse_report("{"), Error);
  CHECK_THROWS_AS(parse_report("{}"), Error);
  auto text = to_json(finalize(mixed(), context()));
  auto bumped = text;
  bumped.replace(bumped.find("\"schema_version\": 1"), 19, "\"schema_version\": 9");
  CHECK_THROWS_AS(parse_report(bumped), Error);
  auto wrong = text;
  wrong.replace(wrong.find("\"total\": 10"), 11, "\"total\": \"x\"");
  CHECK_THROWS_AS(parse_report(wrong), Error);
}

TEST_CASE("report JSON matches the checked-in golden file") {
  const char* dir = std::getenv("MORPHEUS_TEST_DATA");
  REQUIRE(dir);
  const std::string path = std::string(dir) + "/golden_report.json";
  const auto got = to_json(finalize(mixed(), context(1'000'000)));
  if (std::getenv("MORPHEUS_UPDATE_GOLDEN")) std::ofstream(path, std::ios::binary) << got;
  CHECK(got == read_file(path));
}
