#include "morpheus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <type_traits>

#include <json.hpp>

#include "morpheus/errors.hpp"

namespace morpheus {

namespace {

using Json = nlohmann::ordered_json;

#define MORPHEUS_FIELDS(Type, ...)                                 \
  template <class S, class F>                                      \
    requires std::same_as<std::remove_const_t<S>, Type>            \
  void fields(S& s, F&& f) {                                       \
    __VA_ARGS__                                                    \
  }

MORPHEUS_FIELDS(TraceInfo, f("hash", s.hash); f("requests", s.requests); f("instructions", s.instructions);)
MORPHEUS_FIELDS(RouteCounts, f("conventional", s.conventional); f("extended_forwarded", s.extended_forwarded);
                f("predicted_miss", s.predicted_miss); f("total", s.total);)
MORPHEUS_FIELDS(ConventionalStats, f("accesses", s.accesses); f("hits", s.hits); f("misses", s.misses);
                f("dirty_writebacks", s.dirty_writebacks); f("hit_rate", s.hit_rate);)
MORPHEUS_FIELDS(ExtendedStats, f("services", s.services); f("hits", s.hits); f("misses", s.misses);
                f("fills", s.fills); f("fill_inserts", s.fill_inserts); f("evictions", s.evictions);
                f("dirty_writebacks", s.dirty_writebacks); f("hit_rate", s.hit_rate);)
MORPHEUS_FIELDS(PredictorStats, f("mode", s.mode); f("true_hit", s.true_hit); f("false_positive", s.false_positive);
                f("true_miss", s.true_miss); f("false_negative", s.false_negative);
                f("false_positive_rate", s.false_positive_rate); f("accuracy", s.accuracy);
                f("bf_swaps", s.bf_swaps);)
MORPHEUS_FIELDS(MpkiStats, f("label", s.label); f("llc_misses", s.llc_misses); f("denominator", s.denominator);
                f("value", s.value);)
MORPHEUS_FIELDS(LatencySummary, f("count", s.count); f("mean", s.mean); f("p50", s.p50); f("p90", s.p90);
                f("p99", s.p99); f("max", s.max);)
MORPHEUS_FIELDS(LatencyStats, f("overall", s.overall); f("conv_hit", s.conv_hit); f("conv_miss", s.conv_miss);
                f("ext_hit", s.ext_hit); f("ext_miss", s.ext_miss); f("predicted_miss", s.predicted_miss);)
MORPHEUS_FIELDS(EnergyReport, f("conv_bytes", s.conv_bytes); f("ext_bytes", s.ext_bytes);
                f("dram_bytes", s.dram_bytes); f("conv_pj_per_byte", s.conv_pj_per_byte);
                f("ext_pj_per_byte", s.ext_pj_per_byte); f("dram_pj_per_byte", s.dram_pj_per_byte);
                f("conv_j", s.conv_j); f("ext_j", s.ext_j); f("dram_j", s.dram_j); f("total_j", s.total_j);
                f("ext_to_conv_ratio", s.ext_to_conv_ratio);)
MORPHEUS_FIELDS(CapacityReport, f("conventional_bytes", s.conventional_bytes);
                f("cache_mode_sms", s.cache_mode_sms); f("rf_blocks_per_set", s.rf_blocks_per_set);
                f("l1_blocks_per_set", s.l1_blocks_per_set); f("rf_bytes_per_sm", s.rf_bytes_per_sm);
                f("l1_bytes_per_sm", s.l1_bytes_per_sm); f("extended_bytes_per_sm", s.extended_bytes_per_sm);
                f("extended_bytes", s.extended_bytes); f("extended_sets", s.extended_sets);
                f("predictor_bytes_per_partition", s.predictor_bytes_per_partition);
                f("query_logic_bytes_per_partition", s.query_logic_bytes_per_partition);
                f("overhead_bytes_per_partition", s.overhead_bytes_per_partition);
                f("overhead_bytes_total", s.overhead_bytes_total);)
MORPHEUS_FIELDS(ThroughputStats, f("makespan_ns", s.makespan_ns); f("conv_bytes_per_s", s.conv_bytes_per_s);
                f("ext_bytes_per_s", s.ext_bytes_per_s);
                f("ext_bytes_per_s_per_cache_sm", s.ext_bytes_per_s_per_cache_sm);
                f("dram_bytes_per_s", s.dram_bytes_per_s); f("max_queue_depth", s.max_queue_depth);
                f("queue_overflow_stalls", s.queue_overflow_stalls);)
MORPHEUS_FIELDS(CompressionStats, f("enabled", s.enabled); f("epochs", s.epochs);
                f("epoch_evictions", s.epoch_evictions); f("slots_high", s.slots_high);
                f("slots_low", s.slots_low); f("slots_uncompressed", s.slots_uncompressed);
                f("stored_high", s.stored_high); f("stored_low", s.stored_low);
                f("stored_uncompressed", s.stored_uncompressed);
                f("effective_capacity_blocks", s.effective_capacity_blocks);)
MORPHEUS_FIELDS(SimReport, f("schema_version", s.schema_version); f("trace", s.trace); f("config", s.config);
                f("model_notes", s.model_notes); f("routes", s.routes); f("conventional_llc", s.conventional_llc);
                f("extended_llc", s.extended_llc); f("predictor", s.predictor); f("mpki", s.mpki);
                f("latency_ns", s.latency_ns); f("energy", s.energy); f("capacity", s.capacity);
                f("throughput", s.throughput); f("compression", s.compression);)
MORPHEUS_FIELDS(ComparisonDeltas, f("mpki_reduction_pct", s.mpki_reduction_pct);
                f("mpki_delta_pct", s.mpki_delta_pct); f("mean_latency_delta_pct", s.mean_latency_delta_pct);
                f("energy_delta_pct", s.energy_delta_pct); f("llc_miss_delta_pct", s.llc_miss_delta_pct);)
MORPHEUS_FIELDS(ComparisonReport, f("schema_version", s.schema_version); f("trace_hash", s.trace_hash);
                f("deltas", s.deltas); f("baseline", s.baseline); f("variant", s.variant);)

#undef MORPHEUS_FIELDS

template <class T>
struct is_optional : std::false_type {};
template <class T>
struct is_optional<std::optional<T>> : std::true_type {};

template <class T>
Json encode(const T& v) {
  if constexpr (std::is_same_v<T, KeyValues>) {
    Json j = Json::object();
    for (const auto& [k, val] : v) j[k] = val;
    return j;
  } else if constexpr (is_optional<T>::value) {
    return v ? encode(*v) : Json(nullptr);
  } else if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) {
    return Json(v);
  } else {
    Json j = Json::object();
    fields(v, [&](const char* key, const auto& x) { j[key] = encode(x); });
    return j;
  }
}

template <class T>
void decode(const Json& j, T& v, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, KeyValues>) {
      if (!j.is_object()) throw Error(path + " must be an object");
      v.clear();
      for (const auto& [k, val] : j.items()) v.emplace_back(k, val.template get<std::string>());
    } else if constexpr (is_optional<T>::value) {
      if (j.is_null()) {
        v.reset();
      } else {
        typename T::value_type inner{};
        decode(j, inner, path);
        v = inner;
      }
    } else if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) {
      v = j.template get<T>();
    } else {
      if (!j.is_object()) throw Error(path + " must be an object");
      fields(v, [&](const char* key, auto& x) {
        auto it = j.find(key);
        if (it == j.end()) throw Error("report field missing: " + path + "." + key);
        decode(*it, x, path + "." + key);
      });
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("report field " + path + " has the wrong type: " + e.what());
  }
}

template <class T>
T parse_document(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("report is not valid JSON: ") + e.what());
  }
  T out;
  decode(j, out, "$");
  if (out.schema_version != kReportSchemaVersion)
    throw Error("unsupported report schema_version " + std::to_string(out.schema_version));
  return out;
}

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

void require(bool ok, const std::string& identity) {
  if (!ok) throw InconsistentCounters("counter identity violated: " + identity);
}

std::optional<double> delta_pct(double base, double variant) {
  if (base == 0) return variant == 0 ? std::optional<double>(0.0) : std::nullopt;
  return (variant - base) / base * 100.0;
}

}  // namespace

std::string_view latency_class_name(LatencyClass c) {
  switch (c) {
    case LatencyClass::ConvHit: return "conv_hit";
    case LatencyClass::ConvMiss: return "conv_miss";
    case LatencyClass::ExtHit: return "ext_hit";
    case LatencyClass::ExtMiss: return "ext_miss";
    case LatencyClass::PredictedMiss: return "predicted_miss";
  }
  return "?";
}

EnergyReport compute_energy(std::uint64_t conv_bytes, std::uint64_t ext_bytes, std::uint64_t dram_bytes,
                            double conv_pj, double ext_pj, double dram_pj) {
  EnergyReport e;
  e.conv_bytes = conv_bytes;
  e.ext_bytes = ext_bytes;
  e.dram_bytes = dram_bytes;
  e.conv_pj_per_byte = conv_pj;
  e.ext_pj_per_byte = ext_pj;
  e.dram_pj_per_byte = dram_pj;
  e.conv_j = static_cast<double>(conv_bytes) * conv_pj * 1e-12;
  e.ext_j = static_cast<double>(ext_bytes) * ext_pj * 1e-12;
  e.dram_j = static_cast<double>(dram_bytes) * dram_pj * 1e-12;
  e.total_j = e.conv_j + e.ext_j + e.dram_j;
  e.ext_to_conv_ratio = ratio(ext_pj, conv_pj);
  return e;
}

LatencySummary summarize_latencies(std::vector<std::int64_t> ps) {
  LatencySummary s;
  s.count = ps.size();
  if (ps.empty()) return s;
  std::sort(ps.begin(), ps.end());
  // Nearest rank: the smallest value with at least p% of samples at or below it.
  auto rank = [&](double p) {
    auto r = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(ps.size())));
    return static_cast<double>(ps[std::clamp<std::size_t>(r, 1, ps.size()) - 1]) / 1000.0;
  };
  long double sum = 0;
  for (auto v : ps) sum += v;
  s.mean = static_cast<double>(sum / static_cast<long double>(ps.size()) / 1000.0L);
  s.p50 = rank(50);
  s.p90 = rank(90);
  s.p99 = rank(99);
  s.max = static_cast<double>(ps.back()) / 1000.0;
  return s;
}

SimReport finalize(const RawCounters& raw, const ReportContext& ctx) {
  const auto lat_count = [&](LatencyClass c) { return raw.latency_ps[static_cast<std::size_t>(c)].size(); };

  require(raw.false_negative == 0,
          "false_negative == 0 (the predictor reported a miss for " + std::to_string(raw.false_negative) +
              " resident block(s))");
  require(raw.routed_conventional + raw.routed_extended + raw.routed_predicted_miss == raw.requests,
          "routed conventional + extended + predicted_miss == requests");
  require(raw.responses == raw.requests, "responses == requests");
  require(raw.conv_hits + raw.conv_misses == raw.routed_conventional,
          "conventional hits + misses == conventional routes");
  require(raw.ext_hits + raw.ext_misses == raw.ext_services, "extended hits + misses == extended services");
  require(raw.ext_services == raw.routed_extended, "extended services == forwarded requests");
  require(raw.true_hit + raw.false_positive == raw.routed_extended, "true_hit + false_positive == forwarded requests");
  require(raw.true_miss + raw.false_negative == raw.routed_predicted_miss,
          "true_miss + false_negative == predicted misses");
  require(raw.ext_fills <= raw.routed_predicted_miss, "fills <= predicted misses");
  require(lat_count(LatencyClass::ConvHit) == raw.conv_hits, "conv_hit latency samples == conventional hits");
  require(lat_count(LatencyClass::ConvMiss) == raw.conv_misses, "conv_miss latency samples == conventional misses");
  require(lat_count(LatencyClass::ExtHit) == raw.ext_hits, "ext_hit latency samples == extended hits");
  require(lat_count(LatencyClass::ExtMiss) == raw.ext_misses, "ext_miss latency samples == extended misses");
  require(lat_count(LatencyClass::PredictedMiss) == raw.routed_predicted_miss,
          "predicted_miss latency samples == predicted misses");

  SimReport r;
  r.trace = ctx.trace;
  r.config = ctx.config;
  r.model_notes = ctx.model_notes;

  r.routes = {raw.routed_conventional, raw.routed_extended, raw.routed_predicted_miss, raw.requests};
  r.conventional_llc = {raw.routed_conventional, raw.conv_hits, raw.conv_misses, raw.conv_writebacks,
                        ratio(static_cast<double>(raw.conv_hits), static_cast<double>(raw.routed_conventional))};
  r.extended_llc = {raw.ext_services, raw.ext_hits,      raw.ext_misses,     raw.ext_fills,
                    raw.ext_fill_inserts, raw.ext_evictions, raw.ext_writebacks,
                    ratio(static_cast<double>(raw.ext_hits), static_cast<double>(raw.ext_services))};

  auto& p = r.predictor;
  p.mode = ctx.predictor_mode;
  p.true_hit = raw.true_hit;
  p.false_positive = raw.false_positive;
  p.true_miss = raw.true_miss;
  p.false_negative = raw.false_negative;
  p.false_positive_rate =
      ratio(static_cast<double>(raw.false_positive), static_cast<double>(raw.false_positive + raw.true_miss));
  const auto lookups = raw.true_hit + raw.false_positive + raw.true_miss + raw.false_negative;
  p.accuracy = ratio(static_cast<double>(raw.true_hit + raw.true_miss), static_cast<double>(lookups));
  p.bf_swaps = raw.bf_swaps;

  auto& m = r.mpki;
  m.llc_misses = raw.conv_misses + raw.ext_misses + raw.routed_predicted_miss;
  if (ctx.trace.instructions && *ctx.trace.instructions > 0) {
    m.label = "misses_per_kilo_instruction";
    m.denominator = *ctx.trace.instructions;
  } else {
    m.label = "misses_per_kilo_request";
    m.denominator = raw.requests;
  }
  m.value = ratio(static_cast<double>(m.llc_misses) * 1000.0, static_cast<double>(m.denominator));

  std::vector<std::int64_t> all;
  for (const auto& v : raw.latency_ps) all.insert(all.end(), v.begin(), v.end());
  auto cls = [&](LatencyClass c) { return summarize_latencies(raw.latency_ps[static_cast<std::size_t>(c)]); };
  r.latency_ns = {summarize_latencies(std::move(all)), cls(LatencyClass::ConvHit), cls(LatencyClass::ConvMiss),
                  cls(LatencyClass::ExtHit),           cls(LatencyClass::ExtMiss), cls(LatencyClass::PredictedMiss)};

  r.energy = compute_energy(raw.conv_bytes, raw.ext_bytes, raw.dram_bytes, ctx.conv_pj_per_byte, ctx.ext_pj_per_byte,
                            ctx.dram_pj_per_byte);
  r.capacity = ctx.capacity;

  auto& t = r.throughput;
  const double span_s = raw.requests == 0 ? 0.0 : static_cast<double>(raw.last_completion_ps - raw.first_issue_ps) * 1e-12;
  t.makespan_ns = span_s * 1e9;
  t.conv_bytes_per_s = ratio(static_cast<double>(raw.conv_bytes), span_s);
  t.ext_bytes_per_s = ratio(static_cast<double>(raw.ext_bytes), span_s);
  t.ext_bytes_per_s_per_cache_sm = ratio(t.ext_bytes_per_s, static_cast<double>(ctx.capacity.cache_mode_sms));
  t.dram_bytes_per_s = ratio(static_cast<double>(raw.dram_bytes), span_s);
  t.max_queue_depth = raw.max_queue_depth;
  t.queue_overflow_stalls = raw.queue_overflow_stalls;

  r.compression = {ctx.compression,     raw.epochs,         raw.epoch_evictions, raw.slots_high,
                   raw.slots_low,       raw.slots_uncompressed, raw.stored_high, raw.stored_low,
                   raw.stored_uncompressed, raw.effective_capacity_blocks};
  return r;
}

std::string to_json(const SimReport& r) { return encode(r).dump(2) + "\n"; }

SimReport parse_report(std::string_view json) { return parse_document<SimReport>(json); }

ComparisonReport compare(const SimReport& baseline, const SimReport& variant) {
  if (baseline.trace.hash != variant.trace.hash)
    throw TraceMismatch("reports were produced from different traces (" + baseline.trace.hash + " vs " +
                        variant.trace.hash + ")");
  ComparisonReport c;
  c.trace_hash = baseline.trace.hash;
  c.baseline = baseline;
  c.variant = variant;
  auto& d = c.deltas;
  d.mpki_delta_pct = delta_pct(baseline.mpki.value, variant.mpki.value);
  if (d.mpki_delta_pct) d.mpki_reduction_pct = *d.mpki_delta_pct == 0 ? 0.0 : -*d.mpki_delta_pct;
  d.mean_latency_delta_pct = delta_pct(baseline.latency_ns.overall.mean, variant.latency_ns.overall.mean);
  d.energy_delta_pct = delta_pct(baseline.energy.total_j, variant.energy.total_j);
  d.llc_miss_delta_pct = delta_pct(static_cast<double>(baseline.mpki.llc_misses),
                                   static_cast<double>(variant.mpki.llc_misses));
  return c;
}

std::string to_json(const ComparisonReport& r) { return encode(r).dump(2) + "\n"; }

ComparisonReport parse_comparison(std::string_view json) { return parse_document<ComparisonReport>(json); }

}  // namespace morpheus
