#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace morpheus {

inline constexpr std::uint32_t kReportSchemaVersion = 1;

enum class LatencyClass : std::uint8_t { ConvHit, ConvMiss, ExtHit, ExtMiss, PredictedMiss };
inline constexpr std::size_t kLatencyClasses = 5;
std::string_view latency_class_name(LatencyClass c);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Counters gathered by the engine. Latencies are in picoseconds.
struct RawCounters {
  std::uint64_t requests = 0;
  std::uint64_t responses = 0;

  std::uint64_t routed_conventional = 0;
  std::uint64_t routed_extended = 0;
  std::uint64_t routed_predicted_miss = 0;

  std::uint64_t conv_hits = 0;
  std::uint64_t conv_misses = 0;
  std::uint64_t conv_writebacks = 0;

  std::uint64_t ext_services = 0;
  std::uint64_t ext_hits = 0;
  std::uint64_t ext_misses = 0;
  std::uint64_t ext_fills = 0;
  std::uint64_t ext_fill_inserts = 0;
  std::uint64_t ext_evictions = 0;
  std::uint64_t ext_writebacks = 0;
  std::uint64_t epochs = 0;
  std::uint64_t epoch_evictions = 0;

  std::uint64_t true_hit = 0;
  std::uint64_t false_positive = 0;
  std::uint64_t true_miss = 0;
  std::uint64_t false_negative = 0;
  std::uint64_t bf_swaps = 0;

  std::uint64_t conv_bytes = 0;
  std::uint64_t ext_bytes = 0;
  std::uint64_t dram_bytes = 0;

  std::array<std::vector<std::int64_t>, kLatencyClasses> latency_ps;
  std::int64_t first_issue_ps = 0;
  std::int64_t last_completion_ps = 0;

  std::uint64_t max_queue_depth = 0;
  std::uint64_t queue_overflow_stalls = 0;

  std::uint64_t slots_high = 0;
  std::uint64_t slots_low = 0;
  std::uint64_t slots_uncompressed = 0;
  std::uint64_t stored_high = 0;
  std::uint64_t stored_low = 0;
  std::uint64_t stored_uncompressed = 0;
  std::uint64_t effective_capacity_blocks = 0;
};

struct TraceInfo {
  std::string hash;
  std::uint64_t requests = 0;
  std::optional<std::uint64_t> instructions;
  bool operator==(const TraceInfo&) const = default;
};

struct RouteCounts {
  std::uint64_t conventional = 0;
  std::uint64_t extended_forwarded = 0;
  std::uint64_t predicted_miss = 0;
  std::uint64_t total = 0;
  bool operator==(const RouteCounts&) const = default;
};

struct ConventionalStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t dirty_writebacks = 0;
  double hit_rate = 0;
  bool operator==(const ConventionalStats&) const = default;
};

struct ExtendedStats {
  std::uint64_t services = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t fills = 0;
  std::uint64_t fill_inserts = 0;
  std::uint64_t evictions = 0;
  std::uint64_t dirty_writebacks = 0;
  double hit_rate = 0;
  bool operator==(const ExtendedStats&) const = default;
};

struct PredictorStats {
  std::string mode;
  std::uint64_t true_hit = 0;
  std::uint64_t false_positive = 0;
  std::uint64_t true_miss = 0;
  std::uint64_t false_negative = 0;
  double false_positive_rate = 0;  // false positives / non-resident lookups
  double accuracy = 0;
  std::uint64_t bf_swaps = 0;
  bool operator==(const PredictorStats&) const = default;
};

struct MpkiStats {
  std::string label;  // misses_per_kilo_instruction or misses_per_kilo_request
  std::uint64_t llc_misses = 0;
  std::uint64_t denominator = 0;
  double value = 0;
  bool operator==(const MpkiStats&) const = default;
};

struct LatencySummary {
  std::uint64_t count = 0;
  double mean = 0;
  double p50 = 0;
  double p90 = 0;
  double p99 = 0;
  double max = 0;
  bool operator==(const LatencySummary&) const = default;
};

struct LatencyStats {
  LatencySummary overall;
  LatencySummary conv_hit;
  LatencySummary conv_miss;
  LatencySummary ext_hit;
  LatencySummary ext_miss;
  LatencySummary predicted_miss;
  bool operator==(const LatencyStats&) const = default;
};

struct EnergyReport {
  std::uint64_t conv_bytes = 0;
  std::uint64_t ext_bytes = 0;
  std::uint64_t dram_bytes = 0;
  double conv_pj_per_byte = 0;
  double ext_pj_per_byte = 0;
  double dram_pj_per_byte = 0;
  double conv_j = 0;
  double ext_j = 0;
  double dram_j = 0;
  double total_j = 0;
  double ext_to_conv_ratio = 0;
  bool operator==(const EnergyReport&) const = default;
};

EnergyReport compute_energy(std::uint64_t conv_bytes, std::uint64_t ext_bytes, std::uint64_t dram_bytes,
                            double conv_pj, double ext_pj, double dram_pj);

struct CapacityReport {
  std::uint64_t conventional_bytes = 0;
  std::uint64_t cache_mode_sms = 0;
  std::uint64_t rf_blocks_per_set = 0;
  std::uint64_t l1_blocks_per_set = 0;
  std::uint64_t rf_bytes_per_sm = 0;
  std::uint64_t l1_bytes_per_sm = 0;
  std::uint64_t extended_bytes_per_sm = 0;
  std::uint64_t extended_bytes = 0;
  std::uint64_t extended_sets = 0;
  std::uint64_t predictor_bytes_per_partition = 0;
  std::uint64_t query_logic_bytes_per_partition = 0;
  std::uint64_t overhead_bytes_per_partition = 0;
  std::uint64_t overhead_bytes_total = 0;
  bool operator==(const CapacityReport&) const = default;
};

struct ThroughputStats {
  double makespan_ns = 0;
  double conv_bytes_per_s = 0;
  double ext_bytes_per_s = 0;
  double ext_bytes_per_s_per_cache_sm = 0;
  double dram_bytes_per_s = 0;
  std::uint64_t max_queue_depth = 0;
  std::uint64_t queue_overflow_stalls = 0;
  bool operator==(const ThroughputStats&) const = default;
};

struct CompressionStats {
  bool enabled = false;
  std::uint64_t epochs = 0;
  std::uint64_t epoch_evictions = 0;
  std::uint64_t slots_high = 0;
  std::uint64_t slots_low = 0;
  std::uint64_t slots_uncompressed = 0;
  std::uint64_t stored_high = 0;
  std::uint64_t stored_low = 0;
  std::uint64_t stored_uncompressed = 0;
  std::uint64_t effective_capacity_blocks = 0;
  bool operator==(const CompressionStats&) const = default;
};

struct SimReport {
  std::uint32_t schema_version = kReportSchemaVersion;
  TraceInfo trace;
  KeyValues config;
  KeyValues model_notes;
  RouteCounts routes;
  ConventionalStats conventional_llc;
  ExtendedStats extended_llc;
  PredictorStats predictor;
  MpkiStats mpki;
  LatencyStats latency_ns;
  EnergyReport energy;
  CapacityReport capacity;
  ThroughputStats throughput;
  CompressionStats compression;
  bool operator==(const SimReport&) const = default;
};

// Static run facts the engine hands to finalize.
struct ReportContext {
  TraceInfo trace;
  KeyValues config;
  KeyValues model_notes;
  std::string predictor_mode;
  bool compression = false;
  double conv_pj_per_byte = 10;
  double ext_pj_per_byte = 61;
  double dram_pj_per_byte = 120;
  CapacityReport capacity;
};

// Derives every statistic and checks the counter identities. Throws
// InconsistentCounters naming the first violated identity, including any
// false negative.
SimReport finalize(const RawCounters& raw, const ReportContext& ctx);

LatencySummary summarize_latencies(std::vector<std::int64_t> ps);

std::string to_json(const SimReport& r);
// Throws Error on malformed input.
SimReport parse_report(std::string_view json);

struct ComparisonDeltas {
  std::optional<double> mpki_reduction_pct;
  std::optional<double> mpki_delta_pct;
  std::optional<double> mean_latency_delta_pct;
  std::optional<double> energy_delta_pct;
  std::optional<double> llc_miss_delta_pct;
  bool operator==(const ComparisonDeltas&) const = default;
};

struct ComparisonReport {
  std::uint32_t schema_version = kReportSchemaVersion;
  std::string trace_hash;
  ComparisonDeltas deltas;
  SimReport baseline;
  SimReport variant;
  bool operator==(const ComparisonReport&) const = default;
};

// Deltas are (variant - baseline) / baseline in percent, and null when the
// baseline is zero but the variant is not. Throws TraceMismatch.
ComparisonReport compare(const SimReport& baseline, const SimReport& variant);

std::string to_json(const ComparisonReport& r);
ComparisonReport parse_comparison(std::string_view json);

}  // namespace morpheus
