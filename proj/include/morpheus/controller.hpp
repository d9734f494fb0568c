#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "morpheus/bloom_predictor.hpp"
#include "morpheus/cache_core.hpp"
#include "morpheus/extended_llc.hpp"
#include "morpheus/memory.hpp"
#include "morpheus/trace.hpp"

namespace morpheus {

enum class Route : std::uint8_t { ToConventional, ToExtendedPredictedHit, ToDramPredictedMiss };
std::string_view route_name(Route r);

// Bloom is the dual-filter predictor. Off forwards every extended request
// (No-Prediction). Perfect consults the set's tags directly.
enum class PredictorMode : std::uint8_t { Bloom, Off, Perfect };
std::string_view predictor_mode_name(PredictorMode m);
std::optional<PredictorMode> parse_predictor_mode(std::string_view s);

// How an extended block number picks its row within the partition.
enum class SetHash : std::uint8_t { Identity, Mixed };
std::string_view set_hash_name(SetHash h);
std::optional<SetHash> parse_set_hash(std::string_view s);

inline constexpr std::uint32_t kWarpStatusRows = 256;
inline constexpr std::uint64_t kQueryLogicBytes = 5 * 1024;

struct ControllerConfig {
  std::uint32_t partitions = 10;
  std::uint64_t conventional_bytes = 5ull << 20;  // whole GPU
  std::uint32_t conventional_ways = 16;
  ExtLlcConfig ext;
  PredictorMode predictor = PredictorMode::Bloom;
  std::uint32_t bloom_bits = kBloomFilterBytes * 8;
  std::uint32_t bloom_hashes = kBloomHashes;
  SetHash set_hash = SetHash::Identity;
  std::uint32_t request_queue_entries = 256;
  std::uint32_t warp_status_rows = kWarpStatusRows;

  CacheGeometry partition_geometry() const;
  void validate() const;  // throws ConfigError
};

// Where one address lives.
struct DecodedAddress {
  std::uint32_t partition = 0;
  bool extended = false;
  std::uint64_t block = 0;         // global block number
  std::uint64_t local_block = 0;   // block number inside the partition
  std::uint64_t ext_block = 0;     // dense extended block index (extended only)
  std::uint32_t row = 0;           // extended set row in the partition (extended only)
};

// Static split of each partition's set-index space. Blocks are interleaved
// across partitions by their low bits. Inside a partition, runs of
// conv_sets consecutive blocks form groups. Of every M = conv_sets +
// ext_share groups, ext_share go to the extended LLC, spread evenly over the
// period, so the split tracks the two capacities to within one set.
class AddressSeparator {
 public:
  AddressSeparator() = default;
  // ext_blocks[p] is partition p's extended capacity in blocks, rows[p] its
  // extended set count.
  AddressSeparator(std::uint32_t partitions, std::uint64_t conv_sets, std::uint32_t conv_ways,
                   std::vector<std::uint64_t> ext_blocks, std::vector<std::uint32_t> rows, SetHash hash);

  std::uint32_t partitions() const { return partitions_; }
  std::uint64_t conventional_sets() const { return conv_sets_; }
  // Extended share of partition p in conventional-set units.
  std::uint64_t extended_sets(std::uint32_t p) const { return ext_share_[p]; }
  std::uint32_t rows(std::uint32_t p) const { return rows_[p]; }

  std::uint32_t partition_of(std::uint64_t address) const;
  DecodedAddress decode(std::uint64_t address) const;
  // Extended row for an address; throws OutOfPartition if it maps to the
  // conventional range.
  std::uint32_t set_index(std::uint64_t address) const;

 private:
  std::uint32_t partitions_ = 1;
  std::uint64_t conv_sets_ = 1;
  std::vector<std::uint64_t> ext_share_;
  std::vector<std::uint32_t> rows_;
  SetHash hash_ = SetHash::Identity;
};

// Builds the GPU-wide separator; rows follow the set ownership rule
// (global set s belongs to partition s mod P).
AddressSeparator make_separator(const ControllerConfig& cfg);

enum class RowResult : std::uint8_t { None, Pending, Hit, Miss };

struct WarpStatusRow {
  std::uint64_t tag = 0;
  std::uint32_t origin_sm = 0;
  std::uint64_t request_id = 0;
  bool busy = false;
  Op op = Op::Read;
  bool fill = false;
  RowResult result = RowResult::None;
  std::uint32_t data_ptr = 0;  // read/write data buffer entry
};

struct QueuedRequest {
  std::uint64_t request_id = 0;
  std::uint64_t block = 0;
  std::uint32_t origin_sm = 0;
  Op op = Op::Read;
  bool fill = false;  // predicted-miss fill rather than a demand request
};

// Per-partition request queue and warp status table. Each extended set owns
// one row, and a busy row holds back its set's queue.
class QueryLogicUnit {
 public:
  QueryLogicUnit(std::uint32_t rows = 0, std::uint32_t queue_entries = 256);

  std::uint32_t rows() const { return static_cast<std::uint32_t>(table_.size()); }
  const WarpStatusRow& row(std::uint32_t r) const { return table_[r]; }

  void enqueue(std::uint32_t row, const QueuedRequest& q);
  // Pops the head of the row's queue into the row if the row is idle.
  std::optional<QueuedRequest> dispatch(std::uint32_t row);
  void complete(std::uint32_t row, bool hit);

  std::uint64_t depth() const { return depth_; }
  std::uint64_t queued(std::uint32_t row) const { return queues_[row].size(); }
  std::uint64_t max_depth() const { return max_depth_; }
  // Enqueues that found the queue at capacity. Requests are never dropped;
  // the count is a backpressure signal.
  std::uint64_t overflow_stalls() const { return overflow_stalls_; }
  std::uint32_t busy_rows() const;

 private:
  std::vector<WarpStatusRow> table_;
  std::vector<std::deque<QueuedRequest>> queues_;
  std::uint32_t capacity_;
  std::uint64_t depth_ = 0;
  std::uint64_t max_depth_ = 0;
  std::uint64_t overflow_stalls_ = 0;
};

struct RouteDecision {
  Route route = Route::ToConventional;
  DecodedAddress where;
  Prediction prediction = Prediction::PredictMiss;
  bool resident = false;  // ground truth at routing time
};

struct ConvOutcome {
  bool hit = false;
  std::uint64_t value = 0;
  std::optional<std::uint64_t> writeback;  // dirty victim, global block number
};

// One LLC partition's controller: conventional slice, the extended sets it
// owns with their predictors, and the query logic unit.
class PartitionController {
 public:
  PartitionController(std::uint32_t partition, const ControllerConfig& cfg, const AddressSeparator& sep);

  std::uint32_t partition() const { return partition_; }
  const AddressSeparator& separator() const { return sep_; }

  // Pure with respect to cache state; consults the predictor for extended
  // addresses.
  RouteDecision route(const MemoryRequest& r) const;

  // Conventional LLC access. The data operation applies to `memory`.
  ConvOutcome access_conventional(const MemoryRequest& r, BackingMemory& memory);
  // Predicted-miss data operation straight on DRAM; returns the value.
  std::uint64_t handle_predicted_miss(const MemoryRequest& r, BackingMemory& memory);

  ServiceOutcome service(std::uint32_t row, const MemoryRequest& r, BackingMemory& memory);
  FillOutcome fill(std::uint32_t row, std::uint64_t block, BackingMemory& memory);
  void complete(std::uint32_t row, bool hit);
  // Runs the compression epoch on every register-file set.
  std::vector<EvictedBlock> end_epoch(BackingMemory& memory);
  // Epoch boundary with level counts pooled per owning SM, indexed by SM id.
  std::vector<EvictedBlock> end_epoch(BackingMemory& memory, const std::vector<LevelCounts>& per_sm);

  QueryLogicUnit& qlu() { return qlu_; }
  const QueryLogicUnit& qlu() const { return qlu_; }
  std::uint32_t rows() const { return static_cast<std::uint32_t>(sets_.size()); }
  ExtendedSet& set(std::uint32_t row) { return sets_[row]; }
  const ExtendedSet& set(std::uint32_t row) const { return sets_[row]; }
  const PredictorSet& predictor(std::uint32_t row) const { return predictors_[row]; }
  const Cache& conventional() const { return conv_; }
  std::uint64_t extended_capacity_blocks() const;

  std::uint64_t storage_overhead_bytes() const;

 private:
  std::uint32_t partition_;
  PredictorMode mode_;
  AddressSeparator sep_;
  Cache conv_;
  std::vector<ExtendedSet> sets_;
  std::vector<PredictorSet> predictors_;
  QueryLogicUnit qlu_;
};

// Predictor storage (provisioned for the full warp status table when the
// partition owns any extended set) plus query logic storage.
std::uint64_t storage_overhead_bytes(std::uint64_t extended_sets_in_partition,
                                     std::uint32_t provisioned_rows = kWarpStatusRows);

}  // namespace morpheus
