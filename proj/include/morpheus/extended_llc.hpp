#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "morpheus/bloom_predictor.hpp"
#include "morpheus/cache_core.hpp"
#include "morpheus/compression.hpp"
#include "morpheus/memory.hpp"
#include "morpheus/trace.hpp"

namespace morpheus {

// SharedMemory is reserved: L1 and shared memory are unified on the modeled
// GPU, so shared-memory capacity is folded into the L1 backing.
enum class Backing : std::uint8_t { RegisterFile, L1, SharedMemory };

std::string_view backing_name(Backing b);

struct ExtLlcConfig {
  std::vector<std::uint32_t> cache_mode_sms;
  std::uint32_t total_sms = 68;
  std::uint32_t warps_per_sm = 48;
  std::uint32_t rf_warps = 32;
  std::uint32_t l1_warps = 16;
  // nullopt derives the per-set block count from the auxiliary-register
  // reservation model below.
  std::optional<std::uint32_t> blocks_per_rf_set;
  std::uint32_t block_bytes = 128;
  std::uint64_t rf_bytes_per_sm = 256 * 1024;
  std::uint64_t l1_bytes_per_sm = 128 * 1024;
  std::uint32_t max_registers_per_thread = 256;
  // (helper warps, warp registers each warp keeps for metadata and its own
  // execution context). Interpolated linearly between entries.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> aux_reservation{
      {1, 17}, {8, 17}, {16, 15}, {32, 14}, {48, 10}};
  bool compression = false;

  std::uint32_t warps_used() const { return rf_warps + l1_warps; }
  void validate() const;  // throws ConfigError
};

std::uint32_t reserved_registers(const ExtLlcConfig& cfg, std::uint32_t warps);
std::uint32_t rf_blocks_per_set(const ExtLlcConfig& cfg);
std::uint32_t l1_blocks_per_set(const ExtLlcConfig& cfg);

struct ExtCapacity {
  std::uint32_t rf_blocks_per_set = 0;
  std::uint32_t l1_blocks_per_set = 0;
  std::uint64_t rf_bytes_per_sm = 0;
  std::uint64_t l1_bytes_per_sm = 0;
  std::uint64_t bytes_per_sm = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t sets_per_sm = 0;
  std::uint64_t total_sets = 0;
};

// Uncompressed data-array capacity; throws ConfigError on an invalid config.
ExtCapacity capacity_bytes(const ExtLlcConfig& cfg);

struct SetOwner {
  std::uint32_t sm = 0;
  std::uint32_t warp = 0;
  bool operator==(const SetOwner&) const = default;
};

struct LookupResult {
  bool hit = false;
  std::uint32_t block_index = 0;
};

struct EvictedBlock {
  std::uint64_t block = 0;  // block number
  bool dirty = false;
};

struct ServiceOutcome {
  enum class Kind { HitData, MissFilled, AtomicResult };
  Kind kind = Kind::HitData;
  bool hit = false;
  std::uint64_t value = 0;  // loaded value, or the old value for atomics
  BlockBytes data{};        // block contents after the request
  std::vector<EvictedBlock> evictions;  // dirty ones were already written back

  std::optional<EvictedBlock> writeback() const;
  std::uint32_t dirty_evictions() const;
};

struct FillOutcome {
  bool inserted = false;  // false when the block was already resident
  std::vector<EvictedBlock> evictions;
};

// One warp-owned, fully associative extended LLC set. Register-file sets may
// store BDI-compressed blocks; L1 sets hold plain 128 B blocks. Replacement
// uses the 12-bit counters with exact-recency tie-breaking, so the resident
// blocks are always the most recently used ones, which the predictor relies on.
class ExtendedSet {
 public:
  ExtendedSet(Backing backing, SetOwner owner, std::uint32_t slots, bool compression);

  Backing backing() const { return backing_; }
  SetOwner owner() const { return owner_; }
  bool busy() const { return busy_; }
  bool compression() const { return compression_; }

  // Current associativity: 4h+2l+u for register-file sets, the way count
  // otherwise.
  std::uint32_t associativity() const;
  std::uint32_t resident_blocks() const { return meta_.occupancy(); }
  bool contains(std::uint64_t block) const { return meta_.find(block).has_value(); }
  std::optional<BlockBytes> peek_data(std::uint64_t block) const;
  bool is_dirty(std::uint64_t block) const;

  // Tag match over valid ways; the lowest matching way wins. A hit updates
  // the LRU counters.
  LookupResult tag_lookup(std::uint64_t tag);

  // Services one demand request (read, write or atomic) routed to this set.
  // Throws InvariantViolation if the set is already busy; call complete()
  // when the owning warp is done.
  ServiceOutcome service(const MemoryRequest& request, BackingMemory& memory, PredictorSet* predictor);
  void complete() { busy_ = false; }

  // Inserts a block fetched on the predicted-miss path, or refreshes it if
  // it is already resident.
  FillOutcome fill(std::uint64_t block, BackingMemory& memory, PredictorSet* predictor);

  const LevelAllocation& allocation() const { return alloc_; }
  EpochCounters& epoch_counters() { return epoch_; }
  const EpochCounters& epoch_counters() const { return epoch_; }
  const LevelCounts& stored_counts() const { return stored_; }
  const LevelCounts& classified_counts() const { return classified_; }
  // Applies an epoch decision: evicts LRU blocks of the overflowing class
  // until the residents fit, then re-packs them. Dirty evictions go to memory.
  std::vector<EvictedBlock> reallocate(const LevelAllocation& next, BackingMemory& memory);
  // Runs epoch_update on this set's counters and applies it.
  std::vector<EvictedBlock> end_epoch(BackingMemory& memory);
  // Same, but with counters pooled over a group of sets.
  std::vector<EvictedBlock> end_epoch(BackingMemory& memory, const LevelCounts& pooled);

  const CacheSet& metadata() const { return meta_; }
  // Test hook: places metadata directly, bypassing replacement.
  void force_meta(std::uint32_t way, const CacheBlockMeta& m) { meta_.force(way, m); }

 private:
  struct WayData {
    CompressedBlock stored;
    CompressionLevel classified = CompressionLevel::Uncompressed;
  };

  BlockBytes read_way(std::uint32_t way) const;
  void evict_way(std::uint32_t way, BackingMemory& memory, std::vector<EvictedBlock>& out);
  // Stores `data` for the block in `way` (already present in metadata),
  // evicting other LRU blocks until it fits.
  void store_way(std::uint32_t way, const BlockBytes& data, BackingMemory& memory, std::vector<EvictedBlock>& out);
  void release_storage(std::uint32_t way);
  std::uint32_t insert(std::uint64_t block, const BlockBytes& data, bool dirty, BackingMemory& memory,
                       std::vector<EvictedBlock>& out);

  Backing backing_;
  SetOwner owner_;
  bool compression_;
  bool busy_ = false;
  LevelAllocation alloc_;
  CacheSet meta_;
  std::vector<WayData> data_;
  LevelCounts stored_;
  LevelCounts classified_;
  EpochCounters epoch_;
};

}  // namespace morpheus
