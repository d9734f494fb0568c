#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace morpheus {

inline constexpr std::uint16_t kLruMax = 0xfff;

struct CacheGeometry {
  std::uint64_t total_bytes = 5ull << 20;
  std::uint32_t ways = 16;
  std::uint32_t block_bytes = 128;

  std::uint64_t set_count() const { return total_bytes / (std::uint64_t{ways} * block_bytes); }
  void validate() const;  // throws ConfigError
};

struct CacheBlockMeta {
  std::uint64_t tag = 0;
  bool valid = false;
  bool dirty = false;
  std::uint16_t lru_counter = 0;  // 12-bit, saturating at 0
};

struct Evicted {
  std::uint64_t block_address = 0;
  bool dirty = false;

  bool operator==(const Evicted&) const = default;
};

struct AccessResult {
  bool hit = false;
  std::uint32_t way = 0;  // hit way, or the way the miss was filled into
  std::optional<Evicted> victim;
};

enum class AccessKind { Read, Write };

// How equal counters (both saturated at 0) are ordered when picking a victim.
// LowestWay is the plain counter scheme. OldestTouch additionally keeps a
// per-way access stamp so a saturated tie still evicts the true LRU block.
enum class TieBreak { LowestWay, OldestTouch };

// One set with Algorithm-1 style counters: the touched block is reset to
// 0xfff and every other valid block is decremented (saturating at 0). Tags
// here are block numbers (address / block_bytes).
class CacheSet {
 public:
  explicit CacheSet(std::uint32_t ways = 0, TieBreak tie = TieBreak::LowestWay);

  std::uint32_t ways() const { return static_cast<std::uint32_t>(meta_.size()); }
  std::uint32_t occupancy() const;
  const CacheBlockMeta& meta(std::uint32_t way) const { return meta_[way]; }
  TieBreak tie_break() const { return tie_; }

  // Lowest way holding a valid block with this tag.
  std::optional<std::uint32_t> find(std::uint64_t tag) const;
  void touch(std::uint32_t way);
  void mark_dirty(std::uint32_t way) { meta_[way].dirty = true; }

  // Least-recently-used valid way, optionally ignoring one way; nullopt when
  // there is no candidate.
  std::optional<std::uint32_t> lru_way(std::optional<std::uint32_t> skip = std::nullopt) const;
  // Lowest invalid way, else the LRU way.
  std::uint32_t victim_way() const;

  // Writes a block into `way` (evicting whatever is there) and touches it.
  std::optional<CacheBlockMeta> install(std::uint32_t way, std::uint64_t tag, bool dirty);
  CacheBlockMeta invalidate(std::uint32_t way);

  // Full access with write-allocate; victim reported as a block number.
  AccessResult access(std::uint64_t tag, AccessKind kind);

  // Shrinks (evicting lowest-counter blocks first) or grows the set. Returns
  // the evicted blocks as (block number, dirty); survivors keep their order.
  std::vector<Evicted> resize_ways(std::uint32_t new_ways);

  // Test hook: forces metadata into a way without touching counters.
  void force(std::uint32_t way, const CacheBlockMeta& m) { meta_[way] = m; }

  // True if way a is closer to eviction than way b.
  bool older(std::uint32_t a, std::uint32_t b) const;

 private:

  std::vector<CacheBlockMeta> meta_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t clock_ = 0;
  TieBreak tie_;
};

// Set-associative, write-back, write-allocate cache. Set index is
// (block_address / block_bytes) mod set_count.
class Cache {
 public:
  explicit Cache(const CacheGeometry& geometry, TieBreak tie = TieBreak::LowestWay);

  const CacheGeometry& geometry() const { return geometry_; }
  std::uint64_t set_count() const { return sets_.size(); }
  std::uint64_t set_of(std::uint64_t block_address) const;

  // block_address must be block aligned.
  AccessResult access(std::uint64_t block_address, AccessKind kind);

  struct PeekResult {
    bool present = false;
    bool dirty = false;
  };
  PeekResult peek(std::uint64_t block_address) const;

  CacheSet& set(std::uint64_t index) { return sets_[index]; }
  const CacheSet& set(std::uint64_t index) const { return sets_[index]; }

  // resize_ways on one set; evicted entries carry byte block addresses.
  std::vector<Evicted> resize_ways(std::uint64_t set_index, std::uint32_t new_ways);

 private:
  CacheGeometry geometry_;
  std::vector<CacheSet> sets_;
};

}  // namespace morpheus
