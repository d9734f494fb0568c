#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace morpheus {

using BlockBytes = std::array<std::uint8_t, 128>;

inline constexpr std::uint32_t kSegmentBytes = 4;
inline constexpr std::uint32_t kSegments = 128 / kSegmentBytes;

// Ordered from most to least compressed.
enum class CompressionLevel : std::uint8_t { High = 0, Low = 1, Uncompressed = 2 };

std::string_view level_name(CompressionLevel level);
std::uint32_t payload_bytes(CompressionLevel level);   // 32, 64, 128
std::uint32_t blocks_per_slot(CompressionLevel level);  // 4, 2, 1

// Single-base BDI over 4-byte little-endian segments; segment 0 is the base
// and deltas are signed, modulo 2^32.
struct CompressedBlock {
  CompressionLevel level = CompressionLevel::Uncompressed;
  std::uint32_t base = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const CompressedBlock&) const = default;
};

CompressionLevel classify(const BlockBytes& block);
CompressedBlock compress(const BlockBytes& block);
// Throws CodecError (WrongLength) unless the input is exactly 128 bytes.
CompressedBlock compress(std::span<const std::uint8_t> bytes);
// Encodes at `level`, which must be no more compressed than classify(block).
CompressedBlock encode_at(const BlockBytes& block, CompressionLevel level);
// Throws CodecError (MalformedPayload) on a length/level mismatch.
BlockBytes decompress(const CompressedBlock& cb);

// Register slots of one extended set assigned to each level.
struct LevelAllocation {
  std::uint32_t high = 0;
  std::uint32_t low = 0;
  std::uint32_t uncompressed = 0;

  std::uint32_t total_slots() const { return high + low + uncompressed; }
  std::uint32_t effective_capacity() const { return 4 * high + 2 * low + uncompressed; }
  std::uint32_t slots(CompressionLevel level) const;
  std::uint32_t& slots(CompressionLevel level);
  std::uint32_t capacity(CompressionLevel level) const { return slots(level) * blocks_per_slot(level); }

  static LevelAllocation all_uncompressed(std::uint32_t slots) { return {0, 0, slots}; }
  bool operator==(const LevelAllocation&) const = default;
};

// Per-level block counts, used both for epoch statistics and for what is
// currently stored in each level of a set.
struct LevelCounts {
  std::uint32_t high = 0;
  std::uint32_t low = 0;
  std::uint32_t uncompressed = 0;

  std::uint32_t& at(CompressionLevel level);
  std::uint32_t at(CompressionLevel level) const;
  std::uint32_t total() const { return high + low + uncompressed; }
  bool operator==(const LevelCounts&) const = default;
};

struct EpochCounters {
  LevelCounts observed;
  std::uint64_t epoch_length_cycles = 10'000;

  void observe(CompressionLevel level) { ++observed.at(level); }
  void reset() { observed = {}; }
};

struct EpochDecision {
  LevelAllocation allocation;
  // Lower bound on the blocks that no longer fit, under the best packing of
  // the resident blocks into the new allocation.
  std::uint32_t evictions_required = 0;
};

// Largest-remainder apportionment of the set's slots proportional to the
// observed level counts; resets the counters. Fewer observations than slots
// keep `current` and leave the counters to accumulate.
EpochDecision epoch_update(EpochCounters& counters, const LevelAllocation& current,
                           const LevelCounts& resident_by_class = {});

// How many blocks with the given classified levels can be stored in `alloc`
// (a High block may sit in a High, Low or Uncompressed slot, a Low block in a
// Low or Uncompressed slot).
std::uint32_t max_packable(const LevelCounts& classified, const LevelAllocation& alloc);
bool fits(const LevelCounts& classified, const LevelAllocation& alloc);

// Most compressed level compatible with `classified` that still has room
// given what is already stored.
std::optional<CompressionLevel> placement(CompressionLevel classified, const LevelCounts& stored,
                                          const LevelAllocation& alloc);

// Moves one completely free slot from a level more compressed than
// `classified` to `classified`. Returns false when no such slot exists.
bool convert_free_slot(CompressionLevel classified, const LevelCounts& stored, LevelAllocation& alloc);

}  // namespace morpheus
