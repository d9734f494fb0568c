#include "morpheus/compression.hpp"

#include <algorithm>
#include <string>

#include "morpheus/errors.hpp"

namespace morpheus {

namespace {

std::uint32_t load_segment(const BlockBytes& b, std::uint32_t i) {
  const auto* p = &b[i * kSegmentBytes];
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

void store_segment(BlockBytes& b, std::uint32_t i, std::uint32_t v) {
  auto* p = &b[i * kSegmentBytes];
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

std::int32_t delta(std::uint32_t seg, std::uint32_t base) { return static_cast<std::int32_t>(seg - base); }

}  // namespace

std::string_view level_name(CompressionLevel level) {
  switch (level) {
    case CompressionLevel::High: return "high";
    case CompressionLevel::Low: return "low";
    case CompressionLevel::Uncompressed: return "uncompressed";
  }
  return "?";
}

std::uint32_t payload_bytes(CompressionLevel level) {
  switch (level) {
    case CompressionLevel::High: return 32;
    case CompressionLevel::Low: return 64;
    case CompressionLevel::Uncompressed: return 128;
  }
  return 128;
}

std::uint32_t blocks_per_slot(CompressionLevel level) { return 128 / payload_bytes(level); }

CompressionLevel classify(const BlockBytes& block) {
  std::uint32_t base = load_segment(block, 0);
  bool fits8 = true;
  for (std::uint32_t i = 1; i < kSegments; ++i) {
    auto d = delta(load_segment(block, i), base);
    if (d < -32768 || d > 32767) return CompressionLevel::Uncompressed;
    if (d < -128 || d > 127) fits8 = false;
  }
  return fits8 ? CompressionLevel::High : CompressionLevel::Low;
}

CompressedBlock encode_at(const BlockBytes& block, CompressionLevel level) {
  if (static_cast<int>(level) < static_cast<int>(classify(block)))
    throw CodecError("block does not fit compression level " + std::string(level_name(level)));
  CompressedBlock cb;
  cb.level = level;
  cb.base = load_segment(block, 0);
  if (level == CompressionLevel::Uncompressed) {
    cb.payload.assign(block.begin(), block.end());
    return cb;
  }
  const std::uint32_t width = payload_bytes(level) / kSegments;
  cb.payload.resize(payload_bytes(level));
  for (std::uint32_t i = 0; i < kSegments; ++i) {
    auto d = static_cast<std::uint32_t>(delta(load_segment(block, i), cb.base));
    for (std::uint32_t k = 0; k < width; ++k) cb.payload[i * width + k] = static_cast<std::uint8_t>(d >> (8 * k));
  }
  return cb;
}

CompressedBlock compress(const BlockBytes& block) { return encode_at(block, classify(block)); }

CompressedBlock compress(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != 128) throw CodecError("WrongLength: BDI input must be 128 bytes, got " + std::to_string(bytes.size()));
  BlockBytes b;
  std::copy(bytes.begin(), bytes.end(), b.begin());
  return compress(b);
}

BlockBytes decompress(const CompressedBlock& cb) {
  if (cb.payload.size() != payload_bytes(cb.level))
    throw CodecError("MalformedPayload: " + std::string(level_name(cb.level)) + " level expects " +
                     std::to_string(payload_bytes(cb.level)) + " bytes, got " + std::to_string(cb.payload.size()));
  BlockBytes out{};
  if (cb.level == CompressionLevel::Uncompressed) {
    std::copy(cb.payload.begin(), cb.payload.end(), out.begin());
    return out;
  }
  const std::uint32_t width = payload_bytes(cb.level) / kSegments;
  for (std::uint32_t i = 0; i < kSegments; ++i) {
    std::uint32_t raw = 0;
    for (std::uint32_t k = 0; k < width; ++k) raw |= std::uint32_t{cb.payload[i * width + k]} << (8 * k);
    // Sign-extend the stored delta.
    std::int32_t d = width == 1 ? static_cast<std::int8_t>(raw) : static_cast<std::int16_t>(raw);
    store_segment(out, i, cb.base + static_cast<std::uint32_t>(d));
  }
  return out;
}

std::uint32_t LevelAllocation::slots(CompressionLevel level) const {
  switch (level) {
    case CompressionLevel::High: return high;
    case CompressionLevel::Low: return low;
    case CompressionLevel::Uncompressed: return uncompressed;
  }
  return 0;
}

std::uint32_t& LevelAllocation::slots(CompressionLevel level) {
  switch (level) {
    case CompressionLevel::High: return high;
    case CompressionLevel::Low: return low;
    case CompressionLevel::Uncompressed: break;
  }
  return uncompressed;
}

std::uint32_t& LevelCounts::at(CompressionLevel level) {
  switch (level) {
    case CompressionLevel::High: return high;
    case CompressionLevel::Low: return low;
    default: return uncompressed;
  }
}

std::uint32_t LevelCounts::at(CompressionLevel level) const { return const_cast<LevelCounts*>(this)->at(level); }

std::uint32_t max_packable(const LevelCounts& c, const LevelAllocation& a) {
  std::uint32_t unc_left = a.capacity(CompressionLevel::Uncompressed);
  std::uint32_t low_left = a.capacity(CompressionLevel::Low);
  std::uint32_t high_left = a.capacity(CompressionLevel::High);
  std::uint32_t placed = 0;
  auto take = [&](std::uint32_t& want, std::uint32_t& room) {
    auto n = std::min(want, room);
    want -= n;
    room -= n;
    placed += n;
  };
  auto unc = c.uncompressed, low = c.low, high = c.high;
  take(unc, unc_left);
  take(low, low_left);
  take(low, unc_left);
  take(high, high_left);
  take(high, low_left);
  take(high, unc_left);
  return placed;
}

bool fits(const LevelCounts& classified, const LevelAllocation& alloc) {
  return max_packable(classified, alloc) == classified.total();
}

std::optional<CompressionLevel> placement(CompressionLevel classified, const LevelCounts& stored,
                                          const LevelAllocation& alloc) {
  for (int l = static_cast<int>(classified); l <= static_cast<int>(CompressionLevel::Uncompressed); ++l) {
    auto level = static_cast<CompressionLevel>(l);
    if (stored.at(level) < alloc.capacity(level)) return level;
  }
  return std::nullopt;
}

bool convert_free_slot(CompressionLevel classified, const LevelCounts& stored, LevelAllocation& alloc) {
  for (int l = 0; l < static_cast<int>(classified); ++l) {
    auto level = static_cast<CompressionLevel>(l);
    if (alloc.slots(level) == 0) continue;
    if (stored.at(level) + blocks_per_slot(level) > alloc.capacity(level)) continue;
    --alloc.slots(level);
    ++alloc.slots(classified);
    return true;
  }
  return false;
}

EpochDecision epoch_update(EpochCounters& counters, const LevelAllocation& current,
                           const LevelCounts& resident_by_class) {
  EpochDecision d;
  const auto& obs = counters.observed;
  const std::uint64_t sum = obs.total();
  const std::uint32_t slots = current.total_slots();
  if (sum < slots) {
    // Too few samples to place every slot; keep counting into the next epoch.
    d.allocation = current;
    d.evictions_required = resident_by_class.total() - max_packable(resident_by_class, current);
    return d;
  }
  {
    std::array<std::uint64_t, 3> count{obs.high, obs.low, obs.uncompressed};
    std::array<std::uint32_t, 3> give{};
    std::array<std::uint64_t, 3> rem{};
    std::uint32_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
      std::uint64_t q = count[i] * slots;
      give[i] = static_cast<std::uint32_t>(q / sum);
      rem[i] = q % sum;
      assigned += give[i];
    }
    // Leftover slots go to the largest remainders; ties favor the less
    // compressed level, which can hold any block.
    std::array<int, 3> order{2, 1, 0};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int k = 0; assigned < slots; ++k, ++assigned) ++give[order[k % 3]];
    d.allocation = LevelAllocation{give[0], give[1], give[2]};
  }
  d.evictions_required = resident_by_class.total() - max_packable(resident_by_class, d.allocation);
  counters.reset();
  return d;
}

}  // namespace morpheus
