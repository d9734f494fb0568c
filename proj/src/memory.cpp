#include "morpheus/memory.hpp"

#include <algorithm>

namespace morpheus {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void fill_ramp(BlockBytes& b, std::uint32_t start, std::uint32_t step) {
  for (std::uint32_t i = 0; i < kSegments; ++i) {
    std::uint32_t v = start + i * step;
    for (std::uint32_t k = 0; k < 4; ++k) b[i * 4 + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
}

std::uint64_t load(const BlockBytes& b, std::uint32_t offset, std::uint32_t size) {
  std::uint64_t v = 0;
  for (std::uint32_t k = 0; k < std::min<std::uint32_t>(size, 8); ++k) v |= std::uint64_t{b[offset + k]} << (8 * k);
  return v;
}

void store(BlockBytes& b, std::uint32_t offset, std::uint32_t size, std::uint64_t v) {
  for (std::uint32_t k = 0; k < size; ++k) b[offset + k] = static_cast<std::uint8_t>(v >> (8 * (k % 8)));
}

std::uint64_t mask(std::uint32_t size) { return size >= 8 ? ~0ull : (1ull << (8 * size)) - 1; }

}  // namespace

std::string_view data_pattern_name(DataPattern p) {
  switch (p) {
    case DataPattern::Zero: return "zero";
    case DataPattern::Ramp: return "ramp";
    case DataPattern::Random: return "random";
    case DataPattern::Mixed: return "mixed";
  }
  return "?";
}

std::optional<DataPattern> parse_data_pattern(std::string_view s) {
  for (auto p : {DataPattern::Zero, DataPattern::Ramp, DataPattern::Random, DataPattern::Mixed})
    if (data_pattern_name(p) == s) return p;
  return std::nullopt;
}

BlockBytes BackingMemory::initial(std::uint64_t block) const {
  BlockBytes b{};
  auto kind = pattern_;
  std::uint64_t h = mix(block ^ mix(seed_));
  int variant = 0;
  if (kind == DataPattern::Mixed) variant = static_cast<int>(h % 4);
  else if (kind == DataPattern::Zero) variant = 0;
  else if (kind == DataPattern::Ramp) variant = 1;
  else variant = 3;
  switch (variant) {
    case 0: break;
    case 1: fill_ramp(b, static_cast<std::uint32_t>(block * kSegments), 1); break;
    case 2: fill_ramp(b, static_cast<std::uint32_t>(h), 1000); break;
    default:
      for (std::uint32_t i = 0; i < 16; ++i) {
        std::uint64_t r = mix(h + i);
        for (std::uint32_t k = 0; k < 8; ++k) b[i * 8 + k] = static_cast<std::uint8_t>(r >> (8 * k));
      }
  }
  return b;
}

BlockBytes BackingMemory::read(std::uint64_t block) const {
  auto it = blocks_.find(block);
  return it != blocks_.end() ? it->second : initial(block);
}

std::uint64_t perform(BlockBytes& data, const MemoryRequest& r) {
  const auto offset = static_cast<std::uint32_t>(r.address % kBlockBytes);
  const auto m = mask(r.size);
  switch (r.op) {
    case Op::Read: return load(data, offset, r.size);
    case Op::Write: {
      std::uint64_t v = r.operand_count ? r.operands[0] : r.id;
      store(data, offset, r.size, v);
      return v;
    }
    case Op::AtomicAdd: {
      auto old = load(data, offset, r.size);
      store(data, offset, r.size, (old + r.operands[0]) & m);
      return old;
    }
    case Op::AtomicExch: {
      auto old = load(data, offset, r.size);
      store(data, offset, r.size, r.operands[0] & m);
      return old;
    }
    case Op::AtomicCAS: {
      auto old = load(data, offset, r.size);
      if (old == (r.operands[0] & m)) store(data, offset, r.size, r.operands[1] & m);
      return old;
    }
  }
  return 0;
}

}  // namespace morpheus
