#include "morpheus/cache_core.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "morpheus/errors.hpp"

namespace morpheus {

void CacheGeometry::validate() const {
  if (total_bytes == 0 || ways == 0 || block_bytes == 0)
    throw ConfigError("cache geometry fields must be positive");
  if (total_bytes % (std::uint64_t{ways} * block_bytes) != 0)
    throw ConfigError("cache capacity " + std::to_string(total_bytes) + " B is not divisible by ways x block_bytes");
}

CacheSet::CacheSet(std::uint32_t ways, TieBreak tie) : meta_(ways), stamp_(ways, 0), tie_(tie) {}

std::uint32_t CacheSet::occupancy() const {
  return static_cast<std::uint32_t>(std::count_if(meta_.begin(), meta_.end(), [](const auto& m) { return m.valid; }));
}

std::optional<std::uint32_t> CacheSet::find(std::uint64_t tag) const {
  for (std::uint32_t w = 0; w < ways(); ++w)
    if (meta_[w].valid && meta_[w].tag == tag) return w;
  return std::nullopt;
}

void CacheSet::touch(std::uint32_t way) {
  for (std::uint32_t w = 0; w < ways(); ++w) {
    auto& m = meta_[w];
    if (!m.valid) continue;
    if (w == way)
      m.lru_counter = kLruMax;
    else if (m.lru_counter > 0)
      --m.lru_counter;
  }
  stamp_[way] = ++clock_;
}

bool CacheSet::older(std::uint32_t a, std::uint32_t b) const {
  if (meta_[a].lru_counter != meta_[b].lru_counter) return meta_[a].lru_counter < meta_[b].lru_counter;
  if (tie_ == TieBreak::OldestTouch && stamp_[a] != stamp_[b]) return stamp_[a] < stamp_[b];
  return a < b;
}

std::optional<std::uint32_t> CacheSet::lru_way(std::optional<std::uint32_t> skip) const {
  std::optional<std::uint32_t> best;
  for (std::uint32_t w = 0; w < ways(); ++w) {
    if (!meta_[w].valid || skip == w) continue;
    if (!best || older(w, *best)) best = w;
  }
  return best;
}

std::uint32_t CacheSet::victim_way() const {
  for (std::uint32_t w = 0; w < ways(); ++w)
    if (!meta_[w].valid) return w;
  return *lru_way();
}

std::optional<CacheBlockMeta> CacheSet::install(std::uint32_t way, std::uint64_t tag, bool dirty) {
  std::optional<CacheBlockMeta> old;
  if (meta_[way].valid) old = meta_[way];
  meta_[way] = CacheBlockMeta{tag, true, dirty, kLruMax};
  touch(way);
  return old;
}

CacheBlockMeta CacheSet::invalidate(std::uint32_t way) {
  auto old = meta_[way];
  meta_[way] = CacheBlockMeta{};
  stamp_[way] = 0;
  return old;
}

AccessResult CacheSet::access(std::uint64_t tag, AccessKind kind) {
  AccessResult r;
  if (auto w = find(tag)) {
    r.hit = true;
    r.way = *w;
    touch(*w);
    if (kind == AccessKind::Write) meta_[*w].dirty = true;
    return r;
  }
  r.way = victim_way();
  if (auto old = install(r.way, tag, kind == AccessKind::Write)) r.victim = Evicted{old->tag, old->dirty};
  return r;
}

std::vector<Evicted> CacheSet::resize_ways(std::uint32_t new_ways) {
  std::vector<Evicted> evicted;
  while (occupancy() > new_ways) {
    auto w = *lru_way();
    auto old = invalidate(w);
    evicted.push_back(Evicted{old.tag, old.dirty});
  }
  // Compact survivors into the low ways, preserving their relative order.
  std::vector<CacheBlockMeta> meta;
  std::vector<std::uint64_t> stamp;
  meta.reserve(new_ways);
  stamp.reserve(new_ways);
  for (std::uint32_t w = 0; w < ways(); ++w) {
    if (meta_[w].valid) {
      meta.push_back(meta_[w]);
      stamp.push_back(stamp_[w]);
    }
  }
  meta.resize(new_ways);
  stamp.resize(new_ways, 0);
  meta_ = std::move(meta);
  stamp_ = std::move(stamp);
  return evicted;
}

Cache::Cache(const CacheGeometry& geometry, TieBreak tie) : geometry_(geometry) {
  geometry_.validate();
  sets_.assign(geometry_.set_count(), CacheSet(geometry_.ways, tie));
}

std::uint64_t Cache::set_of(std::uint64_t block_address) const {
  return (block_address / geometry_.block_bytes) % sets_.size();
}

AccessResult Cache::access(std::uint64_t block_address, AccessKind kind) {
  auto tag = block_address / geometry_.block_bytes;
  auto r = sets_[tag % sets_.size()].access(tag, kind);
  if (r.victim) r.victim->block_address *= geometry_.block_bytes;
  return r;
}

Cache::PeekResult Cache::peek(std::uint64_t block_address) const {
  auto tag = block_address / geometry_.block_bytes;
  const auto& s = sets_[tag % sets_.size()];
  if (auto w = s.find(tag)) return {true, s.meta(*w).dirty};
  return {};
}

std::vector<Evicted> Cache::resize_ways(std::uint64_t set_index, std::uint32_t new_ways) {
  auto ev = sets_[set_index].resize_ways(new_ways);
  for (auto& e : ev) e.block_address *= geometry_.block_bytes;
  return ev;
}

}  // namespace morpheus
