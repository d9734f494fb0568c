#include "morpheus/extended_llc.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "morpheus/errors.hpp"

namespace morpheus {

std::string_view backing_name(Backing b) {
  switch (b) {
    case Backing::RegisterFile: return "register_file";
    case Backing::L1: return "l1";
    case Backing::SharedMemory: return "shared_memory";
  }
  return "?";
}

void ExtLlcConfig::validate() const {
  if (block_bytes != 128) throw ConfigError("block_bytes must be 128");
  if (total_sms == 0) throw ConfigError("total SM count must be positive");
  if (warps_per_sm == 0) throw ConfigError("warps_per_sm must be positive");
  if (rf_warps + l1_warps > warps_per_sm)
    throw ConfigError("rf_warps + l1_warps (" + std::to_string(rf_warps + l1_warps) + ") exceeds warps_per_sm (" +
                      std::to_string(warps_per_sm) + ")");
  const std::uint32_t limit = total_sms * 3 / 4;
  if (cache_mode_sms.size() > limit)
    throw ConfigError("cache-mode SMs (" + std::to_string(cache_mode_sms.size()) + ") exceed 75% of the " +
                      std::to_string(total_sms) + " SMs; at most " + std::to_string(limit) +
                      " SMs may run in cache mode");
  std::set<std::uint32_t> seen;
  for (auto sm : cache_mode_sms) {
    if (sm >= total_sms) throw ConfigError("cache-mode SM id " + std::to_string(sm) + " out of range");
    if (!seen.insert(sm).second) throw ConfigError("cache-mode SM id " + std::to_string(sm) + " listed twice");
  }
  if (!cache_mode_sms.empty() && warps_used() == 0) throw ConfigError("cache-mode SMs need at least one helper warp");
  if (aux_reservation.empty()) throw ConfigError("auxiliary register reservation table is empty");
  if (rf_warps > 0 && rf_blocks_per_set(*this) == 0)
    throw ConfigError("register-file sets would hold zero blocks with " + std::to_string(rf_warps) + " warps");
  if (l1_warps > 0 && l1_blocks_per_set(*this) == 0)
    throw ConfigError("L1 sets would hold zero blocks with " + std::to_string(l1_warps) + " warps");
}

std::uint32_t reserved_registers(const ExtLlcConfig& cfg, std::uint32_t warps) {
  auto table = cfg.aux_reservation;
  std::sort(table.begin(), table.end());
  if (warps <= table.front().first) return table.front().second;
  if (warps >= table.back().first) return table.back().second;
  for (std::size_t i = 1; i < table.size(); ++i) {
    auto [w1, r1] = table[i];
    if (warps > w1) continue;
    auto [w0, r0] = table[i - 1];
    double t = static_cast<double>(warps - w0) / static_cast<double>(w1 - w0);
    return static_cast<std::uint32_t>(std::lround(r0 + t * (static_cast<double>(r1) - r0)));
  }
  return table.back().second;
}

std::uint32_t rf_blocks_per_set(const ExtLlcConfig& cfg) {
  if (cfg.rf_warps == 0) return 0;
  if (cfg.blocks_per_rf_set) return *cfg.blocks_per_rf_set;
  const std::uint64_t warp_registers = cfg.rf_bytes_per_sm / cfg.block_bytes;
  const auto per_warp =
      static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg.max_registers_per_thread, warp_registers / cfg.rf_warps));
  const auto reserved = reserved_registers(cfg, cfg.rf_warps);
  return per_warp > reserved ? per_warp - reserved : 0;
}

std::uint32_t l1_blocks_per_set(const ExtLlcConfig& cfg) {
  if (cfg.l1_warps == 0) return 0;
  return static_cast<std::uint32_t>(cfg.l1_bytes_per_sm / (std::uint64_t{cfg.l1_warps} * cfg.block_bytes));
}

ExtCapacity capacity_bytes(const ExtLlcConfig& cfg) {
  cfg.validate();
  ExtCapacity c;
  c.rf_blocks_per_set = rf_blocks_per_set(cfg);
  c.l1_blocks_per_set = l1_blocks_per_set(cfg);
  c.rf_bytes_per_sm = std::uint64_t{cfg.rf_warps} * c.rf_blocks_per_set * cfg.block_bytes;
  c.l1_bytes_per_sm = std::uint64_t{cfg.l1_warps} * c.l1_blocks_per_set * cfg.block_bytes;
  c.bytes_per_sm = c.rf_bytes_per_sm + c.l1_bytes_per_sm;
  c.total_bytes = c.bytes_per_sm * cfg.cache_mode_sms.size();
  c.sets_per_sm = cfg.warps_used();
  c.total_sets = c.sets_per_sm * cfg.cache_mode_sms.size();
  return c;
}

std::optional<EvictedBlock> ServiceOutcome::writeback() const {
  for (const auto& e : evictions)
    if (e.dirty) return e;
  return std::nullopt;
}

std::uint32_t ServiceOutcome::dirty_evictions() const {
  return static_cast<std::uint32_t>(std::count_if(evictions.begin(), evictions.end(), [](auto& e) { return e.dirty; }));
}

ExtendedSet::ExtendedSet(Backing backing, SetOwner owner, std::uint32_t slots, bool compression)
    : backing_(backing),
      owner_(owner),
      compression_(compression && backing == Backing::RegisterFile),
      alloc_(LevelAllocation::all_uncompressed(slots)),
      meta_(compression_ ? 4 * slots : slots, TieBreak::OldestTouch),
      data_(meta_.ways()) {
  if (backing == Backing::SharedMemory) throw ConfigError("shared-memory backing is folded into L1 and not modeled");
}

std::uint32_t ExtendedSet::associativity() const { return alloc_.effective_capacity(); }

BlockBytes ExtendedSet::read_way(std::uint32_t way) const { return decompress(data_[way].stored); }

std::optional<BlockBytes> ExtendedSet::peek_data(std::uint64_t block) const {
  if (auto w = meta_.find(block)) return read_way(*w);
  return std::nullopt;
}

bool ExtendedSet::is_dirty(std::uint64_t block) const {
  auto w = meta_.find(block);
  return w && meta_.meta(*w).dirty;
}

LookupResult ExtendedSet::tag_lookup(std::uint64_t tag) {
  if (auto w = meta_.find(tag)) {
    meta_.touch(*w);
    return {true, *w};
  }
  return {};
}

void ExtendedSet::release_storage(std::uint32_t way) {
  auto& d = data_[way];
  if (d.stored.payload.empty()) return;
  --stored_.at(d.stored.level);
  --classified_.at(d.classified);
  d.stored.payload.clear();
}

void ExtendedSet::evict_way(std::uint32_t way, BackingMemory& memory, std::vector<EvictedBlock>& out) {
  const auto m = meta_.meta(way);
  if (m.dirty) memory.write(m.tag, read_way(way));
  release_storage(way);
  meta_.invalidate(way);
  out.push_back(EvictedBlock{m.tag, m.dirty});
}

void ExtendedSet::store_way(std::uint32_t way, const BlockBytes& data, BackingMemory& memory,
                            std::vector<EvictedBlock>& out) {
  release_storage(way);
  const auto cls = compression_ ? classify(data) : CompressionLevel::Uncompressed;
  auto level = placement(cls, stored_, alloc_);
  while (!level) {
    // Reuse free space of another level before evicting anything.
    if (convert_free_slot(cls, stored_, alloc_)) {
      level = placement(cls, stored_, alloc_);
      continue;
    }
    auto victim = meta_.lru_way(way);
    if (!victim) throw InvariantViolation("extended set has no room for a single block");
    evict_way(*victim, memory, out);
    level = placement(cls, stored_, alloc_);
  }
  data_[way].stored = encode_at(data, *level);
  data_[way].classified = cls;
  ++stored_.at(*level);
  ++classified_.at(cls);
  if (compression_) epoch_.observe(cls);
}

std::uint32_t ExtendedSet::insert(std::uint64_t block, const BlockBytes& data, bool dirty, BackingMemory& memory,
                                  std::vector<EvictedBlock>& out) {
  if (meta_.occupancy() == meta_.ways()) evict_way(*meta_.lru_way(), memory, out);
  const auto way = meta_.victim_way();
  meta_.install(way, block, dirty);
  store_way(way, data, memory, out);
  return way;
}

ServiceOutcome ExtendedSet::service(const MemoryRequest& request, BackingMemory& memory, PredictorSet* predictor) {
  if (busy_) throw InvariantViolation("extended set received a second request while busy");
  busy_ = true;

  ServiceOutcome out;
  const auto tag = block_number(request.address);
  const auto look = tag_lookup(tag);
  out.hit = look.hit;
  if (look.hit) {
    out.data = read_way(look.block_index);
    out.value = perform(out.data, request);
    if (request.op != Op::Read) {
      meta_.mark_dirty(look.block_index);
      store_way(look.block_index, out.data, memory, out.evictions);
    } else if (compression_) {
      epoch_.observe(data_[look.block_index].classified);
    }
  } else {
    // Helper-kernel fetches bypass the conventional LLC.
    out.data = memory.read(tag);
    out.value = perform(out.data, request);
    insert(tag, out.data, request.op != Op::Read, memory, out.evictions);
  }
  if (is_atomic(request.op))
    out.kind = ServiceOutcome::Kind::AtomicResult;
  else
    out.kind = out.hit ? ServiceOutcome::Kind::HitData : ServiceOutcome::Kind::MissFilled;
  if (predictor) predictor->record_access(tag, associativity());
  return out;
}

FillOutcome ExtendedSet::fill(std::uint64_t block, BackingMemory& memory, PredictorSet* predictor) {
  FillOutcome out;
  if (auto w = meta_.find(block)) {
    meta_.touch(*w);
    if (compression_) epoch_.observe(data_[*w].classified);
  } else {
    insert(block, memory.read(block), false, memory, out.evictions);
    out.inserted = true;
  }
  if (predictor) predictor->record_access(block, associativity());
  return out;
}

std::vector<EvictedBlock> ExtendedSet::reallocate(const LevelAllocation& next, BackingMemory& memory) {
  if (next.total_slots() != alloc_.total_slots())
    throw InvariantViolation("reallocation changed the slot total of an extended set");
  std::vector<EvictedBlock> out;
  alloc_ = next;
  // Evict from the class that overflows, least compressible first, LRU
  // within that class.
  while (!fits(classified_, alloc_)) {
    const auto shortfall = [&](const LevelCounts& c) { return c.total() - max_packable(c, alloc_); };
    const auto now = shortfall(classified_);
    std::optional<CompressionLevel> cls;
    for (auto c : {CompressionLevel::Uncompressed, CompressionLevel::Low, CompressionLevel::High}) {
      if (classified_.at(c) == 0) continue;
      auto fewer = classified_;
      --fewer.at(c);
      if (shortfall(fewer) < now) {
        cls = c;
        break;
      }
    }
    std::optional<std::uint32_t> victim;
    for (std::uint32_t w = 0; w < meta_.ways(); ++w) {
      if (!meta_.meta(w).valid || (cls && data_[w].classified != *cls)) continue;
      if (!victim || meta_.older(w, *victim)) victim = w;
    }
    if (!victim) throw InvariantViolation("reallocation found no block to evict");
    evict_way(*victim, memory, out);
  }

  // Re-pack the survivors, most constrained first.
  std::vector<std::pair<std::uint32_t, BlockBytes>> blocks;
  for (std::uint32_t w = 0; w < meta_.ways(); ++w)
    if (meta_.meta(w).valid) blocks.emplace_back(w, read_way(w));
  stored_ = {};
  for (int cls = static_cast<int>(CompressionLevel::Uncompressed); cls >= 0; --cls) {
    for (auto& [w, bytes] : blocks) {
      if (static_cast<int>(data_[w].classified) != cls) continue;
      auto level = placement(data_[w].classified, stored_, alloc_);
      if (!level) throw InvariantViolation("re-pack failed after a feasible reallocation");
      data_[w].stored = encode_at(bytes, *level);
      ++stored_.at(*level);
    }
  }
  return out;
}

std::vector<EvictedBlock> ExtendedSet::end_epoch(BackingMemory& memory) {
  if (!compression_) {
    epoch_.reset();
    return {};
  }
  auto decision = epoch_update(epoch_, alloc_, classified_);
  return reallocate(decision.allocation, memory);
}

std::vector<EvictedBlock> ExtendedSet::end_epoch(BackingMemory& memory, const LevelCounts& pooled) {
  // The pool is rebuilt from per-set counters each epoch, so a short sample
  // leaves them untouched.
  if (compression_ && pooled.total() < alloc_.total_slots()) return {};
  epoch_.observed = pooled;
  return end_epoch(memory);
}

}  // namespace morpheus
