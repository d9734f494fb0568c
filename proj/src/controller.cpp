#include "morpheus/controller.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morpheus/errors.hpp"

namespace morpheus {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  return x ^ (x >> 33);
}

std::uint64_t total_ext_sets(const ControllerConfig& cfg) {
  return std::uint64_t{cfg.ext.warps_used()} * cfg.ext.cache_mode_sms.size();
}

std::uint32_t owned_rows(const ControllerConfig& cfg, std::uint32_t p) {
  const auto total = total_ext_sets(cfg);
  if (total <= p) return 0;
  return static_cast<std::uint32_t>((total - p + cfg.partitions - 1) / cfg.partitions);
}

struct SetPlan {
  Backing backing;
  SetOwner owner;
  std::uint32_t slots;
};

// Global set s = row * P + p; consecutive global sets fill one SM's warps
// before moving to the next cache-mode SM.
SetPlan plan_set(const ControllerConfig& cfg, std::uint32_t p, std::uint32_t row) {
  const std::uint64_t s = std::uint64_t{row} * cfg.partitions + p;
  const auto warps = cfg.ext.warps_used();
  SetOwner owner{cfg.ext.cache_mode_sms[s / warps], static_cast<std::uint32_t>(s % warps)};
  if (owner.warp < cfg.ext.rf_warps) return {Backing::RegisterFile, owner, rf_blocks_per_set(cfg.ext)};
  return {Backing::L1, owner, l1_blocks_per_set(cfg.ext)};
}

}  // namespace

std::string_view route_name(Route r) {
  switch (r) {
    case Route::ToConventional: return "conventional";
    case Route::ToExtendedPredictedHit: return "extended_predicted_hit";
    case Route::ToDramPredictedMiss: return "dram_predicted_miss";
  }
  return "?";
}

std::string_view predictor_mode_name(PredictorMode m) {
  switch (m) {
    case PredictorMode::Bloom: return "bloom";
    case PredictorMode::Off: return "off";
    case PredictorMode::Perfect: return "perfect";
  }
  return "?";
}

std::optional<PredictorMode> parse_predictor_mode(std::string_view s) {
  for (auto m : {PredictorMode::Bloom, PredictorMode::Off, PredictorMode::Perfect})
    if (predictor_mode_name(m) == s) return m;
  return std::nullopt;
}

std::string_view set_hash_name(SetHash h) { return h == SetHash::Identity ? "identity" : "mixed"; }

std::optional<SetHash> parse_set_hash(std::string_view s) {
  if (s == "identity") return SetHash::Identity;
  if (s == "mixed") return SetHash::Mixed;
  return std::nullopt;
}

CacheGeometry ControllerConfig::partition_geometry() const {
  return CacheGeometry{conventional_bytes / std::max<std::uint32_t>(partitions, 1), conventional_ways, kBlockBytes};
}

void ControllerConfig::validate() const {
  if (partitions == 0) throw ConfigError("partitions must be positive");
  if (conventional_ways == 0) throw ConfigError("conventional_ways must be positive");
  if (conventional_bytes == 0 ||
      conventional_bytes % (std::uint64_t{partitions} * conventional_ways * kBlockBytes) != 0)
    throw ConfigError("conventional LLC size " + std::to_string(conventional_bytes) +
                      " B must split evenly into partitions x ways x 128 B sets");
  ext.validate();
  if (warp_status_rows == 0 || warp_status_rows > kWarpStatusRows)
    throw ConfigError("warp_status_rows must be in 1.." + std::to_string(kWarpStatusRows));
  const auto rows = owned_rows(*this, 0);
  if (rows > warp_status_rows)
    throw ConfigError("each partition would own " + std::to_string(rows) + " extended sets but the warp status table has " +
                      std::to_string(warp_status_rows) + " rows");
  if (bloom_bits == 0 || bloom_hashes == 0) throw ConfigError("bloom_bits and bloom_hashes must be positive");
  if (request_queue_entries == 0) throw ConfigError("request_queue_entries must be positive");
}

AddressSeparator::AddressSeparator(std::uint32_t partitions, std::uint64_t conv_sets, std::uint32_t conv_ways,
                                   std::vector<std::uint64_t> ext_blocks, std::vector<std::uint32_t> rows,
                                   SetHash hash)
    : partitions_(partitions), conv_sets_(conv_sets), rows_(std::move(rows)), hash_(hash) {
  if (partitions_ == 0 || conv_sets_ == 0 || conv_ways == 0) throw ConfigError("separator geometry must be positive");
  if (ext_blocks.size() != partitions_ || rows_.size() != partitions_)
    throw ConfigError("separator needs one extended capacity per partition");
  ext_share_.resize(partitions_);
  for (std::uint32_t p = 0; p < partitions_; ++p) {
    const double sets = static_cast<double>(ext_blocks[p]) / conv_ways;
    ext_share_[p] = rows_[p] == 0 ? 0 : static_cast<std::uint64_t>(std::llround(sets));
  }
}

std::uint32_t AddressSeparator::partition_of(std::uint64_t address) const {
  return static_cast<std::uint32_t>(block_number(address) % partitions_);
}

DecodedAddress AddressSeparator::decode(std::uint64_t address) const {
  DecodedAddress d;
  d.block = block_number(address);
  d.partition = static_cast<std::uint32_t>(d.block % partitions_);
  d.local_block = d.block / partitions_;
  const auto share = ext_share_[d.partition];
  if (share == 0) return d;
  const auto group = d.local_block / conv_sets_;
  const auto period = conv_sets_ + share;
  const auto slot = group % period;
  // Spread the extended groups evenly over the period.
  const auto before = slot * share / period;
  if ((slot + 1) * share / period == before) return d;
  d.extended = true;
  d.ext_block = ((group / period) * share + before) * conv_sets_ + d.local_block % conv_sets_;
  const auto key = hash_ == SetHash::Identity ? d.ext_block : mix(d.ext_block);
  d.row = static_cast<std::uint32_t>(key % rows_[d.partition]);
  return d;
}

std::uint32_t AddressSeparator::set_index(std::uint64_t address) const {
  auto d = decode(address);
  if (!d.extended) throw OutOfPartition("address maps to the conventional set range");
  return d.row;
}

AddressSeparator make_separator(const ControllerConfig& cfg) {
  cfg.validate();
  std::vector<std::uint64_t> blocks(cfg.partitions, 0);
  std::vector<std::uint32_t> rows(cfg.partitions, 0);
  for (std::uint32_t p = 0; p < cfg.partitions; ++p) {
    rows[p] = owned_rows(cfg, p);
    for (std::uint32_t r = 0; r < rows[p]; ++r) blocks[p] += plan_set(cfg, p, r).slots;
  }
  return AddressSeparator(cfg.partitions, cfg.partition_geometry().set_count(), cfg.conventional_ways,
                          std::move(blocks), std::move(rows), cfg.set_hash);
}

QueryLogicUnit::QueryLogicUnit(std::uint32_t rows, std::uint32_t queue_entries)
    : table_(rows), queues_(rows), capacity_(queue_entries) {
  for (std::uint32_t r = 0; r < rows; ++r) table_[r].data_ptr = r;
}

void QueryLogicUnit::enqueue(std::uint32_t row, const QueuedRequest& q) {
  if (depth_ >= capacity_) ++overflow_stalls_;
  queues_.at(row).push_back(q);
  ++depth_;
  max_depth_ = std::max(max_depth_, depth_);
}

std::optional<QueuedRequest> QueryLogicUnit::dispatch(std::uint32_t row) {
  auto& r = table_.at(row);
  auto& q = queues_[row];
  if (r.busy || q.empty()) return std::nullopt;
  auto head = q.front();
  q.pop_front();
  --depth_;
  r.busy = true;
  r.tag = head.block;
  r.origin_sm = head.origin_sm;
  r.request_id = head.request_id;
  r.op = head.op;
  r.fill = head.fill;
  r.result = RowResult::Pending;
  return head;
}

void QueryLogicUnit::complete(std::uint32_t row, bool hit) {
  auto& r = table_.at(row);
  if (!r.busy) throw InvariantViolation("completing an idle warp status row");
  r.busy = false;
  r.result = hit ? RowResult::Hit : RowResult::Miss;
}

std::uint32_t QueryLogicUnit::busy_rows() const {
  return static_cast<std::uint32_t>(std::count_if(table_.begin(), table_.end(), [](auto& r) { return r.busy; }));
}

PartitionController::PartitionController(std::uint32_t partition, const ControllerConfig& cfg,
                                         const AddressSeparator& sep)
    : partition_(partition), mode_(cfg.predictor), sep_(sep), conv_(cfg.partition_geometry()) {
  const auto rows = sep_.rows(partition);
  sets_.reserve(rows);
  for (std::uint32_t r = 0; r < rows; ++r) {
    auto plan = plan_set(cfg, partition, r);
    sets_.emplace_back(plan.backing, plan.owner, plan.slots, cfg.ext.compression);
  }
  predictors_.assign(rows, PredictorSet(cfg.bloom_bits, cfg.bloom_hashes));
  qlu_ = QueryLogicUnit(rows, cfg.request_queue_entries);
}

RouteDecision PartitionController::route(const MemoryRequest& r) const {
  RouteDecision d;
  d.where = sep_.decode(r.address);
  if (d.where.partition != partition_) throw OutOfPartition("request routed to the wrong partition");
  if (!d.where.extended) return d;
  const auto& set = sets_[d.where.row];
  d.resident = set.contains(d.where.block);
  switch (mode_) {
    case PredictorMode::Bloom: d.prediction = predictors_[d.where.row].predict(d.where.block); break;
    case PredictorMode::Off: d.prediction = Prediction::PredictHit; break;
    case PredictorMode::Perfect: d.prediction = d.resident ? Prediction::PredictHit : Prediction::PredictMiss; break;
  }
  d.route = d.prediction == Prediction::PredictHit ? Route::ToExtendedPredictedHit : Route::ToDramPredictedMiss;
  return d;
}

ConvOutcome PartitionController::access_conventional(const MemoryRequest& r, BackingMemory& memory) {
  const auto d = sep_.decode(r.address);
  const auto kind = r.op == Op::Read ? AccessKind::Read : AccessKind::Write;
  auto res = conv_.access(d.local_block * kBlockBytes, kind);
  ConvOutcome out;
  out.hit = res.hit;
  if (res.victim && res.victim->dirty)
    out.writeback = (res.victim->block_address / kBlockBytes) * sep_.partitions() + partition_;
  auto data = memory.read(d.block);
  out.value = perform(data, r);
  if (r.op != Op::Read) memory.write(d.block, data);
  return out;
}

std::uint64_t PartitionController::handle_predicted_miss(const MemoryRequest& r, BackingMemory& memory) {
  const auto block = block_number(r.address);
  auto data = memory.read(block);
  auto value = perform(data, r);
  if (r.op != Op::Read) memory.write(block, data);
  return value;
}

ServiceOutcome PartitionController::service(std::uint32_t row, const MemoryRequest& r, BackingMemory& memory) {
  return sets_.at(row).service(r, memory, mode_ == PredictorMode::Bloom ? &predictors_[row] : nullptr);
}

FillOutcome PartitionController::fill(std::uint32_t row, std::uint64_t block, BackingMemory& memory) {
  auto& set = sets_.at(row);
  if (set.busy()) throw InvariantViolation("fill issued to a busy extended set");
  return set.fill(block, memory, mode_ == PredictorMode::Bloom ? &predictors_[row] : nullptr);
}

void PartitionController::complete(std::uint32_t row, bool hit) {
  sets_.at(row).complete();
  qlu_.complete(row, hit);
}

std::vector<EvictedBlock> PartitionController::end_epoch(BackingMemory& memory) {
  std::vector<EvictedBlock> out;
  for (auto& s : sets_) {
    if (!s.compression()) continue;
    auto ev = s.end_epoch(memory);
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

std::vector<EvictedBlock> PartitionController::end_epoch(BackingMemory& memory,
                                                        const std::vector<LevelCounts>& per_sm) {
  std::vector<EvictedBlock> out;
  for (auto& s : sets_) {
    if (!s.compression()) continue;
    auto ev = s.end_epoch(memory, per_sm.at(s.owner().sm));
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

std::uint64_t PartitionController::extended_capacity_blocks() const {
  std::uint64_t n = 0;
  for (const auto& s : sets_) n += s.allocation().total_slots();
  return n;
}

std::uint64_t PartitionController::storage_overhead_bytes() const {
  return morpheus::storage_overhead_bytes(sets_.size());
}

std::uint64_t storage_overhead_bytes(std::uint64_t extended_sets_in_partition, std::uint32_t provisioned_rows) {
  const std::uint64_t predictor = extended_sets_in_partition == 0 ? 0 : storage_bytes(provisioned_rows);
  return predictor + kQueryLogicBytes;
}

}  // namespace morpheus
