#include "morpheus/timing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <string>

#include "morpheus/errors.hpp"

namespace morpheus {

std::string_view indirect_mov_name(IndirectMov m) { return m == IndirectMov::Native ? "native" : "software"; }

std::optional<IndirectMov> parse_indirect_mov(std::string_view s) {
  if (s == "native") return IndirectMov::Native;
  if (s == "software") return IndirectMov::Software;
  return std::nullopt;
}

void LatencyEnergyConfig::validate() const {
  const std::pair<const char*, double> positive[] = {
      {"conv_hit_ns", conv_hit_ns},
      {"conv_miss_ns", conv_miss_ns},
      {"ext_hit_ns", ext_hit_ns},
      {"ext_miss_ns", ext_miss_ns},
      {"predicted_miss_ns", predicted_miss_ns},
      {"per_warp_service_occupancy_ns", per_warp_service_occupancy_ns},
      {"conv_partition_bytes_per_s", conv_partition_bytes_per_s},
      {"dram_bytes_per_s", dram_bytes_per_s},
      {"conv_pj_per_byte", conv_pj_per_byte},
      {"ext_pj_per_byte", ext_pj_per_byte},
      {"dram_pj_per_byte", dram_pj_per_byte},
  };
  for (auto [name, v] : positive)
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  if (!(indirect_mov_penalty_ns >= 0)) throw ConfigError("indirect_mov_penalty_ns must not be negative");
}

std::int64_t ns_to_ps(double ns) { return static_cast<std::int64_t>(std::llround(ns * 1000.0)); }

std::int64_t transfer_ps(std::uint64_t bytes, double bytes_per_s) {
  return static_cast<std::int64_t>(std::ceil(static_cast<long double>(bytes) * 1e12L / bytes_per_s - 1e-9L));
}

std::int64_t occupancy_delay(Resource& r, std::uint64_t bytes, std::int64_t now_ps) {
  if (bytes == 0) throw InvariantViolation("occupancy_delay needs a positive byte count");
  const auto start = std::max(now_ps, r.busy_until_ps);
  r.busy_until_ps = start + (r.kind == ResourceKind::ExtWarp ? r.service_ps : transfer_ps(bytes, r.bytes_per_s));
  r.bytes_served += bytes;
  return start;
}

EnergyReport energy_report(const RawCounters& c, const LatencyEnergyConfig& cfg) {
  return compute_energy(c.conv_bytes, c.ext_bytes, c.dram_bytes, cfg.conv_pj_per_byte, cfg.ext_pj_per_byte,
                        cfg.dram_pj_per_byte);
}

void SimConfig::validate() const {
  controller.validate();
  timing.validate();
  if (!(core_clock_mhz > 0)) throw ConfigError("core_clock_mhz must be positive");
  if (epoch_cycles == 0) throw ConfigError("epoch_cycles must be positive");
}

std::int64_t cycles_to_ps(std::uint64_t cycles, double mhz) {
  return static_cast<std::int64_t>(std::llround(static_cast<long double>(cycles) * 1e6L / mhz));
}

KeyValues model_notes(const SimConfig& cfg) {
  return {
      {"bloom_hash_family", std::string(kBloomHashFamily)},
      {"address_interleave",
       "partition = block mod partitions; inside a partition, groups of conventional_sets consecutive blocks form "
       "periods of conventional_sets + ext_share groups, where ext_share = round(extended blocks / conventional "
       "ways); group r of a period is extended iff floor((r+1)*ext_share/period) > floor(r*ext_share/period)"},
      {"extended_set_row",
       std::string("row = ") + (cfg.controller.set_hash == SetHash::Identity ? "extended block" : "fmix64(extended block)") +
           " mod owned sets; global set s belongs to partition s mod partitions"},
      {"latency_model",
       "end-to-end class latencies added after resource occupancy: conventional hit, conventional miss and predicted "
       "miss after DRAM, forwarded extended miss after DRAM, extended hit after warp start"},
      {"occupancy_model",
       "conventional partitions and per-partition DRAM channels serialize 128 B transfers at their byte rate; each "
       "helper warp is busy for per_warp_service_occupancy_ns per service"},
      {"replacement",
       "12-bit counters; extended sets break saturated ties by exact recency and always evict the global LRU block"},
      {"compression_slots",
       "every access to a register-file set counts the level of its block; each epoch the sets re-apportion slots "
       "by largest remainder over the counts pooled across the sets of their SM, once the pool holds at least one "
       "count per slot, evicting LRU blocks of the overflowing level; a block with no compatible free slot first "
       "converts a fully free slot of a more compressed level, then evicts the global LRU block; L1 sets stay "
       "uncompressed"},
  };
}

namespace {

constexpr std::uint64_t kBlock = kBlockBytes;

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time_ps != b.time_ps) return a.time_ps > b.time_ps;
    if (a.resource != b.resource) return a.resource > b.resource;
    if (a.request != b.request) return a.request > b.request;
    return a.seq > b.seq;
  }
};

std::string hex_hash(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

struct Simulator::Impl {
  SimConfig cfg;
  Observer observer;
  AddressSeparator sep;
  std::vector<PartitionController> parts;
  BackingMemory memory;
  std::vector<Resource> conv;
  std::vector<Resource> dram;
  std::vector<std::vector<Resource>> warps;  // [partition][row]
  std::priority_queue<Event, std::vector<Event>, EventAfter> events;
  std::uint64_t seq = 0;
  std::uint64_t live = 0;  // queued events other than epochs
  RawCounters raw;
  const Trace* trace = nullptr;
  std::vector<std::int64_t> issue;
  std::vector<std::int64_t> completion;
  std::vector<LatencyClass> classes;
  bool ran = false;

  std::int64_t hit_ps, miss_ps, ext_hit_ps, ext_miss_ps, pred_miss_ps, penalty_ps, warp_ps, epoch_ps;

  explicit Impl(SimConfig c) : cfg(std::move(c)), memory(cfg.dram_init, cfg.seed) {
    cfg.validate();
    sep = make_separator(cfg.controller);
    const auto P = cfg.controller.partitions;
    const auto& t = cfg.timing;
    for (std::uint32_t p = 0; p < P; ++p) {
      parts.emplace_back(p, cfg.controller, sep);
      conv.push_back(Resource{p, ResourceKind::ConvPartition, 0, 0, t.conv_partition_bytes_per_s, 0});
      dram.push_back(Resource{P + p, ResourceKind::DramChannel, 0, 0, t.dram_bytes_per_s / P, 0});
      std::vector<Resource> w;
      for (std::uint32_t r = 0; r < parts[p].rows(); ++r)
        w.push_back(Resource{2ull * P + std::uint64_t{r} * P + p, ResourceKind::ExtWarp, 0, 0, 0,
                             ns_to_ps(t.per_warp_service_occupancy_ns)});
      warps.push_back(std::move(w));
    }
    hit_ps = ns_to_ps(t.conv_hit_ns);
    miss_ps = ns_to_ps(t.conv_miss_ns);
    ext_hit_ps = ns_to_ps(t.ext_hit_ns);
    ext_miss_ps = ns_to_ps(t.ext_miss_ns);
    pred_miss_ps = ns_to_ps(t.predicted_miss_ns);
    penalty_ps = t.indirect_mov == IndirectMov::Software ? ns_to_ps(t.indirect_mov_penalty_ns) : 0;
    warp_ps = ns_to_ps(t.per_warp_service_occupancy_ns);
    epoch_ps = cycles_to_ps(cfg.epoch_cycles, cfg.core_clock_mhz);
  }

  void push(Event e) {
    e.seq = seq++;
    if (e.kind != EventKind::Epoch) ++live;
    events.push(e);
  }

  void observe(const Observation& o) {
    if (observer) observer(o);
  }

  std::uint64_t warp_resource(std::uint32_t p, std::uint32_t row) const { return warps[p][row].id; }

  std::int64_t dram_access(std::uint32_t p, std::int64_t now) {
    raw.dram_bytes += kBlock;
    return occupancy_delay(dram[p], kBlock, now);
  }

  void write_back(std::uint64_t block, std::int64_t now) { dram_access(sep.partition_of(block * kBlock), now); }

  void respond(const Event& cause, std::int64_t done, LatencyClass cls, std::uint64_t resource) {
    completion[cause.index] = done;
    classes[cause.index] = cls;
    Event e = cause;
    e.kind = EventKind::Respond;
    e.time_ps = done;
    e.resource = resource;
    push(e);
  }

  void on_arrive(const Event& e) {
    const auto& r = trace->requests[e.index];
    auto& ctrl = parts[e.partition];
    const auto d = ctrl.route(r);
    if (d.where.extended) {
      const bool hit = d.prediction == Prediction::PredictHit;
      if (hit && d.resident) ++raw.true_hit;
      else if (hit) ++raw.false_positive;
      else if (!d.resident) ++raw.true_miss;
      else ++raw.false_negative;
    }

    Observation o{false, r.id, d.route, e.partition, std::nullopt, false, 0, d.where.block, e.time_ps};
    switch (d.route) {
      case Route::ToConventional: {
        ++raw.routed_conventional;
        auto out = ctrl.access_conventional(r, memory);
        o.hit = out.hit;
        o.value = out.value;
        observe(o);
        raw.conv_bytes += kBlock;
        const auto start = occupancy_delay(conv[e.partition], kBlock, e.time_ps);
        if (out.hit) {
          ++raw.conv_hits;
          respond(e, start + hit_ps, LatencyClass::ConvHit, conv[e.partition].id);
        } else {
          ++raw.conv_misses;
          const auto ready = dram_access(e.partition, start);
          respond(e, ready + miss_ps, LatencyClass::ConvMiss, dram[e.partition].id);
        }
        if (out.writeback) {
          ++raw.conv_writebacks;
          write_back(*out.writeback, start);
        }
        break;
      }
      case Route::ToDramPredictedMiss: {
        ++raw.routed_predicted_miss;
        o.value = ctrl.handle_predicted_miss(r, memory);
        observe(o);
        const auto ready = dram_access(e.partition, e.time_ps);
        const auto done = ready + pred_miss_ps;
        respond(e, done, LatencyClass::PredictedMiss, dram[e.partition].id);
        Event f = e;
        f.kind = EventKind::Fill;
        f.time_ps = done;
        f.row = d.where.row;
        f.resource = warp_resource(e.partition, d.where.row);
        push(f);
        break;
      }
      case Route::ToExtendedPredictedHit: {
        ++raw.routed_extended;
        ctrl.qlu().enqueue(d.where.row, QueuedRequest{r.id, d.where.block, r.origin_sm, r.op, false});
        schedule_dispatch(e, d.where.row, e.time_ps);
        break;
      }
    }
  }

  void schedule_dispatch(const Event& cause, std::uint32_t row, std::int64_t now) {
    Event x = cause;
    x.kind = EventKind::Dispatch;
    x.time_ps = now;
    x.row = row;
    x.resource = warp_resource(cause.partition, row);
    push(x);
  }

  void on_fill(const Event& e) {
    const auto& r = trace->requests[e.index];
    parts[e.partition].qlu().enqueue(e.row, QueuedRequest{r.id, block_number(r.address), r.origin_sm, r.op, true});
    schedule_dispatch(e, e.row, e.time_ps);
  }

  // Queue entries carry request ids; ids are trace positions by construction
  // of the parser and generator, but look them up defensively.
  std::uint32_t index_of(std::uint64_t request_id, std::uint32_t hint) const {
    if (hint < trace->requests.size() && trace->requests[hint].id == request_id) return hint;
    if (request_id < trace->requests.size() && trace->requests[request_id].id == request_id)
      return static_cast<std::uint32_t>(request_id);
    for (std::size_t i = 0; i < trace->requests.size(); ++i)
      if (trace->requests[i].id == request_id) return static_cast<std::uint32_t>(i);
    throw InvariantViolation("queued request id not found in the trace");
  }

  void on_dispatch(const Event& e) {
    auto& qlu = parts[e.partition].qlu();
    auto head = qlu.dispatch(e.row);
    if (!head) return;
    const auto start = occupancy_delay(warps[e.partition][e.row], kBlock, e.time_ps);
    Event s = e;
    s.kind = EventKind::ServiceStart;
    s.time_ps = start;
    s.request = head->request_id;
    s.index = index_of(head->request_id, e.index);
    push(s);
  }

  void on_service_start(const Event& e) {
    auto& ctrl = parts[e.partition];
    const auto& row = ctrl.qlu().row(e.row);
    const auto& r = trace->requests[e.index];
    auto& warp = warps[e.partition][e.row];
    const auto penalty = ctrl.set(e.row).backing() == Backing::RegisterFile ? penalty_ps : 0;
    warp.busy_until_ps += penalty;
    raw.ext_bytes += kBlock;

    std::int64_t end = warp.busy_until_ps;
    bool hit = false;
    std::vector<EvictedBlock> evictions;
    if (row.fill) {
      auto out = ctrl.fill(e.row, row.tag, memory);
      ++raw.ext_fills;
      if (out.inserted) ++raw.ext_fill_inserts;
      hit = !out.inserted;
      evictions = std::move(out.evictions);
      observe(Observation{true, r.id, Route::ToDramPredictedMiss, e.partition, e.row, hit, 0, row.tag, e.time_ps});
    } else {
      auto out = ctrl.service(e.row, r, memory);
      ++raw.ext_services;
      hit = out.hit;
      evictions = std::move(out.evictions);
      observe(Observation{false, r.id, Route::ToExtendedPredictedHit, e.partition, e.row, hit, out.value, row.tag,
                          e.time_ps});
      if (hit) {
        ++raw.ext_hits;
        respond(e, e.time_ps + ext_hit_ps + penalty, LatencyClass::ExtHit, warp.id);
      } else {
        ++raw.ext_misses;
        const auto ready = dram_access(e.partition, e.time_ps);
        const auto done = ready + ext_miss_ps + penalty;
        end = std::max(end, done);
        warp.busy_until_ps = end;
        respond(e, done, LatencyClass::ExtMiss, warp.id);
      }
    }
    raw.ext_evictions += evictions.size();
    for (const auto& ev : evictions) {
      if (!ev.dirty) continue;
      ++raw.ext_writebacks;
      write_back(ev.block, e.time_ps);
    }

    Event x = e;
    x.kind = EventKind::ServiceEnd;
    x.time_ps = end;
    x.row = e.row;
    x.partition = e.partition;
    x.request = r.id;
    push(x);
  }

  void on_service_end(const Event& e) {
    auto& ctrl = parts[e.partition];
    const bool hit = ctrl.qlu().row(e.row).fill || classes[e.index] == LatencyClass::ExtHit;
    ctrl.complete(e.row, hit);
    schedule_dispatch(e, e.row, e.time_ps);
  }

  void on_epoch(const Event& e) {
    ++raw.epochs;
    // One helper kernel per SM: its sets share the level statistics.
    std::vector<LevelCounts> per_sm(cfg.controller.ext.total_sms);
    for (const auto& ctrl : parts)
      for (std::uint32_t r = 0; r < ctrl.rows(); ++r) {
        const auto& s = ctrl.set(r);
        if (!s.compression()) continue;
        const auto& o = s.epoch_counters().observed;
        auto& acc = per_sm.at(s.owner().sm);
        acc.high += o.high;
        acc.low += o.low;
        acc.uncompressed += o.uncompressed;
      }
    for (auto& ctrl : parts) {
      auto ev = ctrl.end_epoch(memory, per_sm);
      raw.epoch_evictions += ev.size();
      raw.ext_evictions += ev.size();
      for (const auto& b : ev) {
        if (!b.dirty) continue;
        ++raw.ext_writebacks;
        write_back(b.block, e.time_ps);
      }
    }
    if (live > 0) {
      Event next = e;
      next.time_ps = e.time_ps + epoch_ps;
      push(next);
    }
  }

  bool any_compressed_set() const {
    for (const auto& ctrl : parts)
      for (std::uint32_t r = 0; r < ctrl.rows(); ++r)
        if (ctrl.set(r).compression()) return true;
    return false;
  }

  SimReport run(const Trace& t) {
    if (ran) throw InvariantViolation("a Simulator instance runs one trace");
    ran = true;
    trace = &t;
    const auto n = t.requests.size();
    if (n > std::numeric_limits<std::uint32_t>::max()) throw TraceError("trace too long");
    issue.resize(n);
    completion.assign(n, 0);
    classes.assign(n, LatencyClass::ConvHit);
    raw.requests = n;

    std::int64_t first = std::numeric_limits<std::int64_t>::max();
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto& r = t.requests[i];
      issue[i] = cycles_to_ps(r.issue_cycle, cfg.core_clock_mhz);
      first = std::min(first, issue[i]);
      Event e;
      e.time_ps = issue[i];
      e.kind = EventKind::Arrive;
      e.index = i;
      e.request = r.id;
      e.partition = sep.partition_of(r.address);
      e.resource = conv[e.partition].id;
      push(e);
    }
    raw.first_issue_ps = n ? first : 0;
    if (n && any_compressed_set()) {
      Event ep;
      ep.kind = EventKind::Epoch;
      ep.time_ps = first + epoch_ps;
      ep.resource = std::numeric_limits<std::uint64_t>::max();
      ep.request = std::numeric_limits<std::uint64_t>::max();
      push(ep);
    }

    while (!events.empty()) {
      const Event e = events.top();
      events.pop();
      if (e.kind != EventKind::Epoch) --live;
      switch (e.kind) {
        case EventKind::Arrive: on_arrive(e); break;
        case EventKind::Dispatch: on_dispatch(e); break;
        case EventKind::ServiceStart: on_service_start(e); break;
        case EventKind::ServiceEnd: on_service_end(e); break;
        case EventKind::Fill: on_fill(e); break;
        case EventKind::Epoch: on_epoch(e); break;
        case EventKind::Respond: {
          ++raw.responses;
          if (e.time_ps < issue[e.index]) throw InvariantViolation("completion precedes issue");
          raw.latency_ps[static_cast<std::size_t>(classes[e.index])].push_back(e.time_ps - issue[e.index]);
          raw.last_completion_ps = std::max(raw.last_completion_ps, e.time_ps);
          break;
        }
      }
    }
    collect_end_state();
    return finalize(raw, context(t));
  }

  void collect_end_state() {
    for (const auto& ctrl : parts) {
      raw.max_queue_depth = std::max(raw.max_queue_depth, ctrl.qlu().max_depth());
      raw.queue_overflow_stalls += ctrl.qlu().overflow_stalls();
      if (ctrl.qlu().busy_rows() != 0 || ctrl.qlu().depth() != 0)
        throw InvariantViolation("query logic unit not drained at end of run");
      for (std::uint32_t r = 0; r < ctrl.rows(); ++r) {
        const auto& s = ctrl.set(r);
        raw.bf_swaps += ctrl.predictor(r).swaps();
        raw.effective_capacity_blocks += s.associativity();
        if (!s.compression()) continue;
        raw.slots_high += s.allocation().high;
        raw.slots_low += s.allocation().low;
        raw.slots_uncompressed += s.allocation().uncompressed;
        raw.stored_high += s.stored_counts().high;
        raw.stored_low += s.stored_counts().low;
        raw.stored_uncompressed += s.stored_counts().uncompressed;
      }
    }
  }

  ReportContext context(const Trace& t) const {
    ReportContext ctx;
    ctx.trace = TraceInfo{hex_hash(trace_hash(t)), t.requests.size(), t.meta.total_instructions};
    ctx.config = cfg.echo;
    ctx.model_notes = model_notes(cfg);
    ctx.predictor_mode = std::string(predictor_mode_name(cfg.controller.predictor));
    ctx.compression = cfg.controller.ext.compression;
    ctx.conv_pj_per_byte = cfg.timing.conv_pj_per_byte;
    ctx.ext_pj_per_byte = cfg.timing.ext_pj_per_byte;
    ctx.dram_pj_per_byte = cfg.timing.dram_pj_per_byte;

    auto& c = ctx.capacity;
    const auto cap = capacity_bytes(cfg.controller.ext);
    c.conventional_bytes = cfg.controller.conventional_bytes;
    c.cache_mode_sms = cfg.controller.ext.cache_mode_sms.size();
    c.rf_blocks_per_set = cap.rf_blocks_per_set;
    c.l1_blocks_per_set = cap.l1_blocks_per_set;
    c.rf_bytes_per_sm = cap.rf_bytes_per_sm;
    c.l1_bytes_per_sm = cap.l1_bytes_per_sm;
    c.extended_bytes_per_sm = cap.bytes_per_sm;
    c.extended_bytes = cap.total_bytes;
    c.extended_sets = cap.total_sets;
    c.predictor_bytes_per_partition = parts.empty() || parts[0].rows() == 0 ? 0 : storage_bytes(kWarpStatusRows);
    c.query_logic_bytes_per_partition = kQueryLogicBytes;
    c.overhead_bytes_per_partition = c.predictor_bytes_per_partition + c.query_logic_bytes_per_partition;
    for (const auto& ctrl : parts) c.overhead_bytes_total += ctrl.storage_overhead_bytes();
    return ctx;
  }
};

Simulator::Simulator(SimConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Simulator::~Simulator() = default;

void Simulator::set_observer(Observer obs) { impl_->observer = std::move(obs); }
SimReport Simulator::run(const Trace& trace) { return impl_->run(trace); }
const std::vector<std::int64_t>& Simulator::completion_ps() const { return impl_->completion; }
const std::vector<LatencyClass>& Simulator::latency_classes() const { return impl_->classes; }
const RawCounters& Simulator::counters() const { return impl_->raw; }
const PartitionController& Simulator::partition(std::uint32_t p) const { return impl_->parts.at(p); }
const SimConfig& Simulator::config() const { return impl_->cfg; }

BlockBytes Simulator::read_block(std::uint64_t block) const {
  const auto d = impl_->sep.decode(block * kBlockBytes);
  if (d.extended)
    if (auto data = impl_->parts[d.partition].set(d.row).peek_data(block)) return *data;
  return impl_->memory.read(block);
}

SimReport run_simulation(const Trace& trace, const SimConfig& cfg) {
  Simulator sim(cfg);
  return sim.run(trace);
}

}  // namespace morpheus
