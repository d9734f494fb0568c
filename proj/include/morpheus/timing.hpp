#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "morpheus/controller.hpp"
#include "morpheus/memory.hpp"
#include "morpheus/metrics.hpp"
#include "morpheus/trace.hpp"

namespace morpheus {

// Software runs the register-indirect move as an instruction sequence and
// pays a fixed penalty on every register-file data access.
enum class IndirectMov : std::uint8_t { Native, Software };
std::string_view indirect_mov_name(IndirectMov m);
std::optional<IndirectMov> parse_indirect_mov(std::string_view s);

struct LatencyEnergyConfig {
  double conv_hit_ns = 160;
  double conv_miss_ns = 608;
  double ext_hit_ns = 185;
  double ext_miss_ns = 773;
  double predicted_miss_ns = 608;
  IndirectMov indirect_mov = IndirectMov::Native;
  double indirect_mov_penalty_ns = 30;
  double per_warp_service_occupancy_ns = 181;
  double conv_partition_bytes_per_s = 300e9;
  double dram_bytes_per_s = 700e9;  // whole GPU, split evenly over partitions
  double conv_pj_per_byte = 10;
  double ext_pj_per_byte = 61;
  double dram_pj_per_byte = 120;

  void validate() const;  // throws ConfigError
};

enum class ResourceKind : std::uint8_t { ConvPartition, ExtWarp, DramChannel, Noc };

struct Resource {
  std::uint64_t id = 0;
  ResourceKind kind = ResourceKind::ConvPartition;
  std::int64_t busy_until_ps = 0;
  std::uint64_t bytes_served = 0;
  double bytes_per_s = 0;        // rate-limited kinds
  std::int64_t service_ps = 0;   // ExtWarp: fixed occupancy per service
};

std::int64_t ns_to_ps(double ns);
// Picoseconds needed to move `bytes` at `bytes_per_s`, rounded up.
std::int64_t transfer_ps(std::uint64_t bytes, double bytes_per_s);

// Reserves the resource for one transaction and returns its start time.
// ExtWarp: start = max(now, busy_until), busy for service_ps. Rate-limited
// kinds: transactions are serialized at the configured rate.
std::int64_t occupancy_delay(Resource& r, std::uint64_t bytes, std::int64_t now_ps);

EnergyReport energy_report(const RawCounters& counters, const LatencyEnergyConfig& cfg);

struct SimConfig {
  ControllerConfig controller;
  LatencyEnergyConfig timing;
  double core_clock_mhz = 1710;
  std::uint64_t epoch_cycles = 10000;
  DataPattern dram_init = DataPattern::Mixed;
  std::uint64_t seed = 1;
  // Effective configuration echoed into reports.
  KeyValues echo;

  void validate() const;  // throws ConfigError
};

std::int64_t cycles_to_ps(std::uint64_t cycles, double mhz);

enum class EventKind : std::uint8_t { Arrive, Dispatch, ServiceStart, ServiceEnd, Fill, Respond, Epoch };

struct Event {
  std::int64_t time_ps = 0;
  std::uint64_t resource = 0;
  std::uint64_t request = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Arrive;
  std::uint32_t index = 0;      // position of the request in the trace
  std::uint32_t partition = 0;
  std::uint32_t row = 0;
};

// Functional effect of one request or fill, reported when it happens.
struct Observation {
  bool fill = false;
  std::uint64_t request_id = 0;
  Route route = Route::ToConventional;
  std::uint32_t partition = 0;
  std::optional<std::uint32_t> row;  // extended set that did the work
  bool hit = false;
  std::uint64_t value = 0;
  std::uint64_t block = 0;
  std::int64_t time_ps = 0;
};

using Observer = std::function<void(const Observation&)>;

// Event-driven engine over all partitions. Single threaded and deterministic.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  void set_observer(Observer obs);

  // Throws ConfigError, InvariantViolation (including InconsistentCounters).
  SimReport run(const Trace& trace);

  // After run: completion time of each request, in trace order.
  const std::vector<std::int64_t>& completion_ps() const;
  const std::vector<LatencyClass>& latency_classes() const;
  const RawCounters& counters() const;
  const PartitionController& partition(std::uint32_t p) const;
  // Latest contents of a block: the extended copy if resident, else DRAM.
  BlockBytes read_block(std::uint64_t block) const;
  const SimConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SimReport run_simulation(const Trace& trace, const SimConfig& cfg);

// Model descriptions echoed into every report.
KeyValues model_notes(const SimConfig& cfg);

}  // namespace morpheus
