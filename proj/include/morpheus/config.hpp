#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "morpheus/metrics.hpp"
#include "morpheus/timing.hpp"
#include "morpheus/trace.hpp"

namespace morpheus {

// Everything a run needs. Cache-mode SMs are given as a count and take the
// lowest SM ids; the remaining SMs (or compute_mode_sms of them) run the
// application.
struct RunConfig {
  std::uint32_t cache_mode_sms = 0;
  std::optional<std::uint32_t> compute_mode_sms;  // nullopt: every other SM
  SimConfig sim;

  std::uint32_t sms() const { return sim.controller.ext.total_sms; }
  void validate() const;  // throws ConfigError with a specific message
  // Resolved engine config, with the echo filled in.
  SimConfig to_sim() const;
};

// Sectioned key=value text: [gpu], [morpheus], [timing], [run]. '#' starts a
// comment. Every key is optional. Throws ConfigError naming the line.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

// Keys may be written bare ("rf_warps") or qualified ("morpheus.rf_warps").
bool is_config_key(std::string_view key);
std::vector<std::string> config_keys();  // qualified, in file order
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);
KeyValues config_echo(const RunConfig& cfg);

struct SweepSpec {
  std::string parameter;
  std::vector<std::string> values;
  std::optional<std::string> base_config;  // path, relative to the spec file
};

// key=value lines: parameter, values (comma separated), base_config.
SweepSpec parse_sweep_spec(std::string_view text);

struct SweepRun {
  std::string value;
  RunConfig config;
};

// Applies each value to a copy of `base` and validates all of them before
// anything runs. Throws ConfigError, including for an empty value list.
std::vector<SweepRun> expand_sweep(const SweepSpec& spec, const RunConfig& base);

// Runs independent simulations on up to `threads` worker threads. Results
// keep the input order. The first failure is rethrown after all workers stop.
std::vector<SimReport> run_sweep(const std::vector<SweepRun>& runs, const Trace& trace, unsigned threads);

}  // namespace morpheus
