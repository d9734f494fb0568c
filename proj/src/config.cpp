#include "morpheus/config.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "morpheus/errors.hpp"
#include "text_util.hpp"

namespace morpheus {

namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeyDef {
  std::string section;
  std::string name;
  Setter set;
  Getter get;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError(std::string(key) + ": expected " + std::string(expected) + ", got '" + std::string(value) + "'");
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  if (auto x = text::parse_u64(v)) return *x;
  bad_value(key, v, "an unsigned integer");
}

std::uint32_t to_u32(std::string_view key, std::string_view v) {
  auto x = to_u64(key, v);
  if (x > 0xffffffffull) bad_value(key, v, "a 32-bit unsigned integer");
  return static_cast<std::uint32_t>(x);
}

std::uint64_t to_size(std::string_view key, std::string_view v) {
  if (auto x = text::parse_size(v)) return *x;
  bad_value(key, v, "a byte size such as 5MiB");
}

double to_double(std::string_view key, std::string_view v) {
  if (auto x = text::parse_double(v)) return *x;
  bad_value(key, v, "a number");
}

bool to_bool(std::string_view key, std::string_view v) {
  if (auto x = text::parse_bool(v)) return *x;
  bad_value(key, v, "on or off");
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_reservation(const ExtLlcConfig& e) {
  std::string s;
  for (auto [w, r] : e.aux_reservation) {
    if (!s.empty()) s += ',';
    s += std::to_string(w) + ':' + std::to_string(r);
  }
  return s;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_reservation(std::string_view key, std::string_view v) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (auto item : text::split(v, ',')) {
    item = text::trim(item);
    auto colon = item.find(':');
    if (colon == std::string_view::npos) bad_value(key, v, "warps:registers pairs separated by commas");
    out.emplace_back(to_u32(key, text::trim(item.substr(0, colon))), to_u32(key, text::trim(item.substr(colon + 1))));
  }
  if (out.empty()) bad_value(key, v, "at least one warps:registers pair");
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].first == out[i - 1].first) bad_value(key, v, "distinct warp counts");
  return out;
}

#define U32(sec, key, field)                                                                     \
  KeyDef{sec, #key, [](RunConfig& c, std::string_view v) { c.field = to_u32(#key, v); },        \
         [](const RunConfig& c) { return std::to_string(c.field); }}
#define U64(sec, key, field)                                                                     \
  KeyDef{sec, #key, [](RunConfig& c, std::string_view v) { c.field = to_u64(#key, v); },        \
         [](const RunConfig& c) { return std::to_string(c.field); }}
#define SIZE(sec, key, field)                                                                    \
  KeyDef{sec, #key, [](RunConfig& c, std::string_view v) { c.field = to_size(#key, v); },       \
         [](const RunConfig& c) { return std::to_string(c.field); }}
#define DBL(sec, key, field)                                                                     \
  KeyDef{sec, #key, [](RunConfig& c, std::string_view v) { c.field = to_double(#key, v); },     \
         [](const RunConfig& c) { return fmt_double(c.field); }}
#define ENUM(sec, key, field, parse, name, expected)                                             \
  KeyDef{sec, #key,                                                                              \
         [](RunConfig& c, std::string_view v) {                                                  \
           auto x = parse(v);                                                                    \
           if (!x) bad_value(#key, v, expected);                                                 \
           c.field = *x;                                                                         \
         },                                                                                      \
         [](const RunConfig& c) { return std::string(name(c.field)); }}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      U32("gpu", sms, sim.controller.ext.total_sms),
      U32("gpu", partitions, sim.controller.partitions),
      SIZE("gpu", conventional_llc_bytes, sim.controller.conventional_bytes),
      U32("gpu", conventional_ways, sim.controller.conventional_ways),
      DBL("gpu", core_clock_mhz, sim.core_clock_mhz),

      U32("morpheus", cache_mode_sms, cache_mode_sms),
      KeyDef{"morpheus", "compute_mode_sms",
             [](RunConfig& c, std::string_view v) {
               if (v == "auto") c.compute_mode_sms.reset();
               else c.compute_mode_sms = to_u32("compute_mode_sms", v);
             },
             [](const RunConfig& c) {
               return c.compute_mode_sms ? std::to_string(*c.compute_mode_sms) : std::string("auto");
             }},
      U32("morpheus", warps_per_sm, sim.controller.ext.warps_per_sm),
      U32("morpheus", rf_warps, sim.controller.ext.rf_warps),
      U32("morpheus", l1_warps, sim.controller.ext.l1_warps),
      KeyDef{"morpheus", "blocks_per_rf_set",
             [](RunConfig& c, std::string_view v) {
               if (v == "auto") c.sim.controller.ext.blocks_per_rf_set.reset();
               else c.sim.controller.ext.blocks_per_rf_set = to_u32("blocks_per_rf_set", v);
             },
             [](const RunConfig& c) {
               const auto& b = c.sim.controller.ext.blocks_per_rf_set;
               return b ? std::to_string(*b) : std::string("auto");
             }},
      SIZE("morpheus", rf_bytes_per_sm, sim.controller.ext.rf_bytes_per_sm),
      SIZE("morpheus", l1_bytes_per_sm, sim.controller.ext.l1_bytes_per_sm),
      U32("morpheus", max_registers_per_thread, sim.controller.ext.max_registers_per_thread),
      KeyDef{"morpheus", "aux_reservation",
             [](RunConfig& c, std::string_view v) {
               c.sim.controller.ext.aux_reservation = parse_reservation("aux_reservation", v);
             },
             [](const RunConfig& c) { return fmt_reservation(c.sim.controller.ext); }},
      ENUM("morpheus", predictor, sim.controller.predictor, parse_predictor_mode, predictor_mode_name,
           "bloom, off or perfect"),
      U32("morpheus", bloom_bits, sim.controller.bloom_bits),
      U32("morpheus", bloom_hashes, sim.controller.bloom_hashes),
      KeyDef{"morpheus", "compression",
             [](RunConfig& c, std::string_view v) { c.sim.controller.ext.compression = to_bool("compression", v); },
             [](const RunConfig& c) { return std::string(c.sim.controller.ext.compression ? "on" : "off"); }},
      U64("morpheus", epoch_cycles, sim.epoch_cycles),
      ENUM("morpheus", set_hash, sim.controller.set_hash, parse_set_hash, set_hash_name, "identity or mixed"),
      U32("morpheus", request_queue_entries, sim.controller.request_queue_entries),
      U32("morpheus", warp_status_rows, sim.controller.warp_status_rows),

      DBL("timing", conv_hit_ns, sim.timing.conv_hit_ns),
      DBL("timing", conv_miss_ns, sim.timing.conv_miss_ns),
      DBL("timing", ext_hit_ns, sim.timing.ext_hit_ns),
      DBL("timing", ext_miss_ns, sim.timing.ext_miss_ns),
      DBL("timing", predicted_miss_ns, sim.timing.predicted_miss_ns),
      ENUM("timing", indirect_mov, sim.timing.indirect_mov, parse_indirect_mov, indirect_mov_name,
           "native or software"),
      DBL("timing", indirect_mov_penalty_ns, sim.timing.indirect_mov_penalty_ns),
      DBL("timing", per_warp_service_occupancy_ns, sim.timing.per_warp_service_occupancy_ns),
      DBL("timing", conv_partition_bytes_per_s, sim.timing.conv_partition_bytes_per_s),
      DBL("timing", dram_bytes_per_s, sim.timing.dram_bytes_per_s),
      DBL("timing", conv_pj_per_byte, sim.timing.conv_pj_per_byte),
      DBL("timing", ext_pj_per_byte, sim.timing.ext_pj_per_byte),
      DBL("timing", dram_pj_per_byte, sim.timing.dram_pj_per_byte),

      U64("run", seed, sim.seed),
      ENUM("run", dram_init, sim.dram_init, parse_data_pattern, data_pattern_name, "zero, ramp, random or mixed"),
  };
  return table;
}

#undef U32
#undef U64
#undef SIZE
#undef DBL
#undef ENUM

const KeyDef* find_key(std::string_view key) {
  std::string_view section;
  if (auto dot = key.find('.'); dot != std::string_view::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  for (const auto& k : key_table())
    if (k.name == key && (section.empty() || k.section == section)) return &k;
  return nullptr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void RunConfig::validate() const {
  const auto total = sms();
  if (total == 0) throw ConfigError("sms must be positive");
  to_sim().validate();
  const auto compute = compute_mode_sms.value_or(total > cache_mode_sms ? total - cache_mode_sms : 0);
  if (std::uint64_t{cache_mode_sms} + compute > total)
    throw ConfigError("cache-mode SMs (" + std::to_string(cache_mode_sms) + ") + compute-mode SMs (" +
                      std::to_string(compute) + ") exceed the SM count (" + std::to_string(total) + ")");
  if (compute == 0) throw ConfigError("at least one SM must run in compute mode");
}

SimConfig RunConfig::to_sim() const {
  SimConfig s = sim;
  s.controller.ext.cache_mode_sms.clear();
  for (std::uint32_t i = 0; i < cache_mode_sms; ++i) s.controller.ext.cache_mode_sms.push_back(i);
  s.echo = config_echo(*this);
  return s;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (section != "gpu" && section != "morpheus" && section != "timing" && section != "run")
        throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const auto key = std::string(text::trim(line.substr(0, eq)));
    const auto value = text::trim(line.substr(eq + 1));
    const auto* def = find_key(section + "." + key);
    if (!def) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(def->section + "." + def->name).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      def->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string serialize_run_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    if (k.section != section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

bool is_config_key(std::string_view key) { return find_key(key) != nullptr; }

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.section + "." + k.name);
  return out;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto* def = find_key(key);
  if (!def) throw ConfigError("unknown config key '" + std::string(key) + "'");
  def->set(cfg, text::trim(value));
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  const auto* def = find_key(key);
  if (!def) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return def->get(cfg);
}

KeyValues config_echo(const RunConfig& cfg) {
  KeyValues out;
  for (const auto& k : key_table()) out.emplace_back(k.section + "." + k.name, k.get(cfg));
  return out;
}

SweepSpec parse_sweep_spec(std::string_view text) {
  SweepSpec spec;
  bool have_values = false;
  std::size_t line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto where = "sweep line " + std::to_string(line_no) + ": ";
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    if (key == "parameter") {
      spec.parameter = std::string(value);
    } else if (key == "values") {
      have_values = true;
      for (auto v : text::split(value, ',')) {
        v = text::trim(v);
        if (!v.empty()) spec.values.emplace_back(v);
      }
    } else if (key == "base_config") {
      spec.base_config = std::string(value);
    } else {
      throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    }
  }
  if (spec.parameter.empty()) throw ConfigError("sweep spec has no parameter");
  if (!is_config_key(spec.parameter))
    throw ConfigError("sweep parameter '" + spec.parameter + "' is not a config key");
  if (!have_values || spec.values.empty()) throw ConfigError("sweep spec has an empty value list");
  return spec;
}

std::vector<SweepRun> expand_sweep(const SweepSpec& spec, const RunConfig& base) {
  if (spec.values.empty()) throw ConfigError("sweep spec has an empty value list");
  std::vector<SweepRun> runs;
  for (const auto& v : spec.values) {
    SweepRun run{v, base};
    try {
      set_config_value(run.config, spec.parameter, v);
      run.config.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("sweep value " + spec.parameter + "=" + v + ": " + e.what());
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<SimReport> run_sweep(const std::vector<SweepRun>& runs, const Trace& trace, unsigned threads) {
  std::vector<SimReport> out(runs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failed_at = runs.size();
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        out[i] = run_simulation(trace, runs[i].config.to_sim());
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  const auto n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace morpheus
