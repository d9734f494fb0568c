#include "morpheus/morpheus.h"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "morpheus/config.hpp"
#include "morpheus/errors.hpp"
#include "morpheus/metrics.hpp"
#include "morpheus/trace.hpp"

struct morpheus_config {
  morpheus::RunConfig cfg;
};

struct morpheus_trace {
  morpheus::Trace trace;
};

struct morpheus_report {
  morpheus::SimReport report;
};

namespace {

thread_local std::string g_last_error;

morpheus_status fail(morpheus_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

// Maps the library's exceptions onto status codes.
template <class F>
morpheus_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const morpheus::ConfigError& e) {
    return fail(MORPHEUS_E_CONFIG, e.what());
  } catch (const morpheus::TraceError& e) {
    return fail(MORPHEUS_E_TRACE, e.what());
  } catch (const morpheus::TraceMismatch& e) {
    return fail(MORPHEUS_E_TRACE, e.what());
  } catch (const morpheus::InvariantViolation& e) {
    return fail(MORPHEUS_E_INVARIANT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MORPHEUS_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MORPHEUS_E_INTERNAL, e.what());
  } catch (...) {
    return fail(MORPHEUS_E_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::string slurp(const std::string& path, bool& ok) {
  std::ifstream in(path, std::ios::binary);
  ok = static_cast<bool>(in);
  if (!ok) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << text;
  return static_cast<bool>(out.flush());
}

std::string file_token(const std::string& v) {
  std::string s;
  for (char c : v) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return s;
}

}  // namespace

extern "C" {

const char* morpheus_version(void) { return "1.0.0"; }

const char* morpheus_last_error(void) { return g_last_error.c_str(); }

const char* morpheus_status_name(morpheus_status status) {
  switch (status) {
    case MORPHEUS_OK: return "ok";
    case MORPHEUS_E_ARGUMENT: return "argument error";
    case MORPHEUS_E_CONFIG: return "config error";
    case MORPHEUS_E_TRACE: return "trace error";
    case MORPHEUS_E_INVARIANT: return "invariant violation";
    case MORPHEUS_E_IO: return "i/o error";
    case MORPHEUS_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void morpheus_string_free(char* s) { std::free(s); }

morpheus_status morpheus_config_default(morpheus_config** out) {
  if (!out) return fail(MORPHEUS_E_ARGUMENT, "out is null");
  return guarded([&] {
    *out = new morpheus_config{};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_load(const char* path, morpheus_config** out) {
  if (!path || !out) return fail(MORPHEUS_E_ARGUMENT, "path or out is null");
  return guarded([&] {
    *out = new morpheus_config{morpheus::load_run_config(path)};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_parse(const char* text, morpheus_config** out) {
  if (!text || !out) return fail(MORPHEUS_E_ARGUMENT, "text or out is null");
  return guarded([&] {
    *out = new morpheus_config{morpheus::parse_run_config(text)};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_clone(const morpheus_config* cfg, morpheus_config** out) {
  if (!cfg || !out) return fail(MORPHEUS_E_ARGUMENT, "cfg or out is null");
  return guarded([&] {
    *out = new morpheus_config{*cfg};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_set(morpheus_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(MORPHEUS_E_ARGUMENT, "cfg, key or value is null");
  return guarded([&] {
    morpheus::set_config_value(cfg->cfg, key, value);
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_get(const morpheus_config* cfg, const char* key, char** out) {
  if (!cfg || !key || !out) return fail(MORPHEUS_E_ARGUMENT, "cfg, key or out is null");
  return guarded([&] {
    *out = dup(morpheus::get_config_value(cfg->cfg, key));
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_validate(const morpheus_config* cfg) {
  if (!cfg) return fail(MORPHEUS_E_ARGUMENT, "cfg is null");
  return guarded([&] {
    cfg->cfg.validate();
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_to_text(const morpheus_config* cfg, char** out) {
  if (!cfg || !out) return fail(MORPHEUS_E_ARGUMENT, "cfg or out is null");
  return guarded([&] {
    *out = dup(morpheus::serialize_run_config(cfg->cfg));
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_config_capacity(const morpheus_config* cfg, morpheus_capacity* out) {
  if (!cfg || !out) return fail(MORPHEUS_E_ARGUMENT, "cfg or out is null");
  return guarded([&] {
    cfg->cfg.validate();
    const auto sim = cfg->cfg.to_sim();
    const auto cap = morpheus::capacity_bytes(sim.controller.ext);
    const auto sep = morpheus::make_separator(sim.controller);
    *out = morpheus_capacity{};
    out->rf_blocks_per_set = cap.rf_blocks_per_set;
    out->l1_blocks_per_set = cap.l1_blocks_per_set;
    out->rf_bytes_per_sm = cap.rf_bytes_per_sm;
    out->l1_bytes_per_sm = cap.l1_bytes_per_sm;
    out->extended_bytes_per_sm = cap.bytes_per_sm;
    out->extended_bytes = cap.total_bytes;
    out->extended_sets = cap.total_sets;
    out->overhead_bytes_per_partition = morpheus::storage_overhead_bytes(sep.rows(0));
    for (std::uint32_t p = 0; p < sep.partitions(); ++p)
      out->overhead_bytes_total += morpheus::storage_overhead_bytes(sep.rows(p));
    return MORPHEUS_OK;
  });
}

void morpheus_config_free(morpheus_config* cfg) { delete cfg; }

morpheus_status morpheus_trace_load(const char* path, morpheus_trace** out) {
  if (!path || !out) return fail(MORPHEUS_E_ARGUMENT, "path or out is null");
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail(MORPHEUS_E_TRACE, std::string("cannot open trace file '") + path + "'");
    *out = new morpheus_trace{morpheus::parse_trace(in)};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_trace_parse(const char* text, morpheus_trace** out) {
  if (!text || !out) return fail(MORPHEUS_E_ARGUMENT, "text or out is null");
  return guarded([&] {
    *out = new morpheus_trace{morpheus::parse_trace(std::string_view(text))};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_trace_generate(const char* spec_text, morpheus_trace** out) {
  if (!spec_text || !out) return fail(MORPHEUS_E_ARGUMENT, "spec_text or out is null");
  return guarded([&] {
    *out = new morpheus_trace{morpheus::generate(morpheus::parse_trace_spec(spec_text))};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_trace_write(const morpheus_trace* trace, const char* path) {
  if (!trace || !path) return fail(MORPHEUS_E_ARGUMENT, "trace or path is null");
  return guarded([&] {
    if (!spit(path, morpheus::serialize_trace(trace->trace)))
      return fail(MORPHEUS_E_IO, std::string("cannot write '") + path + "'");
    return MORPHEUS_OK;
  });
}

uint64_t morpheus_trace_size(const morpheus_trace* trace) { return trace ? trace->trace.requests.size() : 0; }

void morpheus_trace_free(morpheus_trace* trace) { delete trace; }

morpheus_status morpheus_run(const morpheus_config* cfg, const morpheus_trace* trace, morpheus_report** out) {
  if (!cfg || !trace || !out) return fail(MORPHEUS_E_ARGUMENT, "cfg, trace or out is null");
  return guarded([&] {
    cfg->cfg.validate();
    *out = new morpheus_report{morpheus::run_simulation(trace->trace, cfg->cfg.to_sim())};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_report_parse(const char* json, morpheus_report** out) {
  if (!json || !out) return fail(MORPHEUS_E_ARGUMENT, "json or out is null");
  return guarded([&] {
    *out = new morpheus_report{morpheus::parse_report(json)};
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_report_json(const morpheus_report* report, char** out) {
  if (!report || !out) return fail(MORPHEUS_E_ARGUMENT, "report or out is null");
  return guarded([&] {
    *out = dup(morpheus::to_json(report->report));
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_report_write(const morpheus_report* report, const char* path) {
  if (!report || !path) return fail(MORPHEUS_E_ARGUMENT, "report or path is null");
  return guarded([&] {
    if (!spit(path, morpheus::to_json(report->report)))
      return fail(MORPHEUS_E_IO, std::string("cannot write '") + path + "'");
    return MORPHEUS_OK;
  });
}

void morpheus_report_free(morpheus_report* report) { delete report; }

morpheus_status morpheus_compare(const morpheus_report* baseline, const morpheus_report* variant, char** out_json) {
  if (!baseline || !variant || !out_json) return fail(MORPHEUS_E_ARGUMENT, "baseline, variant or out_json is null");
  return guarded([&] {
    *out_json = dup(morpheus::to_json(morpheus::compare(baseline->report, variant->report)));
    return MORPHEUS_OK;
  });
}

morpheus_status morpheus_sweep(const char* spec_path, const morpheus_trace* trace, const char* out_dir,
                               unsigned max_threads, char** out_index_json) {
  if (!spec_path || !trace || !out_dir) return fail(MORPHEUS_E_ARGUMENT, "spec_path, trace or out_dir is null");
  return guarded([&] {
    namespace fs = std::filesystem;
    bool ok = false;
    const auto text = slurp(spec_path, ok);
    if (!ok) return fail(MORPHEUS_E_CONFIG, std::string("cannot open sweep spec '") + spec_path + "'");
    const auto spec = morpheus::parse_sweep_spec(text);
    morpheus::RunConfig base;
    if (spec.base_config) {
      fs::path p(*spec.base_config);
      if (p.is_relative()) p = fs::path(spec_path).parent_path() / p;
      base = morpheus::load_run_config(p.string());
    }
    const auto runs = morpheus::expand_sweep(spec, base);
    const auto threads = max_threads == 0 ? static_cast<unsigned>(runs.size()) : max_threads;
    const auto reports = morpheus::run_sweep(runs, trace->trace, threads);

    nlohmann::ordered_json index;
    index["parameter"] = spec.parameter;
    index["trace_hash"] = reports.empty() ? std::string() : reports.front().trace.hash;
    index["runs"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%03zu", i);
      const auto name = std::string("run_") + prefix + "_" + file_token(runs[i].value) + ".json";
      const auto path = (fs::path(out_dir) / name).string();
      if (!spit(path, morpheus::to_json(reports[i]))) return fail(MORPHEUS_E_IO, "cannot write '" + path + "'");
      const auto& r = reports[i];
      nlohmann::ordered_json row;
      row["value"] = runs[i].value;
      row["report"] = name;
      row["extended_bytes"] = r.capacity.extended_bytes;
      row["extended_bytes_per_sm"] = r.capacity.extended_bytes_per_sm;
      row["rf_bytes_per_sm"] = r.capacity.rf_bytes_per_sm;
      row["mpki"] = r.mpki.value;
      row["mean_latency_ns"] = r.latency_ns.overall.mean;
      row["energy_j"] = r.energy.total_j;
      index["runs"].push_back(row);
    }
    const auto index_text = index.dump(2) + "\n";
    const auto index_path = (fs::path(out_dir) / "index.json").string();
    if (!spit(index_path, index_text)) return fail(MORPHEUS_E_IO, "cannot write '" + index_path + "'");
    if (out_index_json) *out_index_json = dup(index_text);
    return MORPHEUS_OK;
  });
}

}  // extern "C"
