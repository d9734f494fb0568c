// Command-line front end. Talks to the simulator only through the C API.
#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "morpheus/morpheus.h"

namespace {

// Exit codes: 0 ok, 1 usage or other failure, 2 config, 3 trace, 4 invariant.
int exit_code(morpheus_status s) {
  switch (s) {
    case MORPHEUS_OK: return 0;
    case MORPHEUS_E_CONFIG: return 2;
    case MORPHEUS_E_TRACE: return 3;
    case MORPHEUS_E_INVARIANT: return 4;
    default: return 1;
  }
}

struct Failure {
  int code;
};

void check(morpheus_status s, const std::string& what) {
  if (s == MORPHEUS_OK) return;
  std::cerr << "error: " << what << ": " << morpheus_last_error() << " (" << morpheus_status_name(s) << ")\n";
  throw Failure{exit_code(s)};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<morpheus_config, Deleter<morpheus_config, morpheus_config_free>>;
using TraceHandle = std::unique_ptr<morpheus_trace, Deleter<morpheus_trace, morpheus_trace_free>>;
using Report = std::unique_ptr<morpheus_report, Deleter<morpheus_report, morpheus_report_free>>;
using CString = std::unique_ptr<char, Deleter<char, morpheus_string_free>>;

Config load_config(const std::string& path) {
  morpheus_config* c = nullptr;
  check(morpheus_config_load(path.c_str(), &c), "loading config '" + path + "'");
  Config cfg(c);
  check(morpheus_config_validate(cfg.get()), "validating config '" + path + "'");
  return cfg;
}

TraceHandle load_trace(const std::string& path) {
  morpheus_trace* t = nullptr;
  check(morpheus_trace_load(path.c_str(), &t), "loading trace '" + path + "'");
  return TraceHandle(t);
}

Report run(const morpheus_config* cfg, const morpheus_trace* trace, const std::string& label) {
  morpheus_report* r = nullptr;
  check(morpheus_run(cfg, trace, &r), "running " + label);
  return Report(r);
}

void write_text(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    std::cerr << "error: cannot write '" << path << "'\n";
    throw Failure{1};
  }
}

unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MORPHEUS_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator of a GPU last-level cache extended into SM register files and L1"};
  app.require_subcommand(1);

  std::string config, config_a, config_b, trace, out, spec, out_dir;

  auto* run_cmd = app.add_subcommand("run", "Simulate one config over a trace and write a JSON report");
  run_cmd->add_option("--config", config, "Config file")->required();
  run_cmd->add_option("--trace", trace, "Trace file")->required();
  run_cmd->add_option("--out", out, "Report path")->required();

  auto* cmp_cmd = app.add_subcommand("compare", "Run two configs over one trace and write a comparison");
  cmp_cmd->add_option("--config-a", config_a, "Baseline config")->required();
  cmp_cmd->add_option("--config-b", config_b, "Variant config")->required();
  cmp_cmd->add_option("--trace", trace, "Trace file")->required();
  cmp_cmd->add_option("--out", out, "Comparison path")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run one config parameter over a list of values");
  sweep_cmd->add_option("--spec", spec, "Sweep spec file")->required();
  sweep_cmd->add_option("--trace", trace, "Trace file")->required();
  sweep_cmd->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* gen_cmd = app.add_subcommand("gen-trace", "Generate a synthetic trace from a spec file");
  gen_cmd->add_option("--spec", spec, "Trace spec file")->required();
  gen_cmd->add_option("--out", out, "Trace path")->required();

  auto* val_cmd = app.add_subcommand("validate", "Check a config file and print its capacity figures");
  val_cmd->add_option("--config", config, "Config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto cfg = load_config(config);
      auto tr = load_trace(trace);
      std::cout << "running " << morpheus_trace_size(tr.get()) << " requests\n";
      auto report = run(cfg.get(), tr.get(), "'" + config + "'");
      check(morpheus_report_write(report.get(), out.c_str()), "writing '" + out + "'");
      std::cout << "report written to " << out << "\n";
    } else if (*cmp_cmd) {
      auto a = load_config(config_a);
      auto b = load_config(config_b);
      auto tr = load_trace(trace);
      auto ra = run(a.get(), tr.get(), "baseline '" + config_a + "'");
      auto rb = run(b.get(), tr.get(), "variant '" + config_b + "'");
      char* json = nullptr;
      check(morpheus_compare(ra.get(), rb.get(), &json), "comparing reports");
      CString holder(json);
      write_text(out, json);
      std::cout << "comparison written to " << out << "\n";
    } else if (*sweep_cmd) {
      auto tr = load_trace(trace);
      std::error_code ec;
      std::filesystem::create_directories(out_dir, ec);
      if (ec) {
        std::cerr << "error: cannot create '" << out_dir << "': " << ec.message() << "\n";
        return 1;
      }
      const auto threads = sweep_threads();
      std::cout << "sweeping with up to " << threads << " thread(s)\n";
      check(morpheus_sweep(spec.c_str(), tr.get(), out_dir.c_str(), threads, nullptr), "sweep '" + spec + "'");
      std::cout << "reports and index.json written to " << out_dir << "\n";
    } else if (*gen_cmd) {
      std::ifstream in(spec, std::ios::binary);
      if (!in) {
        std::cerr << "error: cannot open trace spec '" << spec << "'\n";
        return 3;
      }
      std::ostringstream text;
      text << in.rdbuf();
      morpheus_trace* t = nullptr;
      check(morpheus_trace_generate(text.str().c_str(), &t), "generating from '" + spec + "'");
      TraceHandle tr(t);
      check(morpheus_trace_write(tr.get(), out.c_str()), "writing '" + out + "'");
      std::cout << morpheus_trace_size(tr.get()) << " requests written to " << out << "\n";
    } else if (*val_cmd) {
      auto cfg = load_config(config);
      morpheus_capacity cap{};
      check(morpheus_config_capacity(cfg.get(), &cap), "capacity of '" + config + "'");
      std::printf("config ok\n");
      std::printf("extended LLC: %llu B total, %llu B per cache-mode SM (RF %llu, L1 %llu), %llu sets\n",
                  static_cast<unsigned long long>(cap.extended_bytes),
                  static_cast<unsigned long long>(cap.extended_bytes_per_sm),
                  static_cast<unsigned long long>(cap.rf_bytes_per_sm),
                  static_cast<unsigned long long>(cap.l1_bytes_per_sm),
                  static_cast<unsigned long long>(cap.extended_sets));
      std::printf("controller storage: %llu B per partition, %llu B total\n",
                  static_cast<unsigned long long>(cap.overhead_bytes_per_partition),
                  static_cast<unsigned long long>(cap.overhead_bytes_total));
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
