#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "morpheus/morpheus.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  morpheus_string_free(s);
  return out;
}

fs::path scratch(const char* name) {
  auto p = fs::temp_directory_path() / ("morpheus_capi_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSpec = "kind = zipfian\nalpha = 0.9\nfootprint_bytes = 4MiB\nrequest_count = 5000\nseed = 3\n";

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::strlen(morpheus_version()) > 0);
  CHECK(std::string(morpheus_status_name(MORPHEUS_OK)) == "ok");
  CHECK(std::string(morpheus_status_name(MORPHEUS_E_CONFIG)) == "config error");
}

TEST_CASE("null arguments are rejected") {
  CHECK(morpheus_config_default(nullptr) == MORPHEUS_E_ARGUMENT);
  CHECK(morpheus_config_set(nullptr, "sms", "1") == MORPHEUS_E_ARGUMENT);
  CHECK(morpheus_run(nullptr, nullptr, nullptr) == MORPHEUS_E_ARGUMENT);
  CHECK(std::strlen(morpheus_last_error()) > 0);
  morpheus_config_free(nullptr);
  morpheus_trace_free(nullptr);
  morpheus_report_free(nullptr);
  morpheus_string_free(nullptr);
}

TEST_CASE("config handles") {
  morpheus_config* cfg = nullptr;
  REQUIRE(morpheus_config_default(&cfg) == MORPHEUS_OK);
  CHECK(morpheus_config_set(cfg, "cache_mode_sms", "34") == MORPHEUS_OK);
  char* v = nullptr;
  REQUIRE(morpheus_config_get(cfg, "morpheus.cache_mode_sms", &v) == MORPHEUS_OK);
  CHECK(take(v) == "34");

  morpheus_capacity cap{};
  REQUIRE(morpheus_config_capacity(cfg, &cap) == MORPHEUS_OK);
  CHECK(cap.extended_bytes_per_sm == 328 * 1024);
  CHECK(cap.overhead_bytes_per_partition == 21 * 1024);

  CHECK(morpheus_config_set(cfg, "cache_mode_sms", "52") == MORPHEUS_OK);
  CHECK(morpheus_config_validate(cfg) == MORPHEUS_E_CONFIG);
  CHECK(std::string(morpheus_last_error()).find("51") != std::string::npos);
  CHECK(morpheus_config_set(cfg, "nonsense", "1") == MORPHEUS_E_CONFIG);

  morpheus_config* copy = nullptr;
  REQUIRE(morpheus_config_clone(cfg, &copy) == MORPHEUS_OK);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(morpheus_config_to_text(cfg, &a) == MORPHEUS_OK);
  REQUIRE(morpheus_config_to_text(copy, &b) == MORPHEUS_OK);
  const auto text = take(a);
  CHECK(text == take(b));

  morpheus_config* parsed = nullptr;
  REQUIRE(morpheus_config_parse(text.c_str(), &parsed) == MORPHEUS_OK);
  morpheus_config* broken = nullptr;
  CHECK(morpheus_config_parse("[gpu]\nsms = x\n", &broken) == MORPHEUS_E_CONFIG);
  CHECK(broken == nullptr);
  CHECK(morpheus_config_load("/nonexistent/x.cfg", &broken) == MORPHEUS_E_CONFIG);

  morpheus_config_free(parsed);
  morpheus_config_free(copy);
  morpheus_config_free(cfg);
}

TEST_CASE("traces") {
  morpheus_trace* t = nullptr;
  REQUIRE(morpheus_trace_generate(kSpec, &t) == MORPHEUS_OK);
  CHECK(morpheus_trace_size(t) == 5000);
  CHECK(morpheus_trace_size(nullptr) == 0);

  const auto path = scratch("trace.txt");
  REQUIRE(morpheus_trace_write(t, path.string().c_str()) == MORPHEUS_OK);
  morpheus_trace* back = nullptr;
  REQUIRE(morpheus_trace_load(path.string().c_str(), &back) == MORPHEUS_OK);
  CHECK(morpheus_trace_size(back) == 5000);

  morpheus_trace* bad = nullptr;
  CHECK(morpheus_trace_parse("#requests\n0 0 0 R\n", &bad) == MORPHEUS_E_TRACE);
  CHECK(morpheus_trace_load("/nonexistent/trace.txt", &bad) == MORPHEUS_E_TRACE);
  CHECK(morpheus_trace_generate("kind = fractal\n", &bad) == MORPHEUS_E_TRACE);

  morpheus_trace_free(back);
  morpheus_trace_free(t);
  fs::remove(path);
}

TEST_CASE("run, report and compare") {
  morpheus_trace* t = nullptr;
  REQUIRE(morpheus_trace_generate(kSpec, &t) == MORPHEUS_OK);
  morpheus_config* base = nullptr;
  morpheus_config* var = nullptr;
  REQUIRE(morpheus_config_default(&base) == MORPHEUS_OK);
  REQUIRE(morpheus_config_default(&var) == MORPHEUS_OK);
  REQUIRE(morpheus_config_set(var, "cache_mode_sms", "34") == MORPHEUS_OK);

  morpheus_report* rb = nullptr;
  morpheus_report* rv = nullptr;
  REQUIRE(morpheus_run(base, t, &rb) == MORPHEUS_OK);
  REQUIRE(morpheus_run(var, t, &rv) == MORPHEUS_OK);

  char* json = nullptr;
  REQUIRE(morpheus_report_json(rv, &json) == MORPHEUS_OK);
  const auto text = take(json);
  CHECK(text.find("\"schema_version\"") != std::string::npos);

  morpheus_report* parsed = nullptr;
  REQUIRE(morpheus_report_parse(text.c_str(), &parsed) == MORPHEUS_OK);
  REQUIRE(morpheus_report_json(parsed, &json) == MORPHEUS_OK);
  CHECK(take(json) == text);
  CHECK(morpheus_report_parse("{", &parsed) != MORPHEUS_OK);

  char* cmp = nullptr;
  REQUIRE(morpheus_compare(rb, rv, &cmp) == MORPHEUS_OK);
  CHECK(take(cmp).find("mpki_reduction_pct") != std::string::npos);

  const auto path = scratch("report.json");
  REQUIRE(morpheus_report_write(rv, path.string().c_str()) == MORPHEUS_OK);
  std::ifstream in(path);
  std::string written((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(written == text);
  CHECK(morpheus_report_write(rv, "/nonexistent/dir/report.json") == MORPHEUS_E_IO);

  morpheus_trace* other = nullptr;
  REQUIRE(morpheus_trace_generate("request_count = 100\n", &other) == MORPHEUS_OK);
  morpheus_report* ro = nullptr;
  REQUIRE(morpheus_run(base, other, &ro) == MORPHEUS_OK);
  CHECK(morpheus_compare(rb, ro, &cmp) == MORPHEUS_E_TRACE);

  morpheus_report_free(ro);
  morpheus_trace_free(other);
  morpheus_report_free(parsed);
  morpheus_report_free(rv);
  morpheus_report_free(rb);
  morpheus_config_free(var);
  morpheus_config_free(base);
  morpheus_trace_free(t);
  fs::remove(path);
}

TEST_CASE("sweep writes one report per value") {
  const auto dir = scratch("sweep");
  fs::create_directories(dir);
  const auto spec = dir / "sweep.txt";
  std::ofstream(spec) << "parameter = cache_mode_sms\nvalues = 0,17,34\n";
  morpheus_trace* t = nullptr;
  REQUIRE(morpheus_trace_generate("request_count = 500\n", &t) == MORPHEUS_OK);
  char* index = nullptr;
  REQUIRE(morpheus_sweep(spec.string().c_str(), t, dir.string().c_str(), 0, &index) == MORPHEUS_OK);
  const auto text = take(index);
  CHECK(text.find("\"parameter\": \"cache_mode_sms\"") != std::string::npos);
  CHECK(fs::exists(dir / "index.json"));
  int reports = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind("run_", 0) == 0) ++reports;
  CHECK(reports == 3);

  std::ofstream(spec) << "parameter = cache_mode_sms\nvalues = 0,60\n";
  CHECK(morpheus_sweep(spec.string().c_str(), t, dir.string().c_str(), 0, &index) == MORPHEUS_E_CONFIG);
  morpheus_trace_free(t);
  fs::remove_all(dir);
}
