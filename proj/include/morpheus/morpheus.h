/* C interface to the morpheus simulator library. All handles are opaque and
 * owned by the caller once returned; release them with the matching _free
 * function. Strings returned through char** are released with
 * morpheus_string_free. Every function that returns a status leaves a
 * thread-local message for morpheus_last_error() on failure. */
#ifndef MORPHEUS_H
#define MORPHEUS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MORPHEUS_API __declspec(dllexport)
#else
#define MORPHEUS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum morpheus_status {
  MORPHEUS_OK = 0,
  MORPHEUS_E_ARGUMENT = 1,  /* null or otherwise unusable argument */
  MORPHEUS_E_CONFIG = 2,    /* invalid or inconsistent configuration */
  MORPHEUS_E_TRACE = 3,     /* missing, unreadable or malformed trace */
  MORPHEUS_E_INVARIANT = 4, /* simulator invariant violated, e.g. a false negative */
  MORPHEUS_E_IO = 5,        /* output could not be written */
  MORPHEUS_E_INTERNAL = 6
} morpheus_status;

typedef struct morpheus_config morpheus_config;
typedef struct morpheus_trace morpheus_trace;
typedef struct morpheus_report morpheus_report;

typedef struct morpheus_capacity {
  uint64_t rf_blocks_per_set;
  uint64_t l1_blocks_per_set;
  uint64_t rf_bytes_per_sm;
  uint64_t l1_bytes_per_sm;
  uint64_t extended_bytes_per_sm;
  uint64_t extended_bytes;
  uint64_t extended_sets;
  uint64_t overhead_bytes_per_partition;
  uint64_t overhead_bytes_total;
} morpheus_capacity;

MORPHEUS_API const char* morpheus_version(void);
MORPHEUS_API const char* morpheus_last_error(void);
MORPHEUS_API const char* morpheus_status_name(morpheus_status status);
MORPHEUS_API void morpheus_string_free(char* s);

/* Configuration. */
MORPHEUS_API morpheus_status morpheus_config_default(morpheus_config** out);
MORPHEUS_API morpheus_status morpheus_config_load(const char* path, morpheus_config** out);
MORPHEUS_API morpheus_status morpheus_config_parse(const char* text, morpheus_config** out);
MORPHEUS_API morpheus_status morpheus_config_clone(const morpheus_config* cfg, morpheus_config** out);
MORPHEUS_API morpheus_status morpheus_config_set(morpheus_config* cfg, const char* key, const char* value);
MORPHEUS_API morpheus_status morpheus_config_get(const morpheus_config* cfg, const char* key, char** out);
MORPHEUS_API morpheus_status morpheus_config_validate(const morpheus_config* cfg);
MORPHEUS_API morpheus_status morpheus_config_to_text(const morpheus_config* cfg, char** out);
MORPHEUS_API morpheus_status morpheus_config_capacity(const morpheus_config* cfg, morpheus_capacity* out);
MORPHEUS_API void morpheus_config_free(morpheus_config* cfg);

/* Traces. */
MORPHEUS_API morpheus_status morpheus_trace_load(const char* path, morpheus_trace** out);
MORPHEUS_API morpheus_status morpheus_trace_parse(const char* text, morpheus_trace** out);
MORPHEUS_API morpheus_status morpheus_trace_generate(const char* spec_text, morpheus_trace** out);
MORPHEUS_API morpheus_status morpheus_trace_write(const morpheus_trace* trace, const char* path);
MORPHEUS_API uint64_t morpheus_trace_size(const morpheus_trace* trace);
MORPHEUS_API void morpheus_trace_free(morpheus_trace* trace);

/* Runs and reports. */
MORPHEUS_API morpheus_status morpheus_run(const morpheus_config* cfg, const morpheus_trace* trace,
                                          morpheus_report** out);
MORPHEUS_API morpheus_status morpheus_report_parse(const char* json, morpheus_report** out);
MORPHEUS_API morpheus_status morpheus_report_json(const morpheus_report* report, char** out);
MORPHEUS_API morpheus_status morpheus_report_write(const morpheus_report* report, const char* path);
MORPHEUS_API void morpheus_report_free(morpheus_report* report);

/* Comparison of two reports from the same trace, as JSON. */
MORPHEUS_API morpheus_status morpheus_compare(const morpheus_report* baseline, const morpheus_report* variant,
                                              char** out_json);

/* Runs a sweep spec file against a trace. Writes one report per value and an
 * index.json into out_dir, which must exist. max_threads 0 means one thread
 * per value. */
MORPHEUS_API morpheus_status morpheus_sweep(const char* spec_path, const morpheus_trace* trace, const char* out_dir,
                                            unsigned max_threads, char** out_index_json);

#ifdef __cplusplus
}
#endif

#endif /* MORPHEUS_H */
