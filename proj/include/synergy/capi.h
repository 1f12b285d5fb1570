/*
 * C API for the synergy toolkit: deployment cost model, latency simulator,
 * edge/cloud prompt services and the network-management pipelines.
 *
 * Every function returns a syn_status; on failure syn_last_error() holds a
 * thread-local description. Out-parameters are untouched on failure. Handles
 * are opaque and freed with their matching *_free function.
 */
#ifndef SYNERGY_CAPI_H
#define SYNERGY_CAPI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum syn_status {
    SYN_OK = 0,
    SYN_ERR_INVALID_ARGUMENT = 1,
    SYN_ERR_CONFIG = 2,
    SYN_ERR_TRANSPORT = 3,
    SYN_ERR_DATA = 4,
    SYN_ERR_PARSE = 5,
    SYN_ERR_NOT_FOUND = 6,
    SYN_ERR_INTERNAL = 7
} syn_status;

const char* syn_version(void);
const char* syn_last_error(void);

/* ---------------------------------------------------------------- config */

typedef struct syn_config syn_config;

syn_status syn_config_load(const char* path, syn_config** out);
syn_status syn_config_parse(const char* text, syn_config** out);
syn_status syn_config_set(syn_config* cfg, const char* key, const char* value);
/* SYN_ERR_NOT_FOUND when the key is absent; value is nul-terminated and
 * truncated to cap-1 bytes. */
syn_status syn_config_get(const syn_config* cfg, const char* key, char* buf, size_t cap);
void syn_config_free(syn_config* cfg);

/* ------------------------------------------------------------- cost model */

typedef struct syn_cost_report syn_cost_report;

typedef enum syn_cost_field {
    SYN_COST_EDGE_STORAGE_BYTES = 0,
    SYN_COST_EDGE_FINETUNE_VRAM_BYTES = 1,
    SYN_COST_EDGE_INFERENCE_VRAM_BYTES = 2,
    SYN_COST_TRANSMISSION_LATENCY_S = 3,
    SYN_COST_BYTES_PER_REQUEST = 4
} syn_cost_field;

/* framework: "cloud-only", "offload", "splitting", "synergy" or "all". */
syn_status syn_cost_run(const syn_config* cfg, const char* framework, syn_cost_report** out);
size_t syn_cost_report_rows(const syn_cost_report* report);
const char* syn_cost_report_framework(const syn_cost_report* report, size_t row);
syn_status syn_cost_report_value(const syn_cost_report* report, size_t row,
                                 syn_cost_field field, double* out);
double syn_cost_report_split_ratio(const syn_cost_report* report);
const char* syn_cost_report_text(const syn_cost_report* report);
const char* syn_cost_report_kv(const syn_cost_report* report);
void syn_cost_report_free(syn_cost_report* report);

/* datum_in_bits selects the unit the datum value is expressed in (1 = bits,
 * 0 = bytes); the value is used in that unit. */
syn_status syn_split_ratio_d(uint32_t hidden_dim, uint64_t datum_value, int datum_in_bits,
                             double avg_input_bytes, double* out);
syn_status syn_transmission_latency(uint64_t n_requests, uint64_t payload_bytes,
                                    double rate_bits_per_s, double per_request_handshake_s,
                                    int shared_connection, double* out);
/* Adapter parameter count for a model declared in the config. */
syn_status syn_lora_adapter_params(const syn_config* cfg, const char* model_name,
                                   uint32_t rank, uint64_t* out);

/* -------------------------------------------------------------- simulator */

typedef struct syn_sim_trace syn_sim_trace;
typedef struct syn_text syn_text; /* owned rendered document */

const char* syn_text_str(const syn_text* text);
void syn_text_free(syn_text* text);

syn_status syn_simulate(const syn_config* cfg, const char* framework, syn_sim_trace** out);
double syn_sim_trace_end_to_end_s(const syn_sim_trace* trace);
size_t syn_sim_trace_events(const syn_sim_trace* trace);
const char* syn_sim_trace_event_log(const syn_sim_trace* trace);
const char* syn_sim_trace_document(const syn_sim_trace* trace);
const char* syn_sim_trace_summary_kv(const syn_sim_trace* trace);
void syn_sim_trace_free(syn_sim_trace* trace);

/* Comparison table over all four frameworks with shared parameters. */
syn_status syn_sim_compare(const syn_config* cfg, syn_text** out);

/* --------------------------------------------------------------- services */

typedef struct syn_server syn_server;

syn_status syn_cloud_server_start(const syn_config* cfg, syn_server** out);
syn_status syn_edge_server_start(const syn_config* cfg, syn_server** out);
uint16_t syn_server_port(const syn_server* server);
uint16_t syn_server_metrics_port(const syn_server* server); /* 0 when absent */
syn_status syn_server_metrics(const syn_server* server, syn_text** out);
void syn_server_stop(syn_server* server);
void syn_server_free(syn_server* server);

typedef struct syn_responses syn_responses;

/* Sends concise prompts over the wire protocol and waits for one response
 * per prompt (request order preserved). */
syn_status syn_client_send(const char* host, uint16_t port, const char* bs_id,
                           const char* const* prompts, size_t n_prompts, double timeout_s,
                           syn_responses** out);
size_t syn_responses_count(const syn_responses* responses);
const char* syn_responses_text(const syn_responses* responses, size_t i);
int syn_responses_terminated_at_edge(const syn_responses* responses, size_t i);
void syn_responses_free(syn_responses* responses);

/* ---------------------------------------------------- network management */

typedef struct syn_report syn_report;

syn_status syn_popularity_run(const syn_config* cfg, const char* csv_path, syn_report** out);
/* extractor: "rules" or "backend". */
syn_status syn_intent_run(const syn_config* cfg, const char* dataset_path,
                          const char* extractor, syn_report** out);
const char* syn_report_text(const syn_report* report);
const char* syn_report_kv(const syn_report* report);
syn_status syn_report_metric(const syn_report* report, const char* key, double* out);
void syn_report_free(syn_report* report);

/* ------------------------------------------------------------- generators */

syn_status syn_generate_viewing_csv(const char* path, uint64_t n_records, uint64_t seed);
syn_status syn_generate_intent_dataset(const char* path, uint64_t n_samples, uint64_t seed);
syn_status syn_generate_finetune_corpus(const char* path, uint64_t n_samples, uint64_t seed);
/* Writes the built-in region profiles, one config file per base station. */
syn_status syn_write_profiles(const char* dir);

#ifdef __cplusplus
}
#endif

#endif /* SYNERGY_CAPI_H */
