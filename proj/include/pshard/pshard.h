/* Copyright 2026 The pshard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface of the pshard planner and simulator.
 *
 * Every handle is opaque and owned by the caller once returned; release it
 * with the matching *_free function. Functions report failure through
 * pshard_status; pshard_last_error() then describes the failure on the
 * calling thread until the next call into the library. */

#ifndef PSHARD_PSHARD_H_
#define PSHARD_PSHARD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PSHARD_API __declspec(dllexport)
#else
#define PSHARD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pshard_status {
  PSHARD_OK = 0,
  PSHARD_INVALID_ARGUMENT = 1,
  PSHARD_PARSE_ERROR = 2,
  PSHARD_IO_ERROR = 3,
  PSHARD_VERSION_MISMATCH = 4,
  PSHARD_INFEASIBLE_BUDGET = 5,
  PSHARD_INFEASIBLE_SCHEDULE = 6,
  PSHARD_INTERNAL_ERROR = 99
} pshard_status;

typedef enum pshard_plan_kind {
  PSHARD_PLAN_GPU_ONLY = 0,
  PSHARD_PLAN_STATIC = 1,
  PSHARD_PLAN_DYNAMIC = 2
} pshard_plan_kind;

typedef struct pshard_model pshard_model;
typedef struct pshard_machine pshard_machine;
typedef struct pshard_profile pshard_profile;
typedef struct pshard_tier_table pshard_tier_table;
typedef struct pshard_vision pshard_vision;
typedef struct pshard_text pshard_text;

PSHARD_API const char* pshard_version(void);
PSHARD_API const char* pshard_last_error(void);
PSHARD_API const char* pshard_status_name(pshard_status status);
PSHARD_API const char* pshard_plan_kind_name(pshard_plan_kind kind);

/* Library-owned text. */
PSHARD_API const char* pshard_text_data(const pshard_text* text);
PSHARD_API size_t pshard_text_size(const pshard_text* text);
PSHARD_API void pshard_text_free(pshard_text* text);

/* Model specs. */
PSHARD_API pshard_status pshard_model_load(const char* path, pshard_model** out);
PSHARD_API pshard_status pshard_model_parse(const char* text, pshard_model** out);
PSHARD_API const char* pshard_model_name(const pshard_model* model);
/* Scheduled weights plus the untied embedding table, in bytes. */
PSHARD_API uint64_t pshard_model_file_bytes(const pshard_model* model);
PSHARD_API void pshard_model_free(pshard_model* model);

/* Machine specs. */
PSHARD_API pshard_status pshard_machine_load(const char* path, pshard_machine** out);
PSHARD_API pshard_status pshard_machine_parse(const char* text, pshard_machine** out);
PSHARD_API const char* pshard_machine_name(const pshard_machine* machine);
PSHARD_API uint32_t pshard_machine_threads(const pshard_machine* machine);
PSHARD_API uint64_t pshard_machine_vram(const pshard_machine* machine);
PSHARD_API pshard_status pshard_machine_set_pcie(pshard_machine* machine,
                                                 double h2d_bytes_per_sec,
                                                 double d2h_bytes_per_sec);
PSHARD_API void pshard_machine_free(pshard_machine* machine);

/* Kernel profiles. */
PSHARD_API pshard_status pshard_profile_synthesize(const pshard_machine* machine,
                                                   pshard_profile** out);
PSHARD_API pshard_status pshard_profile_load(const char* path, pshard_profile** out);
PSHARD_API pshard_status pshard_profile_save(const pshard_profile* profile,
                                             const char* path);
PSHARD_API pshard_status pshard_profile_to_text(const pshard_profile* profile,
                                                pshard_text** out);
PSHARD_API size_t pshard_profile_entry_count(const pshard_profile* profile);
PSHARD_API void pshard_profile_free(pshard_profile* profile);

/* Planning. budget_mb must be a positive multiple of 1000. threads = 0
 * plans for every thread the machine has. */
PSHARD_API pshard_status pshard_plan(const pshard_model* model,
                                     const pshard_machine* machine,
                                     const pshard_profile* profile,
                                     uint64_t budget_mb, uint64_t context_len,
                                     uint32_t threads, pshard_tier_table** out);
PSHARD_API pshard_status pshard_tier_table_load(const char* path,
                                                pshard_tier_table** out);
PSHARD_API pshard_status pshard_tier_table_save(const pshard_tier_table* table,
                                                const char* path);
PSHARD_API pshard_status pshard_tier_table_to_text(const pshard_tier_table* table,
                                                   pshard_text** out);

typedef struct pshard_tier_info {
  uint64_t tier;
  int feasible;
  pshard_plan_kind kind;
  double estimated_time_s;
  uint64_t pcie_h2d_bytes;
  uint64_t pcie_d2h_bytes;
  uint64_t pinned_bytes;
  uint64_t scratch_bytes;
  size_t streamed_shards;
  size_t cpu_shards;
} pshard_tier_info;

PSHARD_API size_t pshard_tier_table_size(const pshard_tier_table* table);
PSHARD_API uint64_t pshard_tier_table_context(const pshard_tier_table* table);
PSHARD_API pshard_status pshard_tier_table_info(const pshard_tier_table* table,
                                                size_t index, pshard_tier_info* out);
/* Tier the inference phase would run for this many new tokens. */
PSHARD_API pshard_status pshard_pick_tier(const pshard_tier_table* table,
                                          uint64_t batch_new_tokens,
                                          uint64_t* out_tier);
PSHARD_API void pshard_tier_table_free(pshard_tier_table* table);

/* Simulation of one batch of identical requests. The table must have been
 * planned for `model` with context >= batch * (prompt_len + gen_len). */
typedef struct pshard_sim_metrics {
  double ttft_s;
  double tps;
  double e2el_s;
  uint64_t decode_tokens;
  size_t iterations;
} pshard_sim_metrics;

PSHARD_API pshard_status pshard_simulate(const pshard_model* model,
                                         const pshard_machine* machine,
                                         const pshard_tier_table* table,
                                         uint64_t prompt_len, uint64_t gen_len,
                                         uint64_t batch, pshard_sim_metrics* out,
                                         pshard_text** iteration_log);

/* Sweeps. */
typedef struct pshard_sweep_config {
  const pshard_model* const* models;
  size_t n_models;
  const pshard_machine* machine;
  const pshard_profile* profile;
  const uint64_t* budgets_mb;
  size_t n_budgets;
  const uint64_t* contexts;
  size_t n_contexts;
  const uint64_t* batches;
  size_t n_batches;
  uint64_t gen_len;
  uint32_t threads;
  uint32_t workers;
} pshard_sweep_config;

PSHARD_API pshard_status pshard_sweep(const pshard_sweep_config* config,
                                      pshard_text** csv);

/* Planner-vs-oracle validation grid. */
typedef struct pshard_validate_config {
  const pshard_model* const* models;
  size_t n_models;
  const pshard_machine* machine;
  const pshard_profile* profile;
  const double* pcie_rates;
  size_t n_pcie_rates;
  const uint32_t* thread_counts;
  size_t n_thread_counts;
  const uint64_t* contexts;
  size_t n_contexts;
  const uint64_t* budgets_mb;
  size_t n_budgets;
  uint64_t tier;
  uint64_t sample; /* 0 keeps the whole grid */
  uint64_t seed;
  uint32_t workers;
  const char* witness_dir; /* optional; one file per winning plan kind */
} pshard_validate_config;

typedef struct pshard_validate_summary {
  size_t configurations;
  size_t feasible;
  size_t agree;
  double agreement;
  size_t oracle_wins[3];  /* indexed by pshard_plan_kind */
  size_t planner_wins[3];
} pshard_validate_summary;

PSHARD_API pshard_status pshard_validate(const pshard_validate_config* config,
                                         pshard_validate_summary* out,
                                         pshard_text** report);

/* Vision encoder memory. */
PSHARD_API pshard_status pshard_vision_load(const char* path, pshard_vision** out);
PSHARD_API void pshard_vision_free(pshard_vision* vision);

typedef struct pshard_vlm_report {
  uint64_t tokens;
  uint64_t naive_peak_bytes;
  uint64_t q_chunk;
  uint64_t flash_peak_bytes;
  uint64_t vision_peak_bytes;           /* weights in VRAM */
  uint64_t vision_peak_offload_bytes;   /* weights in sysRAM */
  uint64_t serialized_bytes;
  uint64_t overlapped_bytes;
} pshard_vlm_report;

PSHARD_API pshard_status pshard_vlm_memory(const pshard_vision* vision,
                                           uint64_t width_px, uint64_t height_px,
                                           uint64_t vision_budget_bytes,
                                           uint64_t language_peak_bytes,
                                           int offload_weights,
                                           pshard_vlm_report* out);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* PSHARD_PSHARD_H_ */
