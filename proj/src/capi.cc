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

#include "pshard/pshard.h"

#include <cctype>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "common.h"
#include "machine.h"
#include "model_graph.h"
#include "planner.h"
#include "profile_db.h"
#include "simulator.h"
#include "vlm_memory.h"

struct pshard_model {
  std::shared_ptr<const pshard::ModelSpec> spec;
};
struct pshard_machine {
  pshard::MachineSpec spec;
};
struct pshard_profile {
  pshard::ProfileDb db;
};
struct pshard_tier_table {
  pshard::TierTable table;
};
struct pshard_vision {
  pshard::VisionSpec spec;
};
struct pshard_text {
  std::string data;
};

namespace {

thread_local std::string g_last_error;

pshard_status status_of(pshard::ErrorCode code) {
  using pshard::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return PSHARD_INVALID_ARGUMENT;
    case ErrorCode::kParse: return PSHARD_PARSE_ERROR;
    case ErrorCode::kIo: return PSHARD_IO_ERROR;
    case ErrorCode::kVersionMismatch: return PSHARD_VERSION_MISMATCH;
    case ErrorCode::kInfeasibleBudget: return PSHARD_INFEASIBLE_BUDGET;
    case ErrorCode::kInfeasibleSchedule: return PSHARD_INFEASIBLE_SCHEDULE;
  }
  return PSHARD_INTERNAL_ERROR;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
pshard_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PSHARD_OK;
  } catch (const pshard::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return PSHARD_INTERNAL_ERROR;
}

void require(bool ok, const char* what) {
  if (!ok) pshard::fail(pshard::ErrorCode::kInvalidArgument, what);
}

template <typename T>
void require_out(T** out) {
  require(out != nullptr, "output pointer is null");
  *out = nullptr;
}

uint64_t budget_bytes_from_mb(uint64_t mb) {
  require(mb > 0 && mb % 1000 == 0,
          "budget_mb must be a positive multiple of 1000");
  return mb * 1000000;
}

template <typename T>
std::vector<T> copy_axis(const T* data, size_t n, const char* what) {
  require(data != nullptr || n == 0, what);
  return std::vector<T>(data, data + n);
}

std::vector<std::shared_ptr<const pshard::ModelSpec>> copy_models(
    const pshard_model* const* models, size_t n) {
  require(models != nullptr && n > 0, "at least one model is required");
  std::vector<std::shared_ptr<const pshard::ModelSpec>> out;
  for (size_t i = 0; i < n; ++i) {
    require(models[i] != nullptr, "null model handle");
    out.push_back(models[i]->spec);
  }
  return out;
}

}  // namespace

extern "C" {

const char* pshard_version(void) { return "0.1.0"; }

const char* pshard_last_error(void) { return g_last_error.c_str(); }

const char* pshard_status_name(pshard_status status) {
  switch (status) {
    case PSHARD_OK: return "ok";
    case PSHARD_INVALID_ARGUMENT: return "invalid argument";
    case PSHARD_PARSE_ERROR: return "parse error";
    case PSHARD_IO_ERROR: return "i/o error";
    case PSHARD_VERSION_MISMATCH: return "version mismatch";
    case PSHARD_INFEASIBLE_BUDGET: return "infeasible budget";
    case PSHARD_INFEASIBLE_SCHEDULE: return "infeasible schedule";
    case PSHARD_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

const char* pshard_plan_kind_name(pshard_plan_kind kind) {
  switch (kind) {
    case PSHARD_PLAN_GPU_ONLY: return "GpuOnly";
    case PSHARD_PLAN_STATIC: return "Static";
    case PSHARD_PLAN_DYNAMIC: return "Dynamic";
  }
  return "?";
}

const char* pshard_text_data(const pshard_text* text) {
  return text ? text->data.c_str() : "";
}

size_t pshard_text_size(const pshard_text* text) {
  return text ? text->data.size() : 0;
}

void pshard_text_free(pshard_text* text) { delete text; }

pshard_status pshard_model_load(const char* path, pshard_model** out) {
  return guarded([&] {
    require_out(out);
    require(path != nullptr, "path is null");
    auto spec = std::make_shared<pshard::ModelSpec>(pshard::load_model_spec(path));
    *out = new pshard_model{std::move(spec)};
  });
}

pshard_status pshard_model_parse(const char* text, pshard_model** out) {
  return guarded([&] {
    require_out(out);
    require(text != nullptr, "text is null");
    auto spec = std::make_shared<pshard::ModelSpec>(pshard::parse_model_spec(text));
    *out = new pshard_model{std::move(spec)};
  });
}

const char* pshard_model_name(const pshard_model* model) {
  return model ? model->spec->name.c_str() : "";
}

uint64_t pshard_model_file_bytes(const pshard_model* model) {
  return model ? pshard::file_bytes(*model->spec) : 0;
}

void pshard_model_free(pshard_model* model) { delete model; }

pshard_status pshard_machine_load(const char* path, pshard_machine** out) {
  return guarded([&] {
    require_out(out);
    require(path != nullptr, "path is null");
    *out = new pshard_machine{pshard::load_machine_spec(path)};
  });
}

pshard_status pshard_machine_parse(const char* text, pshard_machine** out) {
  return guarded([&] {
    require_out(out);
    require(text != nullptr, "text is null");
    *out = new pshard_machine{pshard::parse_machine_spec(text)};
  });
}

const char* pshard_machine_name(const pshard_machine* machine) {
  return machine ? machine->spec.name.c_str() : "";
}

uint32_t pshard_machine_threads(const pshard_machine* machine) {
  return machine ? machine->spec.threads_available : 0;
}

uint64_t pshard_machine_vram(const pshard_machine* machine) {
  return machine ? machine->spec.vram_capacity : 0;
}

pshard_status pshard_machine_set_pcie(pshard_machine* machine,
                                      double h2d_bytes_per_sec,
                                      double d2h_bytes_per_sec) {
  return guarded([&] {
    require(machine != nullptr, "machine is null");
    pshard::MachineSpec updated = machine->spec;
    updated.pcie_h2d_bw = h2d_bytes_per_sec;
    updated.pcie_d2h_bw = d2h_bytes_per_sec;
    updated.validate();
    machine->spec = std::move(updated);
  });
}

void pshard_machine_free(pshard_machine* machine) { delete machine; }

pshard_status pshard_profile_synthesize(const pshard_machine* machine,
                                        pshard_profile** out) {
  return guarded([&] {
    require_out(out);
    require(machine != nullptr, "machine is null");
    *out = new pshard_profile{pshard::synth_profile(machine->spec)};
  });
}

pshard_status pshard_profile_load(const char* path, pshard_profile** out) {
  return guarded([&] {
    require_out(out);
    require(path != nullptr, "path is null");
    *out = new pshard_profile{pshard::load_profile(path)};
  });
}

pshard_status pshard_profile_save(const pshard_profile* profile, const char* path) {
  return guarded([&] {
    require(profile != nullptr && path != nullptr, "null argument");
    pshard::save_profile(profile->db, path);
  });
}

pshard_status pshard_profile_to_text(const pshard_profile* profile,
                                     pshard_text** out) {
  return guarded([&] {
    require_out(out);
    require(profile != nullptr, "profile is null");
    *out = new pshard_text{pshard::serialize_profile(profile->db)};
  });
}

size_t pshard_profile_entry_count(const pshard_profile* profile) {
  return profile ? profile->db.size() : 0;
}

void pshard_profile_free(pshard_profile* profile) { delete profile; }

pshard_status pshard_plan(const pshard_model* model, const pshard_machine* machine,
                          const pshard_profile* profile, uint64_t budget_mb,
                          uint64_t context_len, uint32_t threads,
                          pshard_tier_table** out) {
  return guarded([&] {
    require_out(out);
    require(model && machine && profile, "null argument");
    const uint32_t t = threads ? threads : machine->spec.threads_available;
    *out = new pshard_tier_table{pshard::build_tier_table(
        model->spec, machine->spec, profile->db, budget_bytes_from_mb(budget_mb),
        context_len, t)};
  });
}

pshard_status pshard_tier_table_load(const char* path, pshard_tier_table** out) {
  return guarded([&] {
    require_out(out);
    require(path != nullptr, "path is null");
    *out = new pshard_tier_table{pshard::parse_tier_table(pshard::read_file(path))};
  });
}

pshard_status pshard_tier_table_save(const pshard_tier_table* table,
                                     const char* path) {
  return guarded([&] {
    require(table != nullptr && path != nullptr, "null argument");
    pshard::write_file(path, pshard::serialize_tier_table(table->table));
  });
}

pshard_status pshard_tier_table_to_text(const pshard_tier_table* table,
                                        pshard_text** out) {
  return guarded([&] {
    require_out(out);
    require(table != nullptr, "table is null");
    *out = new pshard_text{pshard::serialize_tier_table(table->table)};
  });
}

size_t pshard_tier_table_size(const pshard_tier_table* table) {
  return table ? table->table.tiers.size() : 0;
}

uint64_t pshard_tier_table_context(const pshard_tier_table* table) {
  return table ? table->table.context_len : 0;
}

pshard_status pshard_tier_table_info(const pshard_tier_table* table, size_t index,
                                     pshard_tier_info* out) {
  return guarded([&] {
    require(table != nullptr && out != nullptr, "null argument");
    require(index < table->table.tiers.size(), "tier index out of range");
    const pshard::TierEntry& e = table->table.tiers[index];
    pshard_tier_info info{};
    info.tier = e.tier;
    info.feasible = e.feasible ? 1 : 0;
    if (e.feasible) {
      info.kind = static_cast<pshard_plan_kind>(e.plan.kind);
      info.estimated_time_s = e.plan.estimated_time;
      info.pcie_h2d_bytes = e.plan.pcie_h2d_bytes;
      info.pcie_d2h_bytes = e.plan.pcie_d2h_bytes;
      info.pinned_bytes = e.plan.pinned_bytes;
      info.scratch_bytes = e.plan.scratch_bytes_required;
      for (const pshard::Placement& p : e.plan.placements) {
        if (p.exec == pshard::Backend::kCpu) ++info.cpu_shards;
        if (pshard::streams_h2d(p.streaming)) ++info.streamed_shards;
      }
    }
    *out = info;
  });
}

pshard_status pshard_pick_tier(const pshard_tier_table* table,
                               uint64_t batch_new_tokens, uint64_t* out_tier) {
  return guarded([&] {
    require(table != nullptr && out_tier != nullptr, "null argument");
    *out_tier = pshard::pick_tier(table->table, batch_new_tokens);
  });
}

void pshard_tier_table_free(pshard_tier_table* table) { delete table; }

pshard_status pshard_simulate(const pshard_model* model,
                              const pshard_machine* machine,
                              const pshard_tier_table* table, uint64_t prompt_len,
                              uint64_t gen_len, uint64_t batch,
                              pshard_sim_metrics* out, pshard_text** iteration_log) {
  return guarded([&] {
    require(model && machine && table && out, "null argument");
    if (iteration_log) *iteration_log = nullptr;
    require(batch >= 1, "batch must be >= 1");
    const pshard::TierTable& t = table->table;
    require(t.model == model->spec->name, "tier table was planned for another model");
    require(batch * (prompt_len + gen_len) <= t.context_len,
            "tier table context is shorter than batch * (prompt + gen)");
    const std::vector<pshard::SubLayerShard> shards =
        pshard::build_shards(model->spec, t.context_len);
    const std::vector<pshard::Request> requests(batch,
                                                pshard::Request{prompt_len, gen_len});
    const pshard::SimResult r =
        pshard::simulate_inference(requests, t, shards, machine->spec);
    out->ttft_s = r.ttft;
    out->tps = r.tps;
    out->e2el_s = r.e2el;
    out->decode_tokens = r.decode_tokens;
    out->iterations = r.iterations.size();
    if (iteration_log) {
      std::ostringstream log;
      log << "# iteration tier plan new_tokens passes latency_s busy_cpu_s "
             "busy_gpu_s busy_h2d_s busy_d2h_s\n";
      for (size_t i = 0; i < r.iterations.size(); ++i) {
        const pshard::IterationRecord& it = r.iterations[i];
        log << i << " " << it.tier << " " << pshard::to_string(it.kind) << " "
            << it.new_tokens << " " << it.passes << " "
            << pshard::format_double(it.latency);
        for (double b : it.busy) log << " " << pshard::format_double(b);
        log << "\n";
      }
      *iteration_log = new pshard_text{log.str()};
    }
  });
}

pshard_status pshard_sweep(const pshard_sweep_config* config, pshard_text** csv) {
  return guarded([&] {
    require_out(csv);
    require(config && config->machine && config->profile, "null argument");
    pshard::SweepConfig c;
    c.models = copy_models(config->models, config->n_models);
    c.machine = config->machine->spec;
    c.db = &config->profile->db;
    c.budgets_mb = copy_axis(config->budgets_mb, config->n_budgets, "budgets");
    for (uint64_t b : c.budgets_mb) budget_bytes_from_mb(b);
    c.contexts = copy_axis(config->contexts, config->n_contexts, "contexts");
    c.batches = copy_axis(config->batches, config->n_batches, "batches");
    c.gen_len = config->gen_len;
    c.threads = config->threads;
    c.workers = config->workers;
    const std::vector<pshard::SweepRow> rows = pshard::run_sweep(c);
    *csv = new pshard_text{pshard::sweep_csv(rows)};
  });
}

pshard_status pshard_validate(const pshard_validate_config* config,
                              pshard_validate_summary* out, pshard_text** report) {
  return guarded([&] {
    require(config && config->machine && config->profile && out, "null argument");
    if (report) *report = nullptr;
    pshard::ValidateConfig c;
    c.models = copy_models(config->models, config->n_models);
    c.machine = config->machine->spec;
    c.db = &config->profile->db;
    c.pcie_rates = copy_axis(config->pcie_rates, config->n_pcie_rates, "pcie rates");
    c.thread_counts =
        copy_axis(config->thread_counts, config->n_thread_counts, "thread counts");
    c.contexts = copy_axis(config->contexts, config->n_contexts, "contexts");
    c.budgets_mb = copy_axis(config->budgets_mb, config->n_budgets, "budgets");
    for (uint64_t b : c.budgets_mb) budget_bytes_from_mb(b);
    c.tier = config->tier ? config->tier : 1;
    c.sample = config->sample;
    c.seed = config->seed;
    c.workers = config->workers;
    const pshard::ValidateReport r = pshard::run_validate(c);
    pshard_validate_summary s{};
    s.configurations = r.cases.size();
    s.feasible = r.feasible;
    s.agree = r.agree;
    s.agreement = r.agreement();
    for (size_t k = 0; k < 3; ++k) {
      s.oracle_wins[k] = r.oracle_wins[k];
      s.planner_wins[k] = r.planner_wins[k];
    }
    if (config->witness_dir != nullptr) {
      const auto witnesses = pshard::pick_witnesses(r);
      for (size_t k = 0; k < 3; ++k) {
        if (witnesses[k] == nullptr) continue;
        const std::string kind(pshard::to_string(static_cast<pshard::PlanKind>(k)));
        std::string lower;
        for (char ch : kind) lower += static_cast<char>(std::tolower(ch));
        pshard::write_file(std::string(config->witness_dir) + "/" + lower + ".witness",
                           pshard::format_witness(*witnesses[k], c.machine.name, c.tier));
      }
    }
    *out = s;
    if (report) *report = new pshard_text{pshard::format_validate_report(r)};
  });
}

pshard_status pshard_vision_load(const char* path, pshard_vision** out) {
  return guarded([&] {
    require_out(out);
    require(path != nullptr, "path is null");
    *out = new pshard_vision{pshard::load_vision_spec(path)};
  });
}

void pshard_vision_free(pshard_vision* vision) { delete vision; }

pshard_status pshard_vlm_memory(const pshard_vision* vision, uint64_t width_px,
                                uint64_t height_px, uint64_t vision_budget_bytes,
                                uint64_t language_peak_bytes, int offload_weights,
                                pshard_vlm_report* out) {
  return guarded([&] {
    require(vision != nullptr && out != nullptr, "null argument");
    const pshard::VisionSpec& v = vision->spec;
    pshard_vlm_report r{};
    r.tokens = pshard::vision_token_count(v, width_px, height_px);
    r.naive_peak_bytes = pshard::naive_attn_peak_bytes(v, r.tokens);
    r.q_chunk = pshard::choose_chunk(v, r.tokens, vision_budget_bytes);
    r.flash_peak_bytes = pshard::flash_attn_peak_bytes(v, r.tokens, r.q_chunk);
    r.vision_peak_bytes = pshard::vision_vram_peak(v, r.tokens, r.q_chunk, false);
    r.vision_peak_offload_bytes =
        pshard::vision_vram_peak(v, r.tokens, r.q_chunk, true);
    const uint64_t vision_peak =
        offload_weights ? r.vision_peak_offload_bytes : r.vision_peak_bytes;
    r.serialized_bytes = pshard::peak_vram(vision_peak, language_peak_bytes, true);
    r.overlapped_bytes = pshard::peak_vram(vision_peak, language_peak_bytes, false);
    *out = r;
  });
}

}  // extern "C"
