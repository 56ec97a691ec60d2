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

// pshard command line: profile, plan, simulate, sweep, vlm-mem, validate.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pshard/pshard.h"

namespace {

// Failure carrying the library status to use as exit code.
struct CliError : std::runtime_error {
  CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

void check(pshard_status s, const std::string& context) {
  if (s == PSHARD_OK) return;
  throw CliError(static_cast<int>(s), context + ": " + pshard_status_name(s) +
                                          ": " + pshard_last_error());
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ModelPtr = std::unique_ptr<pshard_model, Deleter<pshard_model, pshard_model_free>>;
using MachinePtr =
    std::unique_ptr<pshard_machine, Deleter<pshard_machine, pshard_machine_free>>;
using ProfilePtr =
    std::unique_ptr<pshard_profile, Deleter<pshard_profile, pshard_profile_free>>;
using TablePtr = std::unique_ptr<pshard_tier_table,
                                 Deleter<pshard_tier_table, pshard_tier_table_free>>;
using VisionPtr = std::unique_ptr<pshard_vision, Deleter<pshard_vision, pshard_vision_free>>;
using TextPtr = std::unique_ptr<pshard_text, Deleter<pshard_text, pshard_text_free>>;

ModelPtr load_model(const std::string& path) {
  pshard_model* m = nullptr;
  check(pshard_model_load(path.c_str(), &m), "loading model " + path);
  return ModelPtr(m);
}

MachinePtr load_machine(const std::string& path) {
  pshard_machine* m = nullptr;
  check(pshard_machine_load(path.c_str(), &m), "loading machine " + path);
  return MachinePtr(m);
}

// Loads `path` if given, otherwise synthesizes a profile for the machine.
ProfilePtr obtain_profile(const std::string& path, const pshard_machine* machine) {
  pshard_profile* p = nullptr;
  if (path.empty()) {
    check(pshard_profile_synthesize(machine, &p), "synthesizing profile");
  } else {
    check(pshard_profile_load(path.c_str(), &p), "loading profile " + path);
  }
  return ProfilePtr(p);
}

// "4G" and "4000" (MB) both mean 4000 MB; budgets are multiples of 1000 MB.
uint64_t parse_budget_mb(const std::string& text) {
  if (text.empty()) throw CliError(1, "empty budget");
  std::string digits = text;
  uint64_t scale = 1;
  if (digits.back() == 'G' || digits.back() == 'g') {
    digits.pop_back();
    scale = 1000;
  } else if (digits.size() > 2 && (digits.ends_with("MB") || digits.ends_with("mb"))) {
    digits.resize(digits.size() - 2);
  }
  size_t used = 0;
  uint64_t value = 0;
  try {
    value = std::stoull(digits, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != digits.size()) {
    throw CliError(1, "cannot parse budget '" + text + "'");
  }
  value *= scale;
  if (value == 0 || value % 1000 != 0) {
    throw CliError(1, "budget '" + text + "' must be a positive multiple of 1000 MB");
  }
  return value;
}

// Token counts accept a K suffix (x1024).
uint64_t parse_tokens(const std::string& text) {
  std::string digits = text;
  uint64_t scale = 1;
  if (!digits.empty() && (digits.back() == 'K' || digits.back() == 'k')) {
    digits.pop_back();
    scale = 1024;
  }
  size_t used = 0;
  uint64_t value = 0;
  try {
    value = std::stoull(digits, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != digits.size() || value == 0) {
    throw CliError(1, "cannot parse token count '" + text + "'");
  }
  return value * scale;
}

std::vector<uint64_t> parse_budget_list(const std::vector<std::string>& items) {
  std::vector<uint64_t> out;
  for (const auto& s : items) out.push_back(parse_budget_mb(s));
  return out;
}

std::vector<uint64_t> parse_token_list(const std::vector<std::string>& items) {
  std::vector<uint64_t> out;
  for (const auto& s : items) out.push_back(parse_tokens(s));
  return out;
}

void emit(const std::string& path, const char* data, size_t size) {
  if (path.empty() || path == "-") {
    std::fwrite(data, 1, size, stdout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  f.write(data, static_cast<std::streamsize>(size));
  if (!f) throw CliError(PSHARD_IO_ERROR, "cannot write " + path);
}

void print_table_summary(const pshard_tier_table* table) {
  std::printf("%-6s %-8s %14s %12s %12s %9s %5s\n", "tier", "plan", "est_ms",
              "h2d_MB", "d2h_MB", "streamed", "cpu");
  for (size_t i = 0; i < pshard_tier_table_size(table); ++i) {
    pshard_tier_info info{};
    check(pshard_tier_table_info(table, i, &info), "reading tier table");
    if (!info.feasible) {
      std::printf("%-6llu %-8s\n", static_cast<unsigned long long>(info.tier),
                  "-");
      continue;
    }
    std::printf("%-6llu %-8s %14.4f %12.2f %12.2f %9zu %5zu\n",
                static_cast<unsigned long long>(info.tier),
                pshard_plan_kind_name(info.kind), info.estimated_time_s * 1e3,
                info.pcie_h2d_bytes / 1e6, info.pcie_d2h_bytes / 1e6,
                info.streamed_shards, info.cpu_shards);
  }
}

struct Common {
  std::string machine;
  std::string profile;
  uint32_t threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_threads = true) {
  cmd->add_option("--machine", c.machine, "Machine spec file")->required();
  cmd->add_option("--profile", c.profile,
                  "Profile file (synthesized from the machine if omitted)");
  if (with_threads) {
    cmd->add_option("--threads", c.threads, "CPU threads (0 = all available)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pshard: sub-layer sharding planner and simulator for CPU-GPU inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pshard_version()));

  // profile
  std::string profile_machine, profile_out;
  auto* profile_cmd = app.add_subcommand("profile", "Synthesize a kernel profile");
  profile_cmd->add_option("--machine", profile_machine, "Machine spec file")->required();
  profile_cmd->add_option("--out", profile_out, "Output file (stdout if omitted)");

  // plan
  Common plan_c;
  std::string plan_model, plan_budget, plan_context = "4096", plan_out;
  auto* plan_cmd = app.add_subcommand("plan", "Build the token-tier table");
  plan_cmd->add_option("--model", plan_model, "Model spec file")->required();
  add_common(plan_cmd, plan_c);
  plan_cmd->add_option("--budget", plan_budget, "VRAM budget, e.g. 8G or 8000")->required();
  plan_cmd->add_option("--context", plan_context, "Context length in tokens");
  plan_cmd->add_option("--out", plan_out, "Write the tier table to this file");

  // simulate
  Common sim_c;
  std::string sim_model, sim_budget, sim_table, sim_prompt = "1024";
  uint64_t sim_gen = 100, sim_batch = 1;
  bool sim_log = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate one batch of requests");
  sim_cmd->add_option("--model", sim_model, "Model spec file")->required();
  add_common(sim_cmd, sim_c);
  sim_cmd->add_option("--budget", sim_budget, "VRAM budget (when planning)");
  sim_cmd->add_option("--table", sim_table, "Existing tier table instead of planning");
  sim_cmd->add_option("--prompt", sim_prompt, "Prompt tokens per request");
  sim_cmd->add_option("--gen", sim_gen, "Generated tokens per request");
  sim_cmd->add_option("--batch", sim_batch, "Requests in the batch");
  sim_cmd->add_flag("--log", sim_log, "Print the per-iteration log");

  // sweep
  Common sweep_c;
  std::vector<std::string> sweep_models;
  std::vector<std::string> sweep_budgets{"2G", "4G", "6G", "8G", "12G", "16G", "24G", "32G"};
  std::vector<std::string> sweep_contexts{"1K", "4K", "16K", "64K"};
  std::vector<uint64_t> sweep_batches{1};
  uint64_t sweep_gen = 100;
  uint32_t sweep_workers = 1;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep budgets, contexts and batch sizes");
  sweep_cmd->add_option("--models", sweep_models, "Model spec files")->required()->delimiter(',');
  add_common(sweep_cmd, sweep_c);
  sweep_cmd->add_option("--budgets", sweep_budgets, "VRAM budgets")->delimiter(',');
  sweep_cmd->add_option("--contexts", sweep_contexts, "Prompt lengths")->delimiter(',');
  sweep_cmd->add_option("--batches", sweep_batches, "Batch sizes")->delimiter(',');
  sweep_cmd->add_option("--gen", sweep_gen, "Generated tokens per request");
  sweep_cmd->add_option("--workers", sweep_workers, "Rows simulated concurrently");
  sweep_cmd->add_option("--out", sweep_out, "CSV output (stdout if omitted)");

  // vlm-mem
  std::string vlm_vision, vlm_budget = "2G";
  uint64_t vlm_width = 2560, vlm_height = 1440, vlm_language_mb = 0;
  bool vlm_offload = false;
  auto* vlm_cmd = app.add_subcommand("vlm-mem", "Vision encoder memory model");
  vlm_cmd->add_option("--vision", vlm_vision, "Vision spec file")->required();
  vlm_cmd->add_option("--width", vlm_width, "Image width in pixels");
  vlm_cmd->add_option("--height", vlm_height, "Image height in pixels");
  vlm_cmd->add_option("--budget", vlm_budget, "Vision VRAM budget, e.g. 2G");
  vlm_cmd->add_option("--language-peak-mb", vlm_language_mb,
                      "Language-model peak VRAM in MB");
  vlm_cmd->add_flag("--offload-weights", vlm_offload,
                    "Keep vision weights in system RAM");

  // validate
  Common val_c;
  std::vector<std::string> val_models;
  std::vector<double> val_pcie{13e9, 50e9};
  std::vector<uint32_t> val_threads{1, 16};
  std::vector<std::string> val_contexts{"4K", "16K"};
  std::vector<std::string> val_budgets{"2G", "4G", "6G", "8G", "12G", "16G", "24G", "32G"};
  uint64_t val_tier = 1, val_sample = 0, val_seed = 1;
  uint32_t val_workers = 1;
  double val_threshold = 0.95;
  std::string val_out, val_witness;
  auto* val_cmd = app.add_subcommand("validate", "Compare planner choices with the oracle");
  val_cmd->add_option("--models", val_models, "Model spec files")->required()->delimiter(',');
  add_common(val_cmd, val_c, false);
  val_cmd->add_option("--pcie", val_pcie, "PCIe rates in bytes/s")->delimiter(',');
  val_cmd->add_option("--thread-counts", val_threads, "CPU thread counts")->delimiter(',');
  val_cmd->add_option("--contexts", val_contexts, "Context lengths")->delimiter(',');
  val_cmd->add_option("--budgets", val_budgets, "VRAM budgets")->delimiter(',');
  val_cmd->add_option("--tier", val_tier, "Token tier to compare at");
  val_cmd->add_option("--sample", val_sample, "Random subset size (0 = full grid)");
  val_cmd->add_option("--seed", val_seed, "Seed for --sample");
  val_cmd->add_option("--threshold", val_threshold, "Minimum agreement to pass");
  val_cmd->add_option("--workers", val_workers, "Configurations run concurrently");
  val_cmd->add_option("--out", val_out, "Per-configuration report file");
  val_cmd->add_option("--witness-dir", val_witness,
                      "Write one witness configuration per winning plan kind");

  CLI11_PARSE(app, argc, argv);

  try {
    if (profile_cmd->parsed()) {
      MachinePtr machine = load_machine(profile_machine);
      ProfilePtr profile = obtain_profile("", machine.get());
      if (profile_out.empty()) {
        pshard_text* t = nullptr;
        check(pshard_profile_to_text(profile.get(), &t), "serializing profile");
        TextPtr text(t);
        emit("", pshard_text_data(t), pshard_text_size(t));
      } else {
        check(pshard_profile_save(profile.get(), profile_out.c_str()), "saving profile");
        std::fprintf(stderr, "wrote %zu entries to %s\n",
                     pshard_profile_entry_count(profile.get()), profile_out.c_str());
      }
      return 0;
    }

    if (plan_cmd->parsed()) {
      ModelPtr model = load_model(plan_model);
      MachinePtr machine = load_machine(plan_c.machine);
      ProfilePtr profile = obtain_profile(plan_c.profile, machine.get());
      pshard_tier_table* t = nullptr;
      check(pshard_plan(model.get(), machine.get(), profile.get(),
                        parse_budget_mb(plan_budget), parse_tokens(plan_context),
                        plan_c.threads, &t),
            "planning");
      TablePtr table(t);
      std::printf("model %s machine %s budget %lluMB context %llu\n",
                  pshard_model_name(model.get()), pshard_machine_name(machine.get()),
                  static_cast<unsigned long long>(parse_budget_mb(plan_budget)),
                  static_cast<unsigned long long>(parse_tokens(plan_context)));
      print_table_summary(table.get());
      if (!plan_out.empty()) {
        check(pshard_tier_table_save(table.get(), plan_out.c_str()), "saving tier table");
      }
      return 0;
    }

    if (sim_cmd->parsed()) {
      ModelPtr model = load_model(sim_model);
      MachinePtr machine = load_machine(sim_c.machine);
      const uint64_t prompt = parse_tokens(sim_prompt);
      pshard_tier_table* t = nullptr;
      if (!sim_table.empty()) {
        check(pshard_tier_table_load(sim_table.c_str(), &t), "loading " + sim_table);
      } else {
        if (sim_budget.empty()) throw CliError(1, "either --budget or --table is required");
        ProfilePtr profile = obtain_profile(sim_c.profile, machine.get());
        check(pshard_plan(model.get(), machine.get(), profile.get(),
                          parse_budget_mb(sim_budget), sim_batch * (prompt + sim_gen),
                          sim_c.threads, &t),
              "planning");
      }
      TablePtr table(t);
      pshard_sim_metrics m{};
      pshard_text* log = nullptr;
      check(pshard_simulate(model.get(), machine.get(), table.get(), prompt, sim_gen,
                            sim_batch, &m, sim_log ? &log : nullptr),
            "simulating");
      TextPtr log_text(log);
      if (sim_log) emit("", pshard_text_data(log), pshard_text_size(log));
      std::printf("ttft_s=%.6g tps=%.6g e2el_s=%.6g decode_tokens=%llu iterations=%zu\n",
                  m.ttft_s, m.tps, m.e2el_s,
                  static_cast<unsigned long long>(m.decode_tokens), m.iterations);
      return 0;
    }

    if (sweep_cmd->parsed()) {
      std::vector<ModelPtr> models;
      std::vector<const pshard_model*> handles;
      for (const auto& p : sweep_models) {
        models.push_back(load_model(p));
        handles.push_back(models.back().get());
      }
      MachinePtr machine = load_machine(sweep_c.machine);
      ProfilePtr profile = obtain_profile(sweep_c.profile, machine.get());
      const std::vector<uint64_t> budgets = parse_budget_list(sweep_budgets);
      const std::vector<uint64_t> contexts = parse_token_list(sweep_contexts);
      pshard_sweep_config cfg{};
      cfg.models = handles.data();
      cfg.n_models = handles.size();
      cfg.machine = machine.get();
      cfg.profile = profile.get();
      cfg.budgets_mb = budgets.data();
      cfg.n_budgets = budgets.size();
      cfg.contexts = contexts.data();
      cfg.n_contexts = contexts.size();
      cfg.batches = sweep_batches.data();
      cfg.n_batches = sweep_batches.size();
      cfg.gen_len = sweep_gen;
      cfg.threads = sweep_c.threads;
      cfg.workers = sweep_workers;
      pshard_text* csv = nullptr;
      check(pshard_sweep(&cfg, &csv), "sweeping");
      TextPtr text(csv);
      emit(sweep_out, pshard_text_data(csv), pshard_text_size(csv));
      return 0;
    }

    if (vlm_cmd->parsed()) {
      pshard_vision* v = nullptr;
      check(pshard_vision_load(vlm_vision.c_str(), &v), "loading " + vlm_vision);
      VisionPtr vision(v);
      pshard_vlm_report r{};
      check(pshard_vlm_memory(vision.get(), vlm_width, vlm_height,
                              parse_budget_mb(vlm_budget) * 1000000,
                              vlm_language_mb * 1000000, vlm_offload ? 1 : 0, &r),
            "vision memory");
      std::printf("tokens %llu\n", static_cast<unsigned long long>(r.tokens));
      std::printf("naive_peak_bytes %llu\n",
                  static_cast<unsigned long long>(r.naive_peak_bytes));
      std::printf("q_chunk %llu\n", static_cast<unsigned long long>(r.q_chunk));
      std::printf("flash_peak_bytes %llu\n",
                  static_cast<unsigned long long>(r.flash_peak_bytes));
      std::printf("vision_peak_bytes %llu\n",
                  static_cast<unsigned long long>(r.vision_peak_bytes));
      std::printf("vision_peak_offload_bytes %llu\n",
                  static_cast<unsigned long long>(r.vision_peak_offload_bytes));
      std::printf("serialized_bytes %llu\n",
                  static_cast<unsigned long long>(r.serialized_bytes));
      std::printf("overlapped_bytes %llu\n",
                  static_cast<unsigned long long>(r.overlapped_bytes));
      return 0;
    }

    if (val_cmd->parsed()) {
      std::vector<ModelPtr> models;
      std::vector<const pshard_model*> handles;
      for (const auto& p : val_models) {
        models.push_back(load_model(p));
        handles.push_back(models.back().get());
      }
      MachinePtr machine = load_machine(val_c.machine);
      ProfilePtr profile = obtain_profile(val_c.profile, machine.get());
      const std::vector<uint64_t> budgets = parse_budget_list(val_budgets);
      const std::vector<uint64_t> contexts = parse_token_list(val_contexts);
      pshard_validate_config cfg{};
      cfg.models = handles.data();
      cfg.n_models = handles.size();
      cfg.machine = machine.get();
      cfg.profile = profile.get();
      cfg.pcie_rates = val_pcie.data();
      cfg.n_pcie_rates = val_pcie.size();
      cfg.thread_counts = val_threads.data();
      cfg.n_thread_counts = val_threads.size();
      cfg.contexts = contexts.data();
      cfg.n_contexts = contexts.size();
      cfg.budgets_mb = budgets.data();
      cfg.n_budgets = budgets.size();
      cfg.tier = val_tier;
      cfg.sample = val_sample;
      cfg.seed = val_seed;
      cfg.workers = val_workers;
      cfg.witness_dir = val_witness.empty() ? nullptr : val_witness.c_str();
      pshard_validate_summary s{};
      pshard_text* report = nullptr;
      check(pshard_validate(&cfg, &s, &report), "validating");
      TextPtr text(report);
      if (!val_out.empty()) emit(val_out, pshard_text_data(report), pshard_text_size(report));
      std::printf("configurations %zu feasible %zu agree %zu agreement %.4f\n",
                  s.configurations, s.feasible, s.agree, s.agreement);
      std::printf("oracle wins: GpuOnly %zu Static %zu Dynamic %zu\n",
                  s.oracle_wins[0], s.oracle_wins[1], s.oracle_wins[2]);
      std::printf("planner picks: GpuOnly %zu Static %zu Dynamic %zu\n",
                  s.planner_wins[0], s.planner_wins[1], s.planner_wins[2]);
      const bool pass = s.agreement >= val_threshold;
      std::printf("%s (threshold %.2f)\n", pass ? "PASS" : "FAIL", val_threshold);
      return pass ? 0 : 3;
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code ? e.code : 1;
  }
  return 0;
}
