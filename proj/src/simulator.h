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

// Discrete-event simulation of schedule plans on a modeled machine, the
// exhaustive oracle used to validate planner choices, and the sweep driver.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "machine.h"
#include "model_graph.h"
#include "planner.h"
#include "profile_db.h"

namespace pshard {

enum class Resource { kCpu = 0, kGpu, kPcieH2D, kPcieD2H };
inline constexpr size_t kNumResources = 4;
std::string_view to_string(Resource r);

struct ScheduleResult {
  double latency = 0.0;
  std::array<double, kNumResources> busy{};
  uint64_t h2d_bytes = 0;
  uint64_t d2h_bytes = 0;
};

// Ground-truth compute time of one shard, i.e. the sum of its kernels'
// machine times. Standalone unless `contended`.
double shard_compute_time(const SubLayerShard& shard, const PassShape& shape,
                          const MachineSpec& machine, Backend backend,
                          uint32_t threads, bool contended);

// Runs the shard chain once. One compute stream executes shards in order;
// two simplex PCIe channels carry streamed copies (H2D) and KV write-backs
// (D2H). A streamed copy starts once the previous copy is done and the slot
// it reuses was released by the compute two streamed shards back. Activation
// hand-offs between backends sit on the dependency edge and take priority on
// their channel. While the CPU computes and a channel is busy, CPU work runs
// at its contended rate and the channel at contention_alpha of its rate.
// Throws Error(kInfeasibleSchedule) if the plan's scratch reservation cannot
// double-buffer its largest streamed shard or the plan exceeds VRAM.
ScheduleResult simulate_schedule(const SchedulePlan& plan,
                                 std::span<const SubLayerShard> shards,
                                 const MachineSpec& machine,
                                 const PassShape& shape, uint32_t threads);

// Same recurrence over caller-supplied per-shard times and byte counts; the
// building block of simulate_schedule, exposed for hand-checkable traces.
struct PipelineStep {
  Backend exec = Backend::kGpu;
  double compute = 0.0;            // standalone seconds
  double compute_contended = 0.0;  // seconds when sharing memory with PCIe
  bool streamed = false;
  double h2d_seconds = 0.0;        // at full link rate
  double d2h_seconds = 0.0;        // write-back after compute
  double act_seconds = 0.0;        // hand-off before compute
  bool act_h2d = true;
};
ScheduleResult run_pipeline(std::span<const PipelineStep> steps,
                            double contention_alpha);

struct Request {
  uint64_t prompt_len = 1;
  uint64_t gen_len = 1;
};

struct IterationRecord {
  uint64_t tier = 0;
  PlanKind kind = PlanKind::kStatic;
  uint64_t new_tokens = 0;
  uint64_t passes = 0;
  double latency = 0.0;
  std::array<double, kNumResources> busy{};
};

struct SimResult {
  double ttft = 0.0;
  double tps = 0.0;
  double e2el = 0.0;
  uint64_t decode_tokens = 0;
  double decode_time = 0.0;
  std::vector<IterationRecord> iterations;
};

// Normalized end-to-end latency for a 100-token answer.
inline double e2el_from(double ttft, double tps) { return ttft + 100.0 / tps; }

// Runs one batch of requests that arrive together. Shards must be built for
// the table's context length.
SimResult simulate_inference(std::span<const Request> batch,
                             const TierTable& table,
                             std::span<const SubLayerShard> shards,
                             const MachineSpec& machine);

struct OracleResult {
  PlanKind best = PlanKind::kStatic;
  PlanKind planner_choice = PlanKind::kStatic;
  std::array<SchedulePlan, 3> plans;
  std::array<bool, 3> feasible{};
  std::array<double, 3> simulated{};  // indexed like plans
};

// Simulates the three candidate plans for one tier and returns the fastest
// feasible kind alongside what the planner's estimate picked. Throws
// Error(kInfeasibleBudget) if no plan is feasible or the budget exceeds VRAM.
OracleResult oracle_best_plan(std::span<const SubLayerShard> shards,
                              const MachineSpec& machine, const ProfileDb& db,
                              uint64_t budget_bytes, uint64_t tier,
                              uint64_t context_len, uint32_t threads);

// Sweep over budgets x contexts x batches for several models.
struct SweepConfig {
  std::vector<std::shared_ptr<const ModelSpec>> models;
  MachineSpec machine;
  const ProfileDb* db = nullptr;
  std::vector<uint64_t> budgets_mb;
  std::vector<uint64_t> contexts;
  std::vector<uint64_t> batches{1};
  uint64_t gen_len = 100;
  uint32_t threads = 0;   // CPU threads for inference; 0 means all available
  uint32_t workers = 1;   // concurrent rows
};

struct SweepRow {
  std::string model;
  uint64_t budget_mb = 0;
  uint64_t context = 0;
  uint64_t batch = 0;
  bool feasible = false;
  std::string error;
  double ttft = 0.0;
  double tps = 0.0;
  double e2el = 0.0;
  bool interactive = false;
  std::string digest;
};

// Interactive threshold on per-request decode throughput.
inline constexpr double kInteractiveTps = 5.0;

std::vector<SweepRow> run_sweep(const SweepConfig& config);
std::string sweep_csv(std::span<const SweepRow> rows);

// One letter per tier: G(puOnly), S(tatic), D(ynamic) or '-' if infeasible.
std::string plan_digest(const TierTable& table);

// Planner-vs-oracle grid.
struct ValidateConfig {
  std::vector<std::shared_ptr<const ModelSpec>> models;
  MachineSpec machine;
  const ProfileDb* db = nullptr;  // profile of `machine`; PCIe rates do not enter it
  std::vector<double> pcie_rates;
  std::vector<uint32_t> thread_counts;
  std::vector<uint64_t> contexts;
  std::vector<uint64_t> budgets_mb;
  uint64_t tier = 1;
  uint64_t sample = 0;  // 0 keeps the full grid
  uint64_t seed = 1;
  uint32_t workers = 1;
};

struct ValidateCase {
  std::string model;
  double pcie_rate = 0.0;
  uint32_t threads = 0;
  uint64_t context = 0;
  uint64_t budget_mb = 0;
  bool feasible = false;
  std::string error;
  OracleResult oracle;
};

struct ValidateReport {
  std::vector<ValidateCase> cases;
  size_t feasible = 0;
  size_t agree = 0;
  std::array<size_t, 3> oracle_wins{};   // indexed by PlanKind
  std::array<size_t, 3> planner_wins{};
  double agreement() const {
    return feasible ? static_cast<double>(agree) / feasible : 1.0;
  }
};

ValidateReport run_validate(const ValidateConfig& config);
std::string format_validate_report(const ValidateReport& report);

// Per plan kind, the feasible case where that kind wins the oracle by the
// widest relative margin, or nullptr if it never wins.
std::array<const ValidateCase*, 3> pick_witnesses(const ValidateReport& report);

// A replayable configuration whose oracle winner is recorded together with
// the simulated and estimated times behind it.
struct Witness {
  std::string model;
  std::string machine;
  double pcie_rate = 0.0;
  uint32_t threads = 0;
  uint64_t context = 0;
  uint64_t budget_mb = 0;
  uint64_t tier = 1;
  PlanKind winner = PlanKind::kStatic;
};

std::string format_witness(const ValidateCase& c, const std::string& machine,
                           uint64_t tier);
Witness parse_witness(std::string_view text);

}  // namespace pshard
