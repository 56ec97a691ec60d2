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

// Planning phase: VRAM budget split, priority pinning, the three candidate
// schedules per token tier, profile-based cost estimation and the tier table
// consulted at inference time.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "machine.h"
#include "model_graph.h"
#include "profile_db.h"

namespace pshard {

enum class Residency { kVramPinned, kSysRam };
enum class Streaming { kNone, kWeightsH2D, kKvH2D, kKvD2H, kWeightsAndKv };
enum class PlanKind { kGpuOnly, kStatic, kDynamic };

std::string_view to_string(Residency r);
std::string_view to_string(Streaming s);
std::string_view to_string(PlanKind k);
Residency parse_residency(std::string_view text);
Streaming parse_streaming(std::string_view text);
PlanKind parse_plan_kind(std::string_view text);

// Streaming semantics per pass:
//   WeightsH2D  shard weights copied into a scratch slot before compute.
//   KvH2D       the layer's KV cache copied into a scratch slot; the K/V rows
//               appended by the pass are written back device-to-host.
//   KvD2H       K/V rows appended on the GPU written back to sysRAM.
//   WeightsAndKv  WeightsH2D and KvH2D together.
// A SysRam shard executing on the GPU with Streaming::kNone is staged once
// into scratch and stays there for the lifetime of the plan.
struct Placement {
  uint32_t shard_id = 0;
  Residency residency = Residency::kSysRam;
  Backend exec = Backend::kCpu;
  Streaming streaming = Streaming::kNone;

  friend bool operator==(const Placement&, const Placement&) = default;
};

// Throws Error(kInvalidArgument) if the placement violates the residency /
// backend / streaming contract.
void validate_placement(const Placement& p);

inline bool streams_h2d(Streaming s) {
  return s == Streaming::kWeightsH2D || s == Streaming::kKvH2D ||
         s == Streaming::kWeightsAndKv;
}

struct SchedulePlan {
  PlanKind kind = PlanKind::kStatic;
  std::vector<Placement> placements;
  double estimated_time = 0.0;
  uint64_t pcie_h2d_bytes = 0;
  uint64_t pcie_d2h_bytes = 0;
  uint64_t pinned_bytes = 0;
  uint64_t scratch_bytes_required = 0;
  bool feasible = true;
  std::string infeasible_reason;

  uint64_t pcie_total_bytes() const { return pcie_h2d_bytes + pcie_d2h_bytes; }
};

// The supported batch-wide new-token tiers.
inline constexpr std::array<uint64_t, 11> kTokenTiers = {
    1, 4, 16, 32, 64, 512, 1024, 2048, 4096, 8192, 16384};

// Granularity of the smaller VRAM reservations a tier table also considers.
inline constexpr uint64_t kBudgetStep = 1000000000;

// Tiers up to this size are planned as batched decode (one new token per
// request, logits for every row); larger tiers as prefill chunks of a single
// request that only needs logits for its last token.
inline constexpr uint64_t kLargestDecodeTier = 64;

// Pass geometry the planner assumes for `tier` new tokens over a cache of
// `context_len` tokens.
PassShape planning_shape(uint64_t tier, uint64_t context_len);

// Peak intermediate tensor bytes of one pass.
uint64_t activation_peak_bytes(const ModelSpec& spec, const PassShape& shape);

// Bytes crossing PCIe when consecutive shards switch backend.
uint64_t activation_transfer_bytes(const ModelSpec& spec, const PassShape& shape);

struct BudgetSplit {
  uint64_t pinned = 0;
  uint64_t scratch = 0;
};

// scratch = min(budget, 2 * largest unpinned candidate + activation peak),
// where the candidates are the shards that do not fit when pinning into the
// budget minus the activation peak. Throws Error(kInfeasibleBudget) if the
// budget cannot even hold the activations.
BudgetSplit decide_scratch_budget(uint64_t budget,
                                  std::span<const SubLayerShard> shards,
                                  const PassShape& shape);

struct PinResult {
  std::vector<uint32_t> pinned;     // shard ids, in pinning (priority) order
  std::vector<uint32_t> remaining;  // shard ids, topological order
  uint64_t pinned_bytes = 0;
  uint64_t leftover = 0;
};

// Greedy first-fit over shards sorted by (priority, layer): a shard is pinned
// iff it fits in what is left of the budget when visited.
PinResult pin_shards(uint64_t pinned_budget, std::span<const SubLayerShard> shards);

// Inputs shared by estimation and plan generation for one tier.
struct PlanContext {
  const ProfileDb* db = nullptr;
  const MachineSpec* machine = nullptr;
  uint32_t threads = 0;
  PassShape shape;
  BudgetSplit budget;
};

// Per-shard PCIe traffic a plan implies for one pass.
struct ShardTransfers {
  uint64_t h2d_stream = 0;     // weights / KV copied in before compute
  uint64_t d2h_writeback = 0;  // appended K/V rows copied out after compute
  uint64_t act_in = 0;         // activations crossing into this shard
  bool act_in_h2d = false;     // direction of act_in
};

std::vector<ShardTransfers> plan_transfers(const SchedulePlan& plan,
                                           std::span<const SubLayerShard> shards,
                                           const PassShape& shape);

// Profile-based per-shard compute estimates, memoized per kernel key.
struct ShardEstimate {
  double gpu = 0.0;
  double cpu = 0.0;
  double cpu_contended = 0.0;
};

std::vector<ShardEstimate> estimate_shards(std::span<const SubLayerShard> shards,
                                           const PlanContext& ctx);

// Sum of per-window times. Each streamed shard's copy overlaps the compute
// window since the previous streamed shard (just the preceding shard when
// streamed shards are adjacent); write-backs overlap the following shard.
// A window's time is the max of its compute and its concurrent transfers.
// CPU work in a window with transfers uses contended profile entries and
// the link runs at contention_alpha of its rate. Activation crossings are
// serial.
double estimate_plan_time(const SchedulePlan& plan,
                          std::span<const SubLayerShard> shards,
                          const PlanContext& ctx);
double estimate_plan_time(const SchedulePlan& plan,
                          std::span<const SubLayerShard> shards,
                          const PlanContext& ctx,
                          std::span<const ShardEstimate> estimates);

// GpuOnly, Static and Dynamic plans (in that order) for the unpinned shards.
// Plans that cannot satisfy the scratch budget come back with
// feasible=false.
std::array<SchedulePlan, 3> heuristic_split(std::span<const SubLayerShard> shards,
                                            const PinResult& pins,
                                            const PlanContext& ctx);

// Minimum estimated time; ties go to fewer PCIe bytes, then
// Static < Dynamic < GpuOnly. Returns nullptr if no plan is feasible.
const SchedulePlan* select_best_plan(std::span<const SchedulePlan> plans);

struct TierEntry {
  uint64_t tier = 0;
  bool feasible = false;
  std::string infeasible_reason;
  BudgetSplit split;
  SchedulePlan plan;
};

struct TierTable {
  std::string model;
  std::string machine;
  uint64_t budget_bytes = 0;
  uint64_t context_len = 0;
  uint32_t threads = 0;
  std::vector<TierEntry> tiers;  // one per kTokenTiers element, same order
};

// Plans every tier. Each tier keeps the fastest estimate over the budget and
// every smaller reservation in kBudgetStep decrements. Tiers whose activations
// alone exceed the budget are kept as infeasible entries; throws
// Error(kInfeasibleBudget) when no tier is feasible.
TierTable build_tier_table(std::shared_ptr<const ModelSpec> spec,
                           const MachineSpec& machine, const ProfileDb& db,
                           uint64_t budget_bytes, uint64_t context_len,
                           uint32_t threads);

// argmin over tiers of ceil(tokens / tier) * time[tier]; ties go to the
// smaller tier. Infeasible tiers are skipped.
uint64_t pick_tier(const TierTable& table, uint64_t batch_new_tokens);
// Index form over parallel arrays; entries with a negative time are skipped.
size_t pick_tier_index(std::span<const uint64_t> tiers,
                       std::span<const double> times, uint64_t batch_new_tokens);

const TierEntry& tier_entry(const TierTable& table, uint64_t tier);

std::string serialize_tier_table(const TierTable& table);
TierTable parse_tier_table(std::string_view text);

}  // namespace pshard
