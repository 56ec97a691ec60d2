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

#include "planner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace pshard {

namespace {

constexpr std::string_view kTierTableHeader = "pshard-tiertable v1";
constexpr double kInf = std::numeric_limits<double>::infinity();

// Memoized profile lookups; one instance per planning run.
class KernelTimer {
 public:
  explicit KernelTimer(const ProfileDb& db) : db_(db) {}

  double time(const ShardKernel& k, Backend backend, uint32_t threads,
              Contention contention) {
    KernelKey key{k.op, k.quant, backend, threads, contention, k.dims};
    auto it = memo_.find(key);
    if (it == memo_.end()) {
      Match m;
      if ((m.entry = db_.lookup_exact(key)) != nullptr) {
        m.exact = true;
      } else {
        m.entry = db_.lookup_nearest(key);
      }
      it = memo_.emplace(std::move(key), m).first;
    }
    const Match& m = it->second;
    if (m.entry == nullptr) return 0.0;
    if (m.exact) return k.work.flops / m.entry->flops_per_sec;
    return roofline_time(k.work.flops, k.work.bytes(), *m.entry);
  }

 private:
  struct Match {
    const ProfileEntry* entry = nullptr;
    bool exact = false;
  };
  const ProfileDb& db_;
  std::map<KernelKey, Match> memo_;
};

std::vector<ShardEstimate> estimate_with(KernelTimer& timer,
                                         std::span<const SubLayerShard> shards,
                                         const PassShape& shape,
                                         uint32_t threads) {
  std::vector<ShardEstimate> out(shards.size());
  for (size_t i = 0; i < shards.size(); ++i) {
    ShardEstimate& e = out[i];
    if (threads == 0) e.cpu = e.cpu_contended = kInf;
    for (const ShardKernel& k : shards[i].kernels(shape)) {
      e.gpu += timer.time(k, Backend::kGpu, 0, Contention::kStandalone);
      if (threads > 0) {
        e.cpu += timer.time(k, Backend::kCpu, threads, Contention::kStandalone);
        e.cpu_contended +=
            timer.time(k, Backend::kCpu, threads, Contention::kUnderPcieTraffic);
      }
    }
  }
  return out;
}

uint64_t stream_bytes(const SubLayerShard& s, const PassShape& shape) {
  return s.kind() == ShardKind::kKvCache ? s.bytes_at(shape.kv_tokens)
                                         : s.weight_bytes();
}

Placement pinned_placement(uint32_t id) {
  return {id, Residency::kVramPinned, Backend::kGpu, Streaming::kNone};
}

Placement cpu_placement(uint32_t id) {
  return {id, Residency::kSysRam, Backend::kCpu, Streaming::kNone};
}

Placement streamed_placement(const SubLayerShard& s) {
  return {s.id(), Residency::kSysRam, Backend::kGpu,
          s.kind() == ShardKind::kKvCache ? Streaming::kKvH2D
                                          : Streaming::kWeightsH2D};
}

Placement staged_placement(uint32_t id) {
  return {id, Residency::kSysRam, Backend::kGpu, Streaming::kNone};
}

// Visiting order of layers that spreads any prefix evenly over the stack:
// 0, L/2, L/4, 3L/4, ... (bit-reversed counting, skipping out-of-range).
std::vector<uint32_t> spread_rank(uint32_t n_layers) {
  uint32_t bits = 0;
  while ((uint32_t{1} << bits) < n_layers) ++bits;
  std::vector<uint32_t> rank(n_layers + 1, 0);
  uint32_t next = 0;
  for (uint32_t i = 0; i < (uint32_t{1} << bits); ++i) {
    uint32_t r = 0;
    for (uint32_t b = 0; b < bits; ++b) {
      if (i & (uint32_t{1} << b)) r |= uint32_t{1} << (bits - 1 - b);
    }
    if (r < n_layers) rank[r] = next++;
  }
  rank[n_layers] = next;  // output head
  return rank;
}

void finalize_plan(SchedulePlan& plan, std::span<const SubLayerShard> shards,
                   const PlanContext& ctx,
                   std::span<const ShardEstimate> estimates,
                   uint64_t pinned_bytes) {
  plan.pinned_bytes = pinned_bytes;
  if (!plan.feasible) return;
  plan.pcie_h2d_bytes = 0;
  plan.pcie_d2h_bytes = 0;
  for (const ShardTransfers& t : plan_transfers(plan, shards, ctx.shape)) {
    plan.pcie_h2d_bytes += t.h2d_stream + (t.act_in_h2d ? t.act_in : 0);
    plan.pcie_d2h_bytes += t.d2h_writeback + (t.act_in_h2d ? 0 : t.act_in);
  }
  plan.estimated_time = estimate_plan_time(plan, shards, ctx, estimates);
}

bool better_plan(const SchedulePlan& a, const SchedulePlan& b) {
  if (a.estimated_time != b.estimated_time) {
    return a.estimated_time < b.estimated_time;
  }
  if (a.pcie_total_bytes() != b.pcie_total_bytes()) {
    return a.pcie_total_bytes() < b.pcie_total_bytes();
  }
  auto rank = [](PlanKind k) {
    switch (k) {
      case PlanKind::kStatic: return 0;
      case PlanKind::kDynamic: return 1;
      case PlanKind::kGpuOnly: return 2;
    }
    return 3;
  };
  return rank(a.kind) < rank(b.kind);
}

}  // namespace

std::string_view to_string(Residency r) {
  return r == Residency::kVramPinned ? "VramPinned" : "SysRam";
}

std::string_view to_string(Streaming s) {
  switch (s) {
    case Streaming::kNone: return "None";
    case Streaming::kWeightsH2D: return "WeightsH2D";
    case Streaming::kKvH2D: return "KvH2D";
    case Streaming::kKvD2H: return "KvD2H";
    case Streaming::kWeightsAndKv: return "WeightsAndKv";
  }
  return "?";
}

std::string_view to_string(PlanKind k) {
  switch (k) {
    case PlanKind::kGpuOnly: return "GpuOnly";
    case PlanKind::kStatic: return "Static";
    case PlanKind::kDynamic: return "Dynamic";
  }
  return "?";
}

Residency parse_residency(std::string_view text) {
  if (text == "VramPinned") return Residency::kVramPinned;
  if (text == "SysRam") return Residency::kSysRam;
  fail(ErrorCode::kParse, "unknown residency '" + std::string(text) + "'");
}

Streaming parse_streaming(std::string_view text) {
  for (Streaming s : {Streaming::kNone, Streaming::kWeightsH2D, Streaming::kKvH2D,
                      Streaming::kKvD2H, Streaming::kWeightsAndKv}) {
    if (text == to_string(s)) return s;
  }
  fail(ErrorCode::kParse, "unknown streaming mode '" + std::string(text) + "'");
}

PlanKind parse_plan_kind(std::string_view text) {
  for (PlanKind k : {PlanKind::kGpuOnly, PlanKind::kStatic, PlanKind::kDynamic}) {
    if (text == to_string(k)) return k;
  }
  fail(ErrorCode::kParse, "unknown plan kind '" + std::string(text) + "'");
}

void validate_placement(const Placement& p) {
  if (p.residency == Residency::kVramPinned &&
      (p.exec != Backend::kGpu || p.streaming != Streaming::kNone)) {
    fail(ErrorCode::kInvalidArgument,
         "pinned shard " + std::to_string(p.shard_id) +
             " must execute on the GPU without streaming");
  }
  if (p.exec == Backend::kCpu &&
      (p.residency != Residency::kSysRam ||
       (p.streaming != Streaming::kNone && p.streaming != Streaming::kKvD2H))) {
    fail(ErrorCode::kInvalidArgument,
         "CPU shard " + std::to_string(p.shard_id) +
             " must live in sysRAM and may only stream KV write-backs");
  }
}

PassShape planning_shape(uint64_t tier, uint64_t context_len) {
  if (tier == 0) fail(ErrorCode::kInvalidArgument, "tier must be >= 1");
  PassShape s;
  s.new_tokens = tier;
  s.kv_tokens = context_len;
  if (tier <= kLargestDecodeTier) {
    s.attn_pairs = static_cast<double>(context_len);
    s.output_rows = tier;
  } else {
    s.attn_pairs = static_cast<double>(tier) * static_cast<double>(context_len);
    s.output_rows = 1;
  }
  return s;
}

uint64_t activation_peak_bytes(const ModelSpec& spec, const PassShape& shape) {
  const Rational act = spec.bytes_per_elem(TensorClass::kActivations);
  const uint64_t ffn_hidden =
      spec.moe ? spec.moe->top_k * spec.moe->expert_ffn_dim : spec.ffn_dim;
  const uint64_t elems = shape.new_tokens * (4 * spec.d_model + 2 * ffn_hidden) +
                         shape.output_rows * spec.vocab_size;
  return act.bytes_for(elems);
}

uint64_t activation_transfer_bytes(const ModelSpec& spec, const PassShape& shape) {
  return spec.bytes_per_elem(TensorClass::kActivations)
      .bytes_for(shape.new_tokens * spec.d_model);
}

PinResult pin_shards(uint64_t pinned_budget, std::span<const SubLayerShard> shards) {
  std::vector<uint32_t> order(shards.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    const auto ka = std::make_pair(shards[a].priority(), shards[a].layer_index());
    const auto kb = std::make_pair(shards[b].priority(), shards[b].layer_index());
    return ka < kb;
  });
  PinResult r;
  r.leftover = pinned_budget;
  std::vector<bool> pinned(shards.size(), false);
  for (uint32_t idx : order) {
    const uint64_t bytes = shards[idx].weight_bytes();
    if (bytes <= r.leftover) {
      r.leftover -= bytes;
      r.pinned_bytes += bytes;
      r.pinned.push_back(shards[idx].id());
      pinned[idx] = true;
    }
  }
  for (size_t i = 0; i < shards.size(); ++i) {
    if (!pinned[i]) r.remaining.push_back(shards[i].id());
  }
  return r;
}

BudgetSplit decide_scratch_budget(uint64_t budget,
                                  std::span<const SubLayerShard> shards,
                                  const PassShape& shape) {
  if (budget == 0) fail(ErrorCode::kInvalidArgument, "budget must be > 0");
  if (shards.empty()) fail(ErrorCode::kInvalidArgument, "no shards to plan");
  const uint64_t act = activation_peak_bytes(shards.front().spec(), shape);
  if (budget < act) {
    fail(ErrorCode::kInfeasibleBudget,
         "budget of " + std::to_string(budget) +
             " bytes cannot hold the " + std::to_string(act) +
             " bytes of activations (short by " + std::to_string(act - budget) +
             " bytes)");
  }
  const PinResult trial = pin_shards(budget - act, shards);
  uint64_t largest = 0;
  for (uint32_t id : trial.remaining) {
    largest = std::max(largest, shards[id].weight_bytes());
  }
  BudgetSplit split;
  if (trial.remaining.empty()) {
    split.scratch = act;
  } else {
    const unsigned __int128 want =
        static_cast<unsigned __int128>(largest) * 2 + act;
    split.scratch = want > budget ? budget : static_cast<uint64_t>(want);
  }
  split.pinned = budget - split.scratch;
  return split;
}

std::vector<ShardTransfers> plan_transfers(const SchedulePlan& plan,
                                           std::span<const SubLayerShard> shards,
                                           const PassShape& shape) {
  if (plan.placements.size() != shards.size()) {
    fail(ErrorCode::kInvalidArgument, "plan does not cover every shard");
  }
  std::vector<ShardTransfers> out(shards.size());
  if (shards.empty()) return out;
  const uint64_t act = activation_transfer_bytes(shards.front().spec(), shape);
  for (size_t i = 0; i < shards.size(); ++i) {
    const Placement& p = plan.placements[i];
    const SubLayerShard& s = shards[i];
    ShardTransfers& t = out[i];
    switch (p.streaming) {
      case Streaming::kNone: break;
      case Streaming::kWeightsH2D: t.h2d_stream = s.weight_bytes(); break;
      case Streaming::kKvH2D:
        t.h2d_stream = s.bytes_at(shape.kv_tokens);
        t.d2h_writeback = s.kv_append_bytes(shape);
        break;
      case Streaming::kKvD2H: t.d2h_writeback = s.kv_append_bytes(shape); break;
      case Streaming::kWeightsAndKv:
        t.h2d_stream = s.weight_bytes() + s.bytes_at(shape.kv_tokens);
        t.d2h_writeback = s.kv_append_bytes(shape);
        break;
    }
    if (i > 0 && plan.placements[i - 1].exec != p.exec) {
      t.act_in = act;
      t.act_in_h2d = p.exec == Backend::kGpu;
    }
  }
  return out;
}

std::vector<ShardEstimate> estimate_shards(std::span<const SubLayerShard> shards,
                                           const PlanContext& ctx) {
  KernelTimer timer(*ctx.db);
  return estimate_with(timer, shards, ctx.shape, ctx.threads);
}

double estimate_plan_time(const SchedulePlan& plan,
                          std::span<const SubLayerShard> shards,
                          const PlanContext& ctx) {
  const std::vector<ShardEstimate> est = estimate_shards(shards, ctx);
  return estimate_plan_time(plan, shards, ctx, est);
}

double estimate_plan_time(const SchedulePlan& plan,
                          std::span<const SubLayerShard> shards,
                          const PlanContext& ctx,
                          std::span<const ShardEstimate> estimates) {
  const size_t n = shards.size();
  const std::vector<ShardTransfers> tr = plan_transfers(plan, shards, ctx.shape);
  const MachineSpec& m = *ctx.machine;

  // Window boundaries: window j ends at the j-th streamed shard and carries
  // its copy; the final window runs to the end of the chain.
  std::vector<size_t> bounds{0};
  for (size_t i = 0; i < n; ++i) {
    if (streams_h2d(plan.placements[i].streaming)) bounds.push_back(i);
  }
  bounds.push_back(n);

  const size_t windows = bounds.size() - 1;
  std::vector<size_t> window_of(n, 0);
  for (size_t w = 0; w < windows; ++w) {
    for (size_t i = bounds[w]; i < bounds[w + 1]; ++i) window_of[i] = w;
  }
  // A write-back drains while the next shard runs.
  std::vector<double> d2h(windows, 0.0);
  double epilogue = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double b = static_cast<double>(tr[i].d2h_writeback);
    if (b == 0) continue;
    if (i + 1 < n) {
      d2h[window_of[i + 1]] += b;
    } else {
      epilogue += b / m.pcie_d2h_bw;
    }
  }

  double total = 0.0;
  for (size_t w = 0; w < windows; ++w) {
    const size_t begin = bounds[w];
    const size_t end = bounds[w + 1];
    const double h2d =
        w + 1 < windows ? static_cast<double>(tr[end].h2d_stream) : 0.0;
    const bool busy_link = h2d > 0 || d2h[w] > 0;
    bool has_cpu = false;
    double compute = 0.0;
    double act_time = 0.0;
    for (size_t i = begin; i < end; ++i) {
      const ShardEstimate& e = estimates[i];
      if (plan.placements[i].exec == Backend::kGpu) {
        compute += e.gpu;
      } else {
        has_cpu = true;
        compute += busy_link ? e.cpu_contended : e.cpu;
      }
      if (tr[i].act_in > 0) {
        act_time += tr[i].act_in /
                    (tr[i].act_in_h2d ? m.pcie_h2d_bw : m.pcie_d2h_bw);
      }
    }
    const double derate = has_cpu && busy_link ? m.contention_alpha : 1.0;
    total += std::max({compute, h2d / (m.pcie_h2d_bw * derate),
                       d2h[w] / (m.pcie_d2h_bw * derate)}) +
             act_time;
  }
  return total + epilogue;
}

std::array<SchedulePlan, 3> heuristic_split(std::span<const SubLayerShard> shards,
                                            const PinResult& pins,
                                            const PlanContext& ctx) {
  const size_t n = shards.size();
  KernelTimer timer(*ctx.db);
  const std::vector<ShardEstimate> est =
      estimate_with(timer, shards, ctx.shape, ctx.threads);
  const uint64_t act =
      n ? activation_peak_bytes(shards.front().spec(), ctx.shape) : 0;
  const uint64_t scratch = ctx.budget.scratch;
  const std::vector<uint32_t>& rem = pins.remaining;

  std::vector<Placement> base(n);
  for (size_t i = 0; i < n; ++i) base[i] = cpu_placement(static_cast<uint32_t>(i));
  for (uint32_t id : pins.pinned) base[id] = pinned_placement(id);

  std::array<SchedulePlan, 3> plans;
  plans[0].kind = PlanKind::kGpuOnly;
  plans[1].kind = PlanKind::kStatic;
  plans[2].kind = PlanKind::kDynamic;

  // GpuOnly: stream every unpinned shard through the double buffer.
  {
    SchedulePlan& p = plans[0];
    p.placements = base;
    uint64_t largest = 0;
    for (uint32_t id : rem) {
      p.placements[id] = streamed_placement(shards[id]);
      largest = std::max(largest, stream_bytes(shards[id], ctx.shape));
    }
    p.scratch_bytes_required = 2 * largest + act;
    if (p.scratch_bytes_required > scratch) {
      p.feasible = false;
      p.infeasible_reason = "scratch cannot double-buffer the largest shard";
    }
    finalize_plan(p, shards, ctx, est, pins.pinned_bytes);
  }

  auto sweep = [&](SchedulePlan& p, std::vector<uint32_t> order, bool stream) {
    const size_t r = order.size();
    SchedulePlan best;
    bool found = false;
    SchedulePlan cand;
    cand.kind = p.kind;
    uint64_t prefix_sum = 0;
    uint64_t prefix_max = 0;
    for (size_t k = 0; k <= r; ++k) {
      if (k > 0) {
        const uint64_t b = stream_bytes(shards[order[k - 1]], ctx.shape);
        prefix_sum += b;
        prefix_max = std::max(prefix_max, b);
      }
      const uint64_t need = stream ? 2 * prefix_max + act : prefix_sum + act;
      if (need > scratch) {
        if (!stream) break;  // prefix sums only grow
        continue;
      }
      if (k < r && ctx.threads == 0) continue;
      // Dynamic keeps at least one CPU shard; streaming everything is GpuOnly.
      if (stream && k == r && r > 0 && ctx.threads > 0) continue;
      cand.placements = base;
      for (size_t j = 0; j < k; ++j) {
        const uint32_t id = order[j];
        cand.placements[id] = stream ? streamed_placement(shards[id])
                                     : staged_placement(id);
      }
      cand.scratch_bytes_required = need;
      cand.feasible = true;
      finalize_plan(cand, shards, ctx, est, pins.pinned_bytes);
      if (!found || better_plan(cand, best)) {
        best = cand;
        found = true;
      }
    }
    if (found) {
      p = std::move(best);
    } else {
      p.placements = base;
      p.feasible = false;
      p.infeasible_reason = ctx.threads == 0
                                ? "no CPU threads and scratch too small"
                                : "scratch too small for any split";
      p.pinned_bytes = pins.pinned_bytes;
    }
  };

  std::vector<uint32_t> by_priority = rem;
  std::stable_sort(by_priority.begin(), by_priority.end(),
                   [&](uint32_t a, uint32_t b) {
                     return std::make_pair(shards[a].priority(),
                                           shards[a].layer_index()) <
                            std::make_pair(shards[b].priority(),
                                           shards[b].layer_index());
                   });
  sweep(plans[1], by_priority, /*stream=*/false);

  std::vector<uint32_t> spread = rem;
  if (n > 0) {
    const std::vector<uint32_t> rank =
        spread_rank(static_cast<uint32_t>(shards.front().spec().n_layers));
    std::stable_sort(spread.begin(), spread.end(), [&](uint32_t a, uint32_t b) {
      return std::make_pair(shards[a].priority(), rank[shards[a].layer_index()]) <
             std::make_pair(shards[b].priority(), rank[shards[b].layer_index()]);
    });
  }
  sweep(plans[2], spread, /*stream=*/true);
  return plans;
}

const SchedulePlan* select_best_plan(std::span<const SchedulePlan> plans) {
  const SchedulePlan* best = nullptr;
  for (const SchedulePlan& p : plans) {
    if (!p.feasible) continue;
    if (best == nullptr || better_plan(p, *best)) best = &p;
  }
  return best;
}

TierTable build_tier_table(std::shared_ptr<const ModelSpec> spec,
                           const MachineSpec& machine, const ProfileDb& db,
                           uint64_t budget_bytes, uint64_t context_len,
                           uint32_t threads) {
  if (!spec) fail(ErrorCode::kInvalidArgument, "null model spec");
  if (threads > machine.threads_available) {
    fail(ErrorCode::kInvalidArgument,
         "threads exceed the machine's " +
             std::to_string(machine.threads_available));
  }
  if (budget_bytes > machine.vram_capacity) {
    fail(ErrorCode::kInvalidArgument,
         "budget exceeds VRAM capacity of " + machine.name);
  }
  const std::vector<SubLayerShard> shards = build_shards(spec, context_len);
  TierTable table;
  table.model = spec->name;
  table.machine = machine.name;
  table.budget_bytes = budget_bytes;
  table.context_len = context_len;
  table.threads = threads;
  bool any = false;
  std::string first_reason;
  for (uint64_t tier : kTokenTiers) {
    const PassShape shape = planning_shape(tier, context_len);
    // The budget caps VRAM use; first-fit pinning is not nested across
    // budgets, so smaller reservations in kBudgetStep decrements compete too.
    TierEntry entry;
    entry.tier = tier;
    for (uint64_t b = budget_bytes; b > 0;
         b = b > kBudgetStep ? b - kBudgetStep : 0) {
      TierEntry cand;
      cand.tier = tier;
      bool all_pinned = false;
      try {
        cand.split = decide_scratch_budget(b, shards, shape);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInfeasibleBudget) throw;
        cand.infeasible_reason = e.what();
      }
      if (cand.infeasible_reason.empty()) {
        const PinResult pins = pin_shards(cand.split.pinned, shards);
        all_pinned = pins.remaining.empty();
        PlanContext ctx{&db, &machine, threads, shape, cand.split};
        const std::array<SchedulePlan, 3> plans = heuristic_split(shards, pins, ctx);
        if (const SchedulePlan* best = select_best_plan(plans)) {
          cand.feasible = true;
          cand.plan = *best;
        } else {
          cand.infeasible_reason = "no feasible plan: " + plans[0].infeasible_reason;
        }
      }
      if (b == budget_bytes) {
        entry = std::move(cand);
        if (all_pinned) break;  // nothing left to trade
        continue;
      }
      if (!cand.feasible) break;  // smaller budgets only lose room
      if (!entry.feasible ||
          cand.plan.estimated_time < entry.plan.estimated_time) {
        entry = std::move(cand);
      }
    }
    any = any || entry.feasible;
    if (!entry.feasible && first_reason.empty()) {
      first_reason = entry.infeasible_reason;
    }
    table.tiers.push_back(std::move(entry));
  }
  if (!any) {
    fail(ErrorCode::kInfeasibleBudget,
         "no token tier is feasible for " + spec->name + " at budget " +
             std::to_string(budget_bytes) + ": " + first_reason);
  }
  return table;
}

size_t pick_tier_index(std::span<const uint64_t> tiers,
                       std::span<const double> times, uint64_t batch_new_tokens) {
  if (batch_new_tokens == 0) {
    fail(ErrorCode::kInvalidArgument, "batch_new_tokens must be >= 1");
  }
  if (tiers.size() != times.size()) {
    fail(ErrorCode::kInvalidArgument, "tier and time arrays differ in length");
  }
  size_t best = tiers.size();
  double best_cost = kInf;
  for (size_t i = 0; i < tiers.size(); ++i) {
    if (times[i] < 0) continue;
    const uint64_t passes = (batch_new_tokens + tiers[i] - 1) / tiers[i];
    const double cost = static_cast<double>(passes) * times[i];
    if (best == tiers.size() || cost < best_cost ||
        (cost == best_cost && tiers[i] < tiers[best])) {
      best = i;
      best_cost = cost;
    }
  }
  if (best == tiers.size()) {
    fail(ErrorCode::kInfeasibleSchedule, "no feasible tier to pick from");
  }
  return best;
}

uint64_t pick_tier(const TierTable& table, uint64_t batch_new_tokens) {
  std::vector<uint64_t> tiers;
  std::vector<double> times;
  for (const TierEntry& e : table.tiers) {
    tiers.push_back(e.tier);
    times.push_back(e.feasible ? e.plan.estimated_time : -1.0);
  }
  return tiers[pick_tier_index(tiers, times, batch_new_tokens)];
}

const TierEntry& tier_entry(const TierTable& table, uint64_t tier) {
  for (const TierEntry& e : table.tiers) {
    if (e.tier == tier) return e;
  }
  fail(ErrorCode::kInvalidArgument, "tier " + std::to_string(tier) + " not in table");
}

std::string serialize_tier_table(const TierTable& t) {
  std::ostringstream out;
  out << kTierTableHeader << "\n"
      << "model = " << t.model << "\n"
      << "machine = " << t.machine << "\n"
      << "budget_bytes = " << t.budget_bytes << "\n"
      << "context_len = " << t.context_len << "\n"
      << "threads = " << t.threads << "\n"
      << "---\n";
  for (const TierEntry& e : t.tiers) {
    if (!e.feasible) {
      out << "tier " << e.tier << " infeasible " << e.infeasible_reason << "\n";
      continue;
    }
    const SchedulePlan& p = e.plan;
    out << "tier " << e.tier << " " << to_string(p.kind)
        << " estimated_time=" << format_double(p.estimated_time)
        << " pcie_h2d_bytes=" << p.pcie_h2d_bytes
        << " pcie_d2h_bytes=" << p.pcie_d2h_bytes
        << " pinned_budget=" << e.split.pinned
        << " scratch_budget=" << e.split.scratch
        << " pinned_bytes=" << p.pinned_bytes
        << " scratch_bytes_required=" << p.scratch_bytes_required
        << " shards=" << p.placements.size() << "\n";
    for (const Placement& pl : p.placements) {
      out << "  " << pl.shard_id << " " << to_string(pl.residency) << " "
          << to_string(pl.exec) << " " << to_string(pl.streaming) << "\n";
    }
  }
  return out.str();
}

TierTable parse_tier_table(std::string_view text) {
  const std::string_view marker = "\n---\n";
  const size_t split_at = text.find(marker);
  if (split_at == std::string_view::npos) {
    KeyValueDoc::parse(text.substr(0, text.find('\n')), kTierTableHeader);
    fail(ErrorCode::kParse, "tier table is missing the '---' marker");
  }
  KeyValueDoc doc = KeyValueDoc::parse(text.substr(0, split_at), kTierTableHeader);
  TierTable t;
  t.model = doc.take_string("model");
  t.machine = doc.take_string("machine");
  t.budget_bytes = doc.take_u64("budget_bytes");
  t.context_len = doc.take_u64("context_len");
  t.threads = static_cast<uint32_t>(doc.take_u64("threads"));
  doc.expect_consumed();

  auto tokens = [](std::string_view line) {
    std::vector<std::string_view> f;
    for (std::string_view tok : split(line, ' ')) {
      if (!tok.empty()) f.push_back(tok);
    }
    return f;
  };
  auto field = [](std::string_view tok, std::string_view name) {
    if (tok.substr(0, name.size()) != name || tok.size() <= name.size() ||
        tok[name.size()] != '=') {
      fail(ErrorCode::kParse, "expected field '" + std::string(name) + "'");
    }
    return tok.substr(name.size() + 1);
  };

  TierEntry* current = nullptr;
  size_t expected_shards = 0;
  for (std::string_view raw : split(text.substr(split_at + marker.size()), '\n')) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::vector<std::string_view> f = tokens(line);
    if (f[0] == "tier") {
      if (current && current->plan.placements.size() != expected_shards) {
        fail(ErrorCode::kParse, "tier " + std::to_string(current->tier) +
                                    " has a truncated placement list");
      }
      if (f.size() < 3) fail(ErrorCode::kParse, "malformed tier line");
      TierEntry e;
      e.tier = parse_u64(f[1]);
      if (f[2] == "infeasible") {
        const size_t at = line.find("infeasible") + std::string_view("infeasible").size();
        e.infeasible_reason = std::string(trim(line.substr(at)));
        expected_shards = 0;
      } else {
        if (f.size() != 11) fail(ErrorCode::kParse, "malformed tier line");
        e.feasible = true;
        e.plan.kind = parse_plan_kind(f[2]);
        e.plan.estimated_time = parse_double(field(f[3], "estimated_time"));
        e.plan.pcie_h2d_bytes = parse_u64(field(f[4], "pcie_h2d_bytes"));
        e.plan.pcie_d2h_bytes = parse_u64(field(f[5], "pcie_d2h_bytes"));
        e.split.pinned = parse_u64(field(f[6], "pinned_budget"));
        e.split.scratch = parse_u64(field(f[7], "scratch_budget"));
        e.plan.pinned_bytes = parse_u64(field(f[8], "pinned_bytes"));
        e.plan.scratch_bytes_required =
            parse_u64(field(f[9], "scratch_bytes_required"));
        expected_shards = parse_u64(field(f[10], "shards"));
      }
      t.tiers.push_back(std::move(e));
      current = &t.tiers.back();
      continue;
    }
    if (current == nullptr || !current->feasible || f.size() != 4) {
      fail(ErrorCode::kParse, "unexpected line in tier table: " + std::string(line));
    }
    Placement p;
    p.shard_id = static_cast<uint32_t>(parse_u64(f[0]));
    p.residency = parse_residency(f[1]);
    p.exec = parse_backend(f[2]);
    p.streaming = parse_streaming(f[3]);
    validate_placement(p);
    if (p.shard_id != current->plan.placements.size()) {
      fail(ErrorCode::kParse, "placements must be listed in shard order");
    }
    current->plan.placements.push_back(p);
  }
  if (current && current->plan.placements.size() != expected_shards) {
    fail(ErrorCode::kParse, "tier table ends with a truncated placement list");
  }
  if (t.tiers.size() != kTokenTiers.size()) {
    fail(ErrorCode::kParse, "tier table must list all " +
                                std::to_string(kTokenTiers.size()) + " tiers");
  }
  for (size_t i = 0; i < kTokenTiers.size(); ++i) {
    if (t.tiers[i].tier != kTokenTiers[i]) {
      fail(ErrorCode::kParse, "unexpected tier " + std::to_string(t.tiers[i].tier));
    }
  }
  return t;
}

}  // namespace pshard
