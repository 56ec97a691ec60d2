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

#include <gtest/gtest.h>

#include "test_util.h"

namespace pshard {
namespace {

using testing::load_machine;
using testing::load_model;
using testing::toy_dense;
using testing::toy_machine;

// Dense spec whose Ffn shards are exactly 1e9 bytes.
std::shared_ptr<const ModelSpec> gigabyte_ffn_spec() {
  ModelSpec s = *toy_dense();
  s.n_layers = 8;
  s.d_model = 1000;
  s.n_heads = 8;
  s.n_kv_heads = 8;
  s.head_dim = 125;
  s.ffn_dim = 250000;
  s.gated_ffn = false;
  s.vocab_size = 1000;
  s.validate();
  return std::make_shared<const ModelSpec>(s);
}

// Attention and per-layer KV shards of exactly 2^30 bytes at 32K context.
std::shared_ptr<const ModelSpec> gibibyte_attention_spec() {
  ModelSpec s = *toy_dense();
  s.n_layers = 3;
  s.d_model = 16384;
  s.n_heads = 128;
  s.n_kv_heads = 128;
  s.head_dim = 128;
  s.ffn_dim = 16384;
  s.vocab_size = 1000;
  s.max_context = 32768;
  s.quant[static_cast<size_t>(TensorClass::kAttnWeights)] = Rational{1, 1};
  s.quant[static_cast<size_t>(TensorClass::kKvCache)] = Rational{1, 1};
  s.validate();
  return std::make_shared<const ModelSpec>(s);
}

TEST(PlanningShapeTest, DecodeAndPrefillTiers) {
  const PassShape d = planning_shape(64, 1000);
  EXPECT_EQ(d.new_tokens, 64u);
  EXPECT_EQ(d.attn_pairs, 1000.0);
  EXPECT_EQ(d.output_rows, 64u);
  const PassShape p = planning_shape(512, 1000);
  EXPECT_EQ(p.attn_pairs, 512000.0);
  EXPECT_EQ(p.output_rows, 1u);
  EXPECT_THROW(planning_shape(0, 1), Error);
}

TEST(ScratchBudgetTest, TwiceLargestPlusActivations) {
  const auto spec = gigabyte_ffn_spec();
  const auto shards = build_shards(spec, 16);
  ASSERT_EQ(shards[2].weight_bytes(), 1000000000u);
  const PassShape shape = planning_shape(1, 16);
  // 4 bytes x (1 x (4 x 1000 + 2 x 250000) + 1 x 1000).
  const uint64_t act = activation_peak_bytes(*spec, shape);
  EXPECT_EQ(act, 2020000u);
  const BudgetSplit split = decide_scratch_budget(8000000000ULL, shards, shape);
  EXPECT_EQ(split.scratch, 2000000000ULL + act);
  EXPECT_EQ(split.pinned, 8000000000ULL - split.scratch);
}

TEST(ScratchBudgetTest, Boundaries) {
  const auto spec = gigabyte_ffn_spec();
  const auto shards = build_shards(spec, 16);
  const PassShape shape = planning_shape(1, 16);
  const uint64_t act = activation_peak_bytes(*spec, shape);
  const BudgetSplit exact = decide_scratch_budget(act, shards, shape);
  EXPECT_EQ(exact.pinned, 0u);
  EXPECT_EQ(exact.scratch, act);
  try {
    decide_scratch_budget(act - 1, shards, shape);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleBudget);
    EXPECT_NE(std::string(e.what()).find("short by 1 bytes"), std::string::npos);
  }
  // Everything pins: scratch only holds activations.
  const BudgetSplit all = decide_scratch_budget(20000000000ULL, shards, shape);
  EXPECT_EQ(all.scratch, act);
}

TEST(PinShardsTest, GreedyWalkExample) {
  const auto shards = build_shards(gibibyte_attention_spec(), 32768);
  ASSERT_EQ(shards[0].weight_bytes(), 1ULL << 30);
  ASSERT_EQ(shards[1].weight_bytes(), 1ULL << 30);
  const PinResult r = pin_shards(4ULL << 30, shards);
  ASSERT_EQ(r.pinned.size(), 4u);
  EXPECT_EQ(r.leftover, 0u);
  EXPECT_EQ(shards[r.pinned[0]].kind(), ShardKind::kAttention);
  EXPECT_EQ(shards[r.pinned[1]].kind(), ShardKind::kAttention);
  EXPECT_EQ(shards[r.pinned[2]].kind(), ShardKind::kAttention);
  EXPECT_EQ(shards[r.pinned[3]].kind(), ShardKind::kKvCache);
  EXPECT_EQ(shards[r.pinned[3]].layer_index(), 0u);
  // Remaining stays in topological order.
  for (size_t i = 1; i < r.remaining.size(); ++i) {
    EXPECT_LT(r.remaining[i - 1], r.remaining[i]);
  }
}

TEST(PinShardsTest, ZeroAndUnlimitedBudgets) {
  const auto shards = build_shards(load_model("nemo4b"), 1024);
  EXPECT_TRUE(pin_shards(0, shards).pinned.empty());
  const PinResult all = pin_shards(~0ULL, shards);
  EXPECT_TRUE(all.remaining.empty());
  EXPECT_EQ(all.pinned.size(), shards.size());
}

TEST(PlacementTest, Contract) {
  EXPECT_NO_THROW(validate_placement({0, Residency::kVramPinned, Backend::kGpu,
                                      Streaming::kNone}));
  EXPECT_THROW(validate_placement({0, Residency::kVramPinned, Backend::kCpu,
                                   Streaming::kNone}),
               Error);
  EXPECT_THROW(validate_placement({0, Residency::kSysRam, Backend::kCpu,
                                   Streaming::kWeightsH2D}),
               Error);
  EXPECT_NO_THROW(validate_placement({0, Residency::kSysRam, Backend::kCpu,
                                      Streaming::kKvD2H}));
}

// Attn0 and Kv0 pinned, Ffn0 streamed, head pinned; only Attn0 computes.
TEST(EstimatePlanTest, MaxOfComputeAndConcurrentCopy) {
  const auto spec = toy_dense(1);
  const auto shards = build_shards(spec, 16);
  ASSERT_EQ(shards.size(), 4u);
  const uint64_t ffn = shards[2].weight_bytes();
  MachineSpec m = toy_machine();
  m.pcie_h2d_bw = static_cast<double>(ffn) / 0.008;
  const ProfileDb db;
  PlanContext ctx{&db, &m, 4, planning_shape(1, 16), BudgetSplit{}};
  SchedulePlan plan;
  plan.kind = PlanKind::kGpuOnly;
  for (uint32_t i = 0; i < 4; ++i) {
    plan.placements.push_back(
        {i, Residency::kVramPinned, Backend::kGpu, Streaming::kNone});
  }
  std::vector<ShardEstimate> est(4);
  est[0].gpu = 0.005;
  EXPECT_DOUBLE_EQ(estimate_plan_time(plan, shards, ctx, est), 0.005);

  plan.placements[2] = {2, Residency::kSysRam, Backend::kGpu,
                        Streaming::kWeightsH2D};
  EXPECT_DOUBLE_EQ(estimate_plan_time(plan, shards, ctx, est), 0.008);
  est[0].gpu = 0.010;
  EXPECT_DOUBLE_EQ(estimate_plan_time(plan, shards, ctx, est), 0.010);
}

TEST(EstimatePlanTest, GigabyteAtFiftyGigabytesPerSecond) {
  const auto spec = gigabyte_ffn_spec();
  const auto shards = build_shards(spec, 16);
  MachineSpec m = toy_machine();
  m.pcie_h2d_bw = 50e9;
  const ProfileDb db;
  PlanContext ctx{&db, &m, 4, planning_shape(1, 16), BudgetSplit{}};
  SchedulePlan plan;
  for (uint32_t i = 0; i < shards.size(); ++i) {
    plan.placements.push_back(
        {i, Residency::kVramPinned, Backend::kGpu, Streaming::kNone});
  }
  plan.placements[2] = {2, Residency::kSysRam, Backend::kGpu,
                        Streaming::kWeightsH2D};
  std::vector<ShardEstimate> est(shards.size());
  EXPECT_DOUBLE_EQ(estimate_plan_time(plan, shards, ctx, est), 0.02);
}

TEST(HeuristicSplitTest, NothingRemainingGivesIdenticalPlans) {
  const auto shards = build_shards(load_model("nemo4b"), 1024);
  const MachineSpec m = load_machine("cli3");
  const ProfileDb db = synth_profile(m);
  const PassShape shape = planning_shape(1, 1024);
  const BudgetSplit split = decide_scratch_budget(30000000000ULL, shards, shape);
  const PinResult pins = pin_shards(split.pinned, shards);
  ASSERT_TRUE(pins.remaining.empty());
  const auto plans =
      heuristic_split(shards, pins, PlanContext{&db, &m, 16, shape, split});
  for (const auto& p : plans) {
    EXPECT_TRUE(p.feasible);
    EXPECT_EQ(p.placements, plans[0].placements);
    EXPECT_EQ(p.estimated_time, plans[0].estimated_time);
    EXPECT_EQ(p.pcie_total_bytes(), 0u);
  }
  EXPECT_EQ(select_best_plan(plans)->kind, PlanKind::kStatic);
}

TEST(HeuristicSplitTest, NoThreadsMeansNoCpuPlacements) {
  const auto shards = build_shards(load_model("nemo8b"), 4096);
  const MachineSpec m = load_machine("cli3");
  const ProfileDb db = synth_profile(m);
  const PassShape shape = planning_shape(1, 4096);
  const BudgetSplit split = decide_scratch_budget(8000000000ULL, shards, shape);
  const PinResult pins = pin_shards(split.pinned, shards);
  ASSERT_FALSE(pins.remaining.empty());
  const auto plans =
      heuristic_split(shards, pins, PlanContext{&db, &m, 0, shape, split});
  for (const auto& p : plans) {
    if (!p.feasible) continue;
    for (const auto& pl : p.placements) EXPECT_EQ(pl.exec, Backend::kGpu);
  }
}

TEST(SelectBestPlanTest, TieBreaks) {
  std::array<SchedulePlan, 3> plans;
  plans[0].kind = PlanKind::kGpuOnly;
  plans[1].kind = PlanKind::kStatic;
  plans[2].kind = PlanKind::kDynamic;
  for (auto& p : plans) p.estimated_time = 1.0;
  EXPECT_EQ(select_best_plan(plans)->kind, PlanKind::kStatic);
  plans[1].pcie_h2d_bytes = 10;
  EXPECT_EQ(select_best_plan(plans)->kind, PlanKind::kDynamic);
  plans[0].estimated_time = 0.5;
  EXPECT_EQ(select_best_plan(plans)->kind, PlanKind::kGpuOnly);
  for (auto& p : plans) p.feasible = false;
  EXPECT_EQ(select_best_plan(plans), nullptr);
}

TEST(PickTierTest, Examples) {
  const std::vector<uint64_t> tiers(kTokenTiers.begin(), kTokenTiers.end());
  std::vector<double> times(tiers.size(), -1.0);
  times[0] = 0.3e-3;  // tier 1
  times[4] = 10e-3;   // tier 64
  times[5] = 40e-3;   // tier 512
  EXPECT_EQ(tiers[pick_tier_index(tiers, times, 100)], 64u);
  EXPECT_EQ(tiers[pick_tier_index(tiers, times, 1)], 1u);
  // 2 x 0.5 == 1 x 1.0: the smaller tier wins.
  const std::vector<uint64_t> two{1, 4};
  EXPECT_EQ(pick_tier_index(two, std::vector<double>{0.5, 1.0}, 2), 0u);
  EXPECT_THROW(pick_tier_index(two, std::vector<double>{0.5, 1.0}, 0), Error);
}

TEST(TierTableTest, HugeBudgetStreamsNothing) {
  const auto spec = load_model("nemo4b");
  const MachineSpec m = load_machine("cli3");
  const ProfileDb db = synth_profile(m);
  const TierTable t = build_tier_table(spec, m, db, 30000000000ULL, 4096, 16);
  ASSERT_EQ(t.tiers.size(), kTokenTiers.size());
  for (const auto& e : t.tiers) {
    ASSERT_TRUE(e.feasible) << e.tier;
    for (const auto& p : e.plan.placements) {
      EXPECT_FALSE(streams_h2d(p.streaming)) << e.tier;
    }
  }
}

TEST(TierTableTest, BudgetSafetyAndPlanContracts) {
  const MachineSpec m = load_machine("cli3");
  const ProfileDb db = synth_profile(m);
  for (const char* name : {"nemo8b", "qwen30b"}) {
    for (uint64_t budget : {2000000000ULL, 6000000000ULL, 16000000000ULL}) {
      const TierTable t = build_tier_table(load_model(name), m, db, budget, 4096, 16);
      for (const auto& e : t.tiers) {
        if (!e.feasible) continue;
        EXPECT_LE(e.plan.pinned_bytes + e.plan.scratch_bytes_required, budget);
        for (const auto& p : e.plan.placements) {
          EXPECT_NO_THROW(validate_placement(p));
          if (e.plan.kind == PlanKind::kGpuOnly) EXPECT_EQ(p.exec, Backend::kGpu);
          if (e.plan.kind == PlanKind::kStatic) {
            EXPECT_NE(p.streaming, Streaming::kWeightsH2D);
            EXPECT_NE(p.streaming, Streaming::kWeightsAndKv);
          }
        }
      }
    }
  }
}

TEST(TierTableTest, RejectsBadInputs) {
  const auto spec = load_model("nemo4b");
  const MachineSpec m = load_machine("cli1");
  const ProfileDb db = synth_profile(toy_machine(1));
  EXPECT_THROW(build_tier_table(spec, m, db, m.vram_capacity + 1, 1024, 1), Error);
  EXPECT_THROW(build_tier_table(spec, m, db, 4000000000ULL, 1024, 99), Error);
  try {
    build_tier_table(spec, m, db, 1000, 1024, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleBudget);
  }
}

TEST(TierTableTest, SerializationRoundTripAndDeterminism) {
  const MachineSpec m = load_machine("cli3");
  const ProfileDb db = synth_profile(m);
  const TierTable a = build_tier_table(load_model("qwen30b"), m, db, 4000000000ULL, 2048, 16);
  const TierTable b = build_tier_table(load_model("qwen30b"), m, db, 4000000000ULL, 2048, 16);
  const std::string text = serialize_tier_table(a);
  EXPECT_EQ(serialize_tier_table(b), text);
  const TierTable back = parse_tier_table(text);
  EXPECT_EQ(serialize_tier_table(back), text);
  EXPECT_EQ(pick_tier(back, 100), pick_tier(a, 100));
  std::string bad = text;
  bad.replace(bad.find("v1"), 2, "v0");
  EXPECT_THROW(parse_tier_table(bad), Error);
}

}  // namespace
}  // namespace pshard
