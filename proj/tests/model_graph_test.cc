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

#include "model_graph.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "test_util.h"
#include "vlm_memory.h"

namespace pshard {
namespace {

using testing::load_model;
using testing::toy_dense;

TEST(KernelsTest, MatmulFlops) {
  EXPECT_EQ(matmul_flops(1, 4096, 4096), 33554432.0);
}

TEST(KvCacheTest, FormulaValues) {
  ModelSpec s = *toy_dense();
  s.n_layers = 32;
  s.n_kv_heads = 8;
  s.head_dim = 128;
  s.n_heads = 32;
  s.max_context = 131072;
  s.quant[static_cast<size_t>(TensorClass::kKvCache)] = Rational{2, 1};
  EXPECT_EQ(kv_cache_bytes(s, 16384), 2147483648ULL);
  EXPECT_EQ(kv_cache_bytes(s, 0), 0u);
}

TEST(KvCacheTest, Qwen30bAt64kRegression) {
  EXPECT_EQ(kv_cache_bytes(*load_model("qwen30b"), 65536), 6442450944ULL);
}

TEST(BuildShardsTest, DenseOrdering) {
  const auto shards = build_shards(toy_dense(2), 128);
  const std::vector<ShardKind> want = {
      ShardKind::kAttention, ShardKind::kKvCache, ShardKind::kFfn,
      ShardKind::kAttention, ShardKind::kKvCache, ShardKind::kFfn,
      ShardKind::kOutputHead};
  ASSERT_EQ(shards.size(), want.size());
  for (size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(shards[i].kind(), want[i]) << i;
    EXPECT_EQ(shards[i].id(), i);
  }
  EXPECT_EQ(shards[4].layer_index(), 1u);
  EXPECT_EQ(shards[6].layer_index(), 2u);
}

TEST(BuildShardsTest, MoeReplacesFfnWithExpertGroup) {
  ModelSpec s = *toy_dense(1);
  s.moe = MoeSpec{8, 2, 512};
  s.ffn_dim = 512;
  const auto spec = std::make_shared<const ModelSpec>(s);
  const auto shards = build_shards(spec, 64);
  ASSERT_EQ(shards.size(), 4u);
  EXPECT_EQ(shards[2].kind(), ShardKind::kMoeExpertGroup);
  // Residency counts every expert; compute only the routed ones.
  const uint64_t expert = s.bytes_per_elem(TensorClass::kFfnWeights)
                              .bytes_for(3 * s.d_model * 512);
  EXPECT_GE(shards[2].weight_bytes(), 8 * expert);
  const PassShape one = PassShape::single_request(1, 64);
  double routed = 0;
  for (const auto& k : shards[2].kernels(one)) {
    if (k.op == OpKind::kMoeRoute) routed = k.work.flops;
  }
  EXPECT_DOUBLE_EQ(routed, 2.0 * 2 * 3 * 256 * 512);
}

TEST(BuildShardsTest, RejectsContextBeyondMax) {
  EXPECT_THROW(build_shards(toy_dense(), 4097), Error);
}

TEST(BuildShardsTest, WeightSumMatchesModelPlusCache) {
  for (const char* name : {"nemo4b", "nemo8b", "qwen30b", "qwen235b", "cr1"}) {
    const auto spec = load_model(name);
    for (uint64_t ctx : {0ULL, 1ULL, 4096ULL, 65536ULL}) {
      uint64_t sum = 0;
      for (const auto& s : build_shards(spec, ctx)) sum += s.weight_bytes();
      EXPECT_EQ(sum, total_model_bytes(*spec) + kv_cache_bytes(*spec, ctx))
          << name << " ctx " << ctx;
    }
  }
}

TEST(ShardCostTest, Nemo8bAttentionAt512x4096) {
  const auto spec = load_model("nemo8b");
  const auto shards = build_shards(spec, 4096);
  const PassShape shape = PassShape::single_request(512, 4096);
  // Projections: q and o are 4096x4096, k and v 4096x1024, plus the
  // element-wise share (2% of matmul flops).
  const double proj = 2.0 * 512 * (2 * 4096.0 * 4096 + 2 * 4096.0 * 1024);
  EXPECT_DOUBLE_EQ(proj, 42949672960.0);
  EXPECT_DOUBLE_EQ(shards[0].cost(shape).flops, proj * 1.02);
  // Attention core: 4 * new_tokens * context * heads * head_dim.
  EXPECT_DOUBLE_EQ(shards[1].cost(shape).flops, 34359738368.0);
}

TEST(ShardCostTest, RejectsZeroNewTokens) {
  const auto shards = build_shards(toy_dense(), 16);
  PassShape shape = PassShape::single_request(1, 16);
  shape.new_tokens = 0;
  EXPECT_THROW(shards[0].cost(shape), Error);
}

TEST(ShardCostTest, FfnLinearAndAttentionAffine) {
  const auto spec = load_model("nemo8b");
  const auto shards = build_shards(spec, 8192);
  for (uint64_t t : {1ULL, 7ULL, 64ULL}) {
    const double one = shards[2].cost(PassShape::single_request(t, 100)).flops;
    const double two = shards[2].cost(PassShape::single_request(2 * t, 100)).flops;
    EXPECT_DOUBLE_EQ(two, 2 * one);
  }
  const double c0 = shards[1].cost(PassShape::single_request(8, 1000)).flops;
  const double c1 = shards[1].cost(PassShape::single_request(8, 2000)).flops;
  const double c2 = shards[1].cost(PassShape::single_request(8, 3000)).flops;
  EXPECT_DOUBLE_EQ(c2 - c1, c1 - c0);
}

TEST(BuildShardsTest, Deterministic) {
  const auto a = build_shards(load_model("qwen30b"), 4096);
  const auto b = build_shards(load_model("qwen30b"), 4096);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].kind(), b[i].kind());
    EXPECT_EQ(a[i].weight_bytes(), b[i].weight_bytes());
    EXPECT_EQ(a[i].layer_index(), b[i].layer_index());
  }
}

// On-disk sizes of the calibrated specs, in GiB; the vision-language models
// include their vision encoder weights.
TEST(CalibrationTest, FileSizesWithinFivePercent) {
  const std::map<std::string, double> want = {
      {"nemo4b", 7.7}, {"nemo8b", 15.7}, {"vnemo4b", 8.4},
      {"qwen30b", 16.4}, {"qwen235b", 77.0}, {"cr1", 15.4}};
  for (const auto& [name, gib] : want) {
    double bytes = static_cast<double>(file_bytes(*load_model(name)));
    if (name == "vnemo4b" || name == "cr1") {
      bytes += static_cast<double>(
          load_vision_spec(testing::data_path("vision/" + name + ".vision"))
              .weight_bytes);
    }
    const double got = bytes / std::pow(2.0, 30);
    EXPECT_NEAR(got / gib, 1.0, 0.05) << name << " " << got;
  }
}

TEST(ModelSpecTest, SerializeRoundTrip) {
  for (const char* name : {"nemo8b", "qwen30b"}) {
    const ModelSpec s = *load_model(name);
    const std::string text = serialize_model_spec(s);
    EXPECT_EQ(serialize_model_spec(parse_model_spec(text)), text);
  }
}

TEST(ModelSpecTest, RejectsBadHeaderAndFields) {
  try {
    parse_model_spec("pshard-model v9\nname = x\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
  std::string text = serialize_model_spec(*toy_dense());
  text += "bogus = 1\n";
  EXPECT_THROW(parse_model_spec(text), Error);
}

}  // namespace
}  // namespace pshard
