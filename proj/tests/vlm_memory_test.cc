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

#include "vlm_memory.h"

#include <gtest/gtest.h>

#include <random>

#include "common.h"
#include "test_util.h"

namespace pshard {
namespace {

VisionSpec cr1() {
  return load_vision_spec(testing::data_path("vision/cr1.vision"));
}

TEST(VisionTokensTest, Resolutions) {
  const VisionSpec v = cr1();
  ASSERT_EQ(v.token_span(), 28u);
  EXPECT_EQ(vision_token_count(v, 336, 336), 144u);
  EXPECT_EQ(vision_token_count(v, 1280, 720), 1196u);
  EXPECT_EQ(vision_token_count(v, 2560, 1440), 4784u);
}

TEST(NaivePeakTest, Values) {
  const VisionSpec v = cr1();
  EXPECT_EQ(naive_attn_peak_bytes(v, 4784), 2929491968ULL);
  EXPECT_EQ(naive_attn_peak_bytes(v, 1), 2 * v.n_heads * v.score_bytes_per_elem);
  EXPECT_EQ(naive_attn_peak_bytes(v, 2000), 4 * naive_attn_peak_bytes(v, 1000));
}

TEST(FlashPeakTest, Boundaries) {
  const VisionSpec v = cr1();
  const uint64_t n = 1196;
  const uint64_t residency = 4 * n * v.d_vision * v.score_bytes_per_elem;
  EXPECT_EQ(flash_attn_peak_bytes(v, n, n) - residency,
            naive_attn_peak_bytes(v, n) / 2);
  EXPECT_EQ(flash_attn_peak_bytes(v, n, 1) - residency,
            v.n_heads * n * v.score_bytes_per_elem);
  uint64_t prev = 0;
  for (uint64_t q = 1; q <= n; q += 37) {
    const uint64_t p = flash_attn_peak_bytes(v, n, q);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(ChooseChunkTest, MaximalAndBoundaries) {
  const VisionSpec v = cr1();
  const uint64_t n = 4784;
  EXPECT_EQ(choose_chunk(v, n, ~0ULL), n);
  const uint64_t floor = flash_attn_peak_bytes(v, n, 1);
  EXPECT_EQ(choose_chunk(v, n, floor), 1u);
  try {
    choose_chunk(v, n, floor - 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleBudget);
  }
  const uint64_t q = choose_chunk(v, n, 1000000000ULL);
  EXPECT_EQ(q, 2946u);
  EXPECT_LE(flash_attn_peak_bytes(v, n, q), 1000000000ULL);
  EXPECT_GT(flash_attn_peak_bytes(v, n, q + 1), 1000000000ULL);
}

TEST(ChooseChunkTest, FullResolutionUnderTwoGigabytes) {
  const VisionSpec v = cr1();
  const uint64_t n = vision_token_count(v, 2560, 1440);
  const uint64_t q = choose_chunk(v, n, 2000000000ULL);
  EXPECT_EQ(q, n);
  EXPECT_LE(flash_attn_peak_bytes(v, n, q), 2000000000ULL);
  EXPECT_GT(naive_attn_peak_bytes(v, n), 2000000000ULL);
}

TEST(PeakVramTest, Examples) {
  EXPECT_EQ(peak_vram(3000000000ULL, 5000000000ULL, true), 5000000000ULL);
  EXPECT_EQ(peak_vram(3000000000ULL, 5000000000ULL, false), 8000000000ULL);
  EXPECT_EQ(peak_vram(0, 7, true), 7u);
  EXPECT_EQ(peak_vram(0, 7, false), 7u);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const uint64_t a = rng() >> 20, b = rng() >> 20;
    EXPECT_LE(peak_vram(a, b, true), peak_vram(a, b, false));
    EXPECT_EQ(peak_vram(a, b, true) == peak_vram(a, b, false), a == 0 || b == 0);
  }
}

TEST(VisionPeakTest, OffloadRemovesExactlyTheWeights) {
  const VisionSpec v = cr1();
  for (uint64_t n : {144ULL, 1196ULL, 4784ULL}) {
    const uint64_t q = std::min<uint64_t>(n, 512);
    EXPECT_EQ(vision_vram_peak(v, n, q, false) - vision_vram_peak(v, n, q, true),
              v.weight_bytes);
  }
}

TEST(VisionPeakTest, NaiveToFlashRatioGrows) {
  const VisionSpec v = cr1();
  for (uint64_t n = 256; n <= 65536; n *= 2) {
    const double r1 = static_cast<double>(naive_attn_peak_bytes(v, n)) /
                      flash_attn_peak_bytes(v, n, 64);
    const double r2 = static_cast<double>(naive_attn_peak_bytes(v, 2 * n)) /
                      flash_attn_peak_bytes(v, 2 * n, 64);
    EXPECT_GT(r2, 1.9 * r1) << n;
  }
}

TEST(VisionSpecTest, RoundTripAndVersion) {
  const VisionSpec v = cr1();
  const std::string text = serialize_vision_spec(v);
  EXPECT_EQ(serialize_vision_spec(parse_vision_spec(text)), text);
  std::string bad = text;
  bad.replace(bad.find("v1"), 2, "v3");
  EXPECT_THROW(parse_vision_spec(bad), Error);
}

}  // namespace
}  // namespace pshard
