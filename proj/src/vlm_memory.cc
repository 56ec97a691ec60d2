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

#include <sstream>

#include "common.h"

namespace pshard {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kInvalidArgument, "invalid vision spec: " + what);
}

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

}  // namespace

void VisionSpec::validate() const {
  require(!name.empty(), "name is empty");
  require(patch_px >= 1 && merge >= 1, "patch_px and merge must be >= 1");
  require(n_heads >= 1 && head_dim >= 1, "heads and head_dim must be >= 1");
  require(d_vision >= 1, "d_vision must be >= 1");
  require(score_bytes_per_elem > 0, "score_bytes_per_elem must be > 0");
}

VisionSpec parse_vision_spec(std::string_view text) {
  KeyValueDoc doc = KeyValueDoc::parse(text, "pshard-vision v1");
  VisionSpec v;
  v.name = doc.take_string("name");
  v.patch_px = doc.take_u64("patch_px");
  v.merge = doc.take_u64("merge");
  v.n_heads = doc.take_u64("n_heads");
  v.head_dim = doc.take_u64("head_dim");
  v.d_vision = doc.take_u64("d_vision");
  v.n_vision_layers = doc.take_u64("n_vision_layers");
  v.score_bytes_per_elem = doc.take_u64("score_bytes_per_elem");
  v.weight_bytes = doc.take_u64("weight_bytes");
  doc.expect_consumed();
  v.validate();
  return v;
}

VisionSpec load_vision_spec(const std::string& path) {
  return parse_vision_spec(read_file(path));
}

std::string serialize_vision_spec(const VisionSpec& v) {
  std::ostringstream out;
  out << "pshard-vision v1\n"
      << "name = " << v.name << "\n"
      << "patch_px = " << v.patch_px << "\n"
      << "merge = " << v.merge << "\n"
      << "n_heads = " << v.n_heads << "\n"
      << "head_dim = " << v.head_dim << "\n"
      << "d_vision = " << v.d_vision << "\n"
      << "n_vision_layers = " << v.n_vision_layers << "\n"
      << "score_bytes_per_elem = " << v.score_bytes_per_elem << "\n"
      << "weight_bytes = " << v.weight_bytes << "\n";
  return out.str();
}

uint64_t vision_token_count(const VisionSpec& v, uint64_t width_px,
                            uint64_t height_px) {
  if (width_px == 0 || height_px == 0) {
    fail(ErrorCode::kInvalidArgument, "image dimensions must be >= 1 pixel");
  }
  return ceil_div(width_px, v.token_span()) * ceil_div(height_px, v.token_span());
}

uint64_t naive_attn_peak_bytes(const VisionSpec& v, uint64_t n_tokens) {
  if (n_tokens == 0) fail(ErrorCode::kInvalidArgument, "n_tokens must be >= 1");
  return 2 * v.n_heads * n_tokens * n_tokens * v.score_bytes_per_elem;
}

uint64_t flash_attn_peak_bytes(const VisionSpec& v, uint64_t n_tokens,
                               uint64_t q_chunk) {
  if (q_chunk == 0 || q_chunk > n_tokens) {
    fail(ErrorCode::kInvalidArgument, "q_chunk must be in [1, n_tokens]");
  }
  const uint64_t b = v.score_bytes_per_elem;
  const uint64_t tile = v.n_heads * q_chunk * n_tokens * b;
  const uint64_t qkv = 3 * n_tokens * v.d_vision * b;
  const uint64_t concat = n_tokens * v.d_vision * b;
  return tile + qkv + concat;
}

uint64_t choose_chunk(const VisionSpec& v, uint64_t n_tokens, uint64_t budget) {
  const uint64_t floor = flash_attn_peak_bytes(v, n_tokens, 1);
  if (budget < floor) {
    fail(ErrorCode::kInfeasibleBudget,
         "vision budget of " + std::to_string(budget) +
             " bytes is below the single-row floor of " + std::to_string(floor) +
             " bytes (short by " + std::to_string(floor - budget) + ")");
  }
  uint64_t lo = 1;
  uint64_t hi = n_tokens;
  while (lo < hi) {
    const uint64_t mid = lo + (hi - lo + 1) / 2;
    if (flash_attn_peak_bytes(v, n_tokens, mid) <= budget) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

uint64_t peak_vram(uint64_t vision_peak, uint64_t language_peak, bool serialized) {
  if (serialized) return vision_peak > language_peak ? vision_peak : language_peak;
  return vision_peak + language_peak;
}

uint64_t vision_vram_peak(const VisionSpec& v, uint64_t n_tokens,
                          uint64_t q_chunk, bool weights_in_sysram) {
  const uint64_t attn = flash_attn_peak_bytes(v, n_tokens, q_chunk);
  return weights_in_sysram ? attn : attn + v.weight_bytes;
}

}  // namespace pshard
