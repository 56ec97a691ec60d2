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

// Memory model of a vision encoder: token counts, attention score buffers
// with and without query tiling, and vision/language peak accounting.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pshard {

struct VisionSpec {
  std::string name;
  uint64_t patch_px = 14;
  // Patches merged per side into one token.
  uint64_t merge = 2;
  uint64_t n_heads = 0;
  uint64_t head_dim = 0;
  uint64_t d_vision = 0;
  uint64_t n_vision_layers = 0;
  uint64_t score_bytes_per_elem = 4;
  uint64_t weight_bytes = 0;

  uint64_t token_span() const { return patch_px * merge; }
  void validate() const;
};

VisionSpec parse_vision_spec(std::string_view text);
VisionSpec load_vision_spec(const std::string& path);
std::string serialize_vision_spec(const VisionSpec& v);

// ceil(width / span) * ceil(height / span).
uint64_t vision_token_count(const VisionSpec& v, uint64_t width_px,
                            uint64_t height_px);

// Score tensor plus its softmax output: 2 * heads * N^2 * b.
uint64_t naive_attn_peak_bytes(const VisionSpec& v, uint64_t n_tokens);

// One score tile of q_chunk rows, resident Q/K/V, and the buffer the
// partial outputs are concatenated into.
uint64_t flash_attn_peak_bytes(const VisionSpec& v, uint64_t n_tokens,
                               uint64_t q_chunk);

// Largest q_chunk whose flash peak fits the budget. Throws
// Error(kInfeasibleBudget) when even a single-row tile does not fit.
uint64_t choose_chunk(const VisionSpec& v, uint64_t n_tokens, uint64_t budget);

// Serialized execution needs the larger of the two; overlapped the sum.
uint64_t peak_vram(uint64_t vision_peak, uint64_t language_peak, bool serialized);

// Vision-side VRAM: attention working set plus the encoder weights unless
// they are kept in system RAM.
uint64_t vision_vram_peak(const VisionSpec& v, uint64_t n_tokens,
                          uint64_t q_chunk, bool weights_in_sysram);

}  // namespace pshard
