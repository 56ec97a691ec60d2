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

// Work accounting for the kernel families the planner reasons about. The
// same formulas describe model kernels and the synthetic benchmark kernels,
// so an exact profile hit reproduces the benchmarked shape byte for byte.
//
// Dims conventions (the op-shape vector of a KernelKey):
//   MatMul       [m, n, k]                      out[m,n] = in[m,k] * W[k,n]
//   Gqa / Mha    [new_tokens, kv_tokens, n_heads, n_kv_heads, head_dim]
//   MoeRoute     [tokens, d_model, expert_ffn, n_experts, top_k]
//   ElementWise  [elements]

#pragma once

#include <cstdint>
#include <string_view>

#include "common.h"

namespace pshard {

enum class OpKind { kMatMul, kGqa, kMha, kMoeRoute, kElementWise };

std::string_view to_string(OpKind op);
OpKind parse_op_kind(std::string_view text);

struct KernelWork {
  double flops = 0.0;
  double read_bytes = 0.0;
  double write_bytes = 0.0;

  double bytes() const { return read_bytes + write_bytes; }
};

// Multiply-accumulate counts as two flops.
inline double matmul_flops(uint64_t m, uint64_t n, uint64_t k) {
  return 2.0 * static_cast<double>(m) * static_cast<double>(n) *
         static_cast<double>(k);
}

KernelWork matmul_work(uint64_t m, uint64_t n, uint64_t k, Rational weight_q,
                       Rational act_q);

// Score plus weighted-sum over the cache. `attn_pairs` is the number of
// (query token, cached token) pairs; for one request it is
// new_tokens * kv_tokens.
KernelWork attention_work(uint64_t new_tokens, uint64_t kv_tokens,
                          double attn_pairs, uint64_t n_heads,
                          uint64_t n_kv_heads, uint64_t head_dim,
                          Rational kv_q, Rational act_q);

// Expected number of distinct experts touched by `tokens` tokens each routed
// to `top_k` of `n_experts` experts uniformly at random.
double expected_active_experts(uint64_t tokens, uint64_t n_experts,
                               uint64_t top_k);

// Gated (three-matrix) expert FFNs. Flops cover the routed top_k experts per
// token; weight reads cover the expected distinct experts.
KernelWork moe_work(uint64_t tokens, uint64_t d_model, uint64_t expert_ffn,
                    uint64_t n_experts, uint64_t top_k, Rational weight_q,
                    Rational act_q);

KernelWork elementwise_work(uint64_t elements, double flops, Rational act_q);

// Flops per element assumed for the element-wise benchmark kernel.
inline constexpr double kElementWiseBenchFlopsPerElement = 8.0;

}  // namespace pshard
