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

#include "kernels.h"

#include <cmath>

namespace pshard {

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::kMatMul: return "MatMul";
    case OpKind::kGqa: return "GQA";
    case OpKind::kMha: return "MHA";
    case OpKind::kMoeRoute: return "MoeRoute";
    case OpKind::kElementWise: return "ElementWise";
  }
  return "?";
}

OpKind parse_op_kind(std::string_view text) {
  for (OpKind op : {OpKind::kMatMul, OpKind::kGqa, OpKind::kMha,
                    OpKind::kMoeRoute, OpKind::kElementWise}) {
    if (to_string(op) == text) return op;
  }
  fail(ErrorCode::kParse, "unknown op kind '" + std::string(text) + "'");
}

KernelWork matmul_work(uint64_t m, uint64_t n, uint64_t k, Rational weight_q,
                       Rational act_q) {
  KernelWork w;
  w.flops = matmul_flops(m, n, k);
  w.read_bytes = static_cast<double>(weight_q.bytes_for(n * k)) +
                 static_cast<double>(m) * k * act_q.to_double();
  w.write_bytes = static_cast<double>(m) * n * act_q.to_double();
  return w;
}

KernelWork attention_work(uint64_t new_tokens, uint64_t kv_tokens,
                          double attn_pairs, uint64_t n_heads,
                          uint64_t n_kv_heads, uint64_t head_dim,
                          Rational kv_q, Rational act_q) {
  const double t = static_cast<double>(new_tokens);
  const double q_width = static_cast<double>(n_heads * head_dim);
  const double kv_width = static_cast<double>(n_kv_heads * head_dim);
  KernelWork w;
  w.flops = 4.0 * attn_pairs * q_width;
  w.read_bytes = 2.0 * static_cast<double>(kv_tokens) * kv_width *
                     kv_q.to_double() +
                 t * q_width * act_q.to_double();
  // Attention output plus the appended K/V rows for the new tokens.
  w.write_bytes = t * q_width * act_q.to_double() +
                  2.0 * t * kv_width * kv_q.to_double();
  return w;
}

double expected_active_experts(uint64_t tokens, uint64_t n_experts,
                               uint64_t top_k) {
  if (tokens == 0) return 0.0;
  const double n = static_cast<double>(n_experts);
  const double miss = 1.0 - static_cast<double>(top_k) / n;
  return n * (1.0 - std::pow(miss, static_cast<double>(tokens)));
}

KernelWork moe_work(uint64_t tokens, uint64_t d_model, uint64_t expert_ffn,
                    uint64_t n_experts, uint64_t top_k, Rational weight_q,
                    Rational act_q) {
  const double t = static_cast<double>(tokens);
  const double expert_bytes =
      static_cast<double>(weight_q.bytes_for(3 * d_model * expert_ffn));
  KernelWork w;
  w.flops = 2.0 * t * static_cast<double>(top_k) * 3.0 *
            static_cast<double>(d_model) * static_cast<double>(expert_ffn);
  w.read_bytes =
      expected_active_experts(tokens, n_experts, top_k) * expert_bytes +
      t * static_cast<double>(d_model) * act_q.to_double();
  w.write_bytes = t * static_cast<double>(d_model) * act_q.to_double();
  return w;
}

KernelWork elementwise_work(uint64_t elements, double flops, Rational act_q) {
  KernelWork w;
  w.flops = flops;
  w.read_bytes = static_cast<double>(elements) * act_q.to_double();
  w.write_bytes = w.read_bytes;
  return w;
}

}  // namespace pshard
