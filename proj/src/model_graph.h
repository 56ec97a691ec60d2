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

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common.h"
#include "kernels.h"

namespace pshard {

enum class TensorClass {
  kAttnWeights = 0,
  kFfnWeights,
  kOutputWeights,
  kKvCache,
  kActivations,
};
inline constexpr size_t kNumTensorClasses = 5;

struct MoeSpec {
  uint64_t n_experts = 0;
  uint64_t top_k = 0;
  uint64_t expert_ffn_dim = 0;
};

struct ModelSpec {
  std::string name;
  uint64_t n_layers = 0;
  uint64_t d_model = 0;
  uint64_t n_heads = 0;
  uint64_t n_kv_heads = 0;
  uint64_t head_dim = 0;
  uint64_t ffn_dim = 0;
  bool gated_ffn = true;
  std::optional<MoeSpec> moe;
  uint64_t vocab_size = 0;
  uint64_t max_context = 0;
  // The input embedding table is gathered on the CPU and never scheduled;
  // it only contributes to the on-disk size.
  bool tied_embeddings = false;
  // Softmax, norms, rope and other element-wise work, as a fraction of the
  // shard's matmul flops.
  double elementwise_flops_fraction = 0.02;
  std::array<Rational, kNumTensorClasses> quant{};

  Rational bytes_per_elem(TensorClass c) const {
    return quant[static_cast<size_t>(c)];
  }

  // Throws Error(kInvalidArgument) naming the violated constraint.
  void validate() const;
};

ModelSpec parse_model_spec(std::string_view text);
ModelSpec load_model_spec(const std::string& path);
std::string serialize_model_spec(const ModelSpec& spec);

enum class ShardKind { kAttention, kKvCache, kFfn, kMoeExpertGroup, kOutputHead };

std::string_view to_string(ShardKind kind);
ShardKind parse_shard_kind(std::string_view text);

// Fixed importance order for VRAM pinning: attention, KV cache, FFN/experts,
// output head. Lower is more important.
uint32_t shard_priority(ShardKind kind);

// Token geometry of one schedule pass.
struct PassShape {
  uint64_t new_tokens = 1;
  // Cached tokens read by attention, summed over the requests in the pass.
  uint64_t kv_tokens = 0;
  // Sum over requests of new_tokens_r * attended_tokens_r.
  double attn_pairs = 0.0;
  // Token rows that produce logits.
  uint64_t output_rows = 1;

  static PassShape single_request(uint64_t new_tokens, uint64_t context_len);
};

struct ShardKernel {
  OpKind op = OpKind::kMatMul;
  Rational quant;
  std::vector<uint64_t> dims;
  KernelWork work;
};

struct ShardCost {
  double flops = 0.0;
  double read_bytes = 0.0;
  double write_bytes = 0.0;
};

class SubLayerShard {
 public:
  SubLayerShard(std::shared_ptr<const ModelSpec> spec, uint32_t id,
                uint32_t layer_index, ShardKind kind, uint64_t context_len);

  uint32_t id() const { return id_; }
  uint32_t layer_index() const { return layer_index_; }
  ShardKind kind() const { return kind_; }
  uint32_t priority() const { return shard_priority(kind_); }
  // Resident footprint at the context length the shard list was built for.
  uint64_t weight_bytes() const { return weight_bytes_; }
  // Footprint when `kv_tokens` tokens are cached; only KV shards vary.
  uint64_t bytes_at(uint64_t kv_tokens) const;
  // K/V rows appended by one pass (KV shards only).
  uint64_t kv_append_bytes(const PassShape& shape) const;

  std::vector<ShardKernel> kernels(const PassShape& shape) const;
  ShardCost cost(const PassShape& shape) const;

  const ModelSpec& spec() const { return *spec_; }

 private:
  std::shared_ptr<const ModelSpec> spec_;
  uint32_t id_;
  uint32_t layer_index_;
  ShardKind kind_;
  uint64_t weight_bytes_;
};

// Shards in topological order: per layer attention, KV cache, then FFN or
// expert group; the output head last. Throws if context_len > max_context.
std::vector<SubLayerShard> build_shards(std::shared_ptr<const ModelSpec> spec,
                                        uint64_t context_len);

uint64_t kv_cache_bytes(const ModelSpec& spec, uint64_t context_len);
uint64_t kv_cache_layer_bytes(const ModelSpec& spec, uint64_t context_len);
// Weight bytes of every schedulable shard (excludes the KV cache).
uint64_t total_model_bytes(const ModelSpec& spec);
// total_model_bytes plus the input embedding table when it is not tied.
uint64_t file_bytes(const ModelSpec& spec);

uint64_t attention_weight_bytes(const ModelSpec& spec);
uint64_t ffn_weight_bytes(const ModelSpec& spec);
uint64_t output_head_bytes(const ModelSpec& spec);

}  // namespace pshard
