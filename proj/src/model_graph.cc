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

#include <sstream>

namespace pshard {

namespace {

constexpr std::array<std::string_view, kNumTensorClasses> kQuantKeys = {
    "quant.attn_weights", "quant.ffn_weights", "quant.output_weights",
    "quant.kv_cache", "quant.activations"};

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kInvalidArgument, "invalid model spec: " + what);
}

void add_elementwise(const ModelSpec& spec, uint64_t elements,
                     std::vector<ShardKernel>& out) {
  double matmul_total = 0.0;
  for (const auto& k : out) matmul_total += k.work.flops;
  ShardKernel ew;
  ew.op = OpKind::kElementWise;
  ew.quant = spec.bytes_per_elem(TensorClass::kActivations);
  ew.dims = {elements};
  ew.work = elementwise_work(elements,
                             spec.elementwise_flops_fraction * matmul_total,
                             ew.quant);
  out.push_back(std::move(ew));
}

ShardKernel matmul_kernel(uint64_t m, uint64_t n, uint64_t k, Rational wq,
                          Rational act) {
  return ShardKernel{OpKind::kMatMul, wq, {m, n, k},
                     matmul_work(m, n, k, wq, act)};
}

}  // namespace

void ModelSpec::validate() const {
  require(!name.empty(), "name is empty");
  require(n_layers > 0, "n_layers must be > 0");
  require(d_model > 0, "d_model must be > 0");
  require(n_heads > 0, "n_heads must be > 0");
  require(n_kv_heads > 0, "n_kv_heads must be > 0");
  require(head_dim > 0, "head_dim must be > 0");
  require(ffn_dim > 0, "ffn_dim must be > 0");
  require(vocab_size > 0, "vocab_size must be > 0");
  require(max_context > 0, "max_context must be > 0");
  require(n_heads % n_kv_heads == 0, "n_heads must be a multiple of n_kv_heads");
  for (size_t i = 0; i < kNumTensorClasses; ++i) {
    require(quant[i].num > 0, std::string(kQuantKeys[i]) + " must be > 0");
  }
  require(elementwise_flops_fraction >= 0.0,
          "elementwise_flops_fraction must be >= 0");
  if (moe) {
    require(moe->n_experts > 0, "moe.n_experts must be > 0");
    require(moe->top_k > 0, "moe.top_k must be > 0");
    require(moe->expert_ffn_dim > 0, "moe.expert_ffn_dim must be > 0");
    require(moe->top_k <= moe->n_experts, "moe.top_k must be <= moe.n_experts");
  }
}

ModelSpec parse_model_spec(std::string_view text) {
  KeyValueDoc doc = KeyValueDoc::parse(text, "pshard-model v1");
  ModelSpec spec;
  spec.name = doc.take_string("name");
  spec.n_layers = doc.take_u64("n_layers");
  spec.d_model = doc.take_u64("d_model");
  spec.n_heads = doc.take_u64("n_heads");
  spec.n_kv_heads = doc.take_u64("n_kv_heads");
  spec.head_dim = doc.take_u64("head_dim");
  spec.ffn_dim = doc.take_u64("ffn_dim");
  spec.gated_ffn = doc.take_bool_or("gated_ffn", true);
  spec.vocab_size = doc.take_u64("vocab_size");
  spec.max_context = doc.take_u64("max_context");
  spec.tied_embeddings = doc.take_bool_or("tied_embeddings", false);
  spec.elementwise_flops_fraction =
      doc.take_double_or("elementwise_flops_fraction", 0.02);
  for (size_t i = 0; i < kNumTensorClasses; ++i) {
    spec.quant[i] = doc.take_rational(std::string(kQuantKeys[i]));
  }
  if (doc.has("moe.n_experts") || doc.has("moe.top_k") ||
      doc.has("moe.expert_ffn_dim")) {
    MoeSpec moe;
    moe.n_experts = doc.take_u64("moe.n_experts");
    moe.top_k = doc.take_u64("moe.top_k");
    moe.expert_ffn_dim = doc.take_u64("moe.expert_ffn_dim");
    spec.moe = moe;
  }
  doc.expect_consumed();
  spec.validate();
  return spec;
}

ModelSpec load_model_spec(const std::string& path) {
  return parse_model_spec(read_file(path));
}

std::string serialize_model_spec(const ModelSpec& spec) {
  std::ostringstream out;
  out << "pshard-model v1\n"
      << "name = " << spec.name << "\n"
      << "n_layers = " << spec.n_layers << "\n"
      << "d_model = " << spec.d_model << "\n"
      << "n_heads = " << spec.n_heads << "\n"
      << "n_kv_heads = " << spec.n_kv_heads << "\n"
      << "head_dim = " << spec.head_dim << "\n"
      << "ffn_dim = " << spec.ffn_dim << "\n"
      << "gated_ffn = " << (spec.gated_ffn ? "true" : "false") << "\n"
      << "vocab_size = " << spec.vocab_size << "\n"
      << "max_context = " << spec.max_context << "\n"
      << "tied_embeddings = " << (spec.tied_embeddings ? "true" : "false")
      << "\n"
      << "elementwise_flops_fraction = "
      << format_double(spec.elementwise_flops_fraction) << "\n";
  for (size_t i = 0; i < kNumTensorClasses; ++i) {
    out << kQuantKeys[i] << " = " << spec.quant[i].to_string() << "\n";
  }
  if (spec.moe) {
    out << "moe.n_experts = " << spec.moe->n_experts << "\n"
        << "moe.top_k = " << spec.moe->top_k << "\n"
        << "moe.expert_ffn_dim = " << spec.moe->expert_ffn_dim << "\n";
  }
  return out.str();
}

std::string_view to_string(ShardKind kind) {
  switch (kind) {
    case ShardKind::kAttention: return "Attention";
    case ShardKind::kKvCache: return "KvCache";
    case ShardKind::kFfn: return "Ffn";
    case ShardKind::kMoeExpertGroup: return "MoeExpertGroup";
    case ShardKind::kOutputHead: return "OutputHead";
  }
  return "?";
}

ShardKind parse_shard_kind(std::string_view text) {
  for (ShardKind k : {ShardKind::kAttention, ShardKind::kKvCache,
                      ShardKind::kFfn, ShardKind::kMoeExpertGroup,
                      ShardKind::kOutputHead}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorCode::kParse, "unknown shard kind '" + std::string(text) + "'");
}

uint32_t shard_priority(ShardKind kind) {
  switch (kind) {
    case ShardKind::kAttention: return 0;
    case ShardKind::kKvCache: return 1;
    case ShardKind::kFfn:
    case ShardKind::kMoeExpertGroup: return 2;
    case ShardKind::kOutputHead: return 3;
  }
  return 3;
}

PassShape PassShape::single_request(uint64_t new_tokens,
                                    uint64_t context_len) {
  PassShape s;
  s.new_tokens = new_tokens;
  s.kv_tokens = context_len;
  s.attn_pairs = static_cast<double>(new_tokens) *
                 static_cast<double>(context_len);
  s.output_rows = new_tokens;
  return s;
}

uint64_t attention_weight_bytes(const ModelSpec& spec) {
  const Rational q = spec.bytes_per_elem(TensorClass::kAttnWeights);
  const uint64_t q_width = spec.n_heads * spec.head_dim;
  const uint64_t kv_width = spec.n_kv_heads * spec.head_dim;
  return q.bytes_for(spec.d_model * q_width) +
         2 * q.bytes_for(spec.d_model * kv_width) +
         q.bytes_for(q_width * spec.d_model);
}

uint64_t ffn_weight_bytes(const ModelSpec& spec) {
  const Rational q = spec.bytes_per_elem(TensorClass::kFfnWeights);
  if (spec.moe) {
    return spec.moe->n_experts *
               q.bytes_for(3 * spec.d_model * spec.moe->expert_ffn_dim) +
           q.bytes_for(spec.d_model * spec.moe->n_experts);
  }
  const uint64_t mats = spec.gated_ffn ? 3 : 2;
  return mats * q.bytes_for(spec.d_model * spec.ffn_dim);
}

uint64_t output_head_bytes(const ModelSpec& spec) {
  return spec.bytes_per_elem(TensorClass::kOutputWeights)
      .bytes_for(spec.d_model * spec.vocab_size);
}

uint64_t kv_cache_layer_bytes(const ModelSpec& spec, uint64_t context_len) {
  return spec.bytes_per_elem(TensorClass::kKvCache)
      .bytes_for(2 * spec.n_kv_heads * spec.head_dim * context_len);
}

uint64_t kv_cache_bytes(const ModelSpec& spec, uint64_t context_len) {
  return spec.n_layers * kv_cache_layer_bytes(spec, context_len);
}

uint64_t total_model_bytes(const ModelSpec& spec) {
  return spec.n_layers * (attention_weight_bytes(spec) + ffn_weight_bytes(spec)) +
         output_head_bytes(spec);
}

uint64_t file_bytes(const ModelSpec& spec) {
  return total_model_bytes(spec) +
         (spec.tied_embeddings ? 0 : output_head_bytes(spec));
}

SubLayerShard::SubLayerShard(std::shared_ptr<const ModelSpec> spec,
                             uint32_t id, uint32_t layer_index,
                             ShardKind kind, uint64_t context_len)
    : spec_(std::move(spec)), id_(id), layer_index_(layer_index), kind_(kind) {
  weight_bytes_ = bytes_at(context_len);
}

uint64_t SubLayerShard::bytes_at(uint64_t kv_tokens) const {
  switch (kind_) {
    case ShardKind::kAttention: return attention_weight_bytes(*spec_);
    case ShardKind::kKvCache: return kv_cache_layer_bytes(*spec_, kv_tokens);
    case ShardKind::kFfn:
    case ShardKind::kMoeExpertGroup: return ffn_weight_bytes(*spec_);
    case ShardKind::kOutputHead: return output_head_bytes(*spec_);
  }
  return 0;
}

uint64_t SubLayerShard::kv_append_bytes(const PassShape& shape) const {
  if (kind_ != ShardKind::kKvCache) return 0;
  return kv_cache_layer_bytes(*spec_, shape.new_tokens);
}

std::vector<ShardKernel> SubLayerShard::kernels(const PassShape& shape) const {
  const ModelSpec& s = *spec_;
  const Rational act = s.bytes_per_elem(TensorClass::kActivations);
  const uint64_t t = shape.new_tokens;
  const uint64_t q_width = s.n_heads * s.head_dim;
  const uint64_t kv_width = s.n_kv_heads * s.head_dim;
  std::vector<ShardKernel> out;
  switch (kind_) {
    case ShardKind::kAttention: {
      const Rational wq = s.bytes_per_elem(TensorClass::kAttnWeights);
      out.push_back(matmul_kernel(t, q_width, s.d_model, wq, act));
      out.push_back(matmul_kernel(t, kv_width, s.d_model, wq, act));
      out.push_back(matmul_kernel(t, kv_width, s.d_model, wq, act));
      out.push_back(matmul_kernel(t, s.d_model, q_width, wq, act));
      add_elementwise(s, 2 * t * s.d_model, out);
      break;
    }
    case ShardKind::kKvCache: {
      const Rational kvq = s.bytes_per_elem(TensorClass::kKvCache);
      ShardKernel k;
      k.op = s.n_kv_heads < s.n_heads ? OpKind::kGqa : OpKind::kMha;
      k.quant = kvq;
      k.dims = {t, shape.kv_tokens, s.n_heads, s.n_kv_heads, s.head_dim};
      k.work = attention_work(t, shape.kv_tokens, shape.attn_pairs, s.n_heads,
                              s.n_kv_heads, s.head_dim, kvq, act);
      out.push_back(std::move(k));
      break;
    }
    case ShardKind::kFfn: {
      const Rational wq = s.bytes_per_elem(TensorClass::kFfnWeights);
      if (s.gated_ffn) out.push_back(matmul_kernel(t, s.ffn_dim, s.d_model, wq, act));
      out.push_back(matmul_kernel(t, s.ffn_dim, s.d_model, wq, act));
      out.push_back(matmul_kernel(t, s.d_model, s.ffn_dim, wq, act));
      add_elementwise(s, 2 * t * s.ffn_dim, out);
      break;
    }
    case ShardKind::kMoeExpertGroup: {
      const Rational wq = s.bytes_per_elem(TensorClass::kFfnWeights);
      const MoeSpec& m = *s.moe;
      out.push_back(matmul_kernel(t, m.n_experts, s.d_model, wq, act));
      ShardKernel k;
      k.op = OpKind::kMoeRoute;
      k.quant = wq;
      k.dims = {t, s.d_model, m.expert_ffn_dim, m.n_experts, m.top_k};
      k.work = moe_work(t, s.d_model, m.expert_ffn_dim, m.n_experts, m.top_k,
                        wq, act);
      out.push_back(std::move(k));
      add_elementwise(s, 2 * t * m.top_k * m.expert_ffn_dim, out);
      break;
    }
    case ShardKind::kOutputHead: {
      const Rational wq = s.bytes_per_elem(TensorClass::kOutputWeights);
      out.push_back(
          matmul_kernel(shape.output_rows, s.vocab_size, s.d_model, wq, act));
      add_elementwise(s, 2 * shape.output_rows * s.d_model, out);
      break;
    }
  }
  return out;
}

ShardCost SubLayerShard::cost(const PassShape& shape) const {
  if (shape.new_tokens == 0) {
    fail(ErrorCode::kInvalidArgument, "shard cost requires new_tokens >= 1");
  }
  ShardCost c;
  for (const auto& k : kernels(shape)) {
    c.flops += k.work.flops;
    c.read_bytes += k.work.read_bytes;
    c.write_bytes += k.work.write_bytes;
  }
  return c;
}

std::vector<SubLayerShard> build_shards(std::shared_ptr<const ModelSpec> spec,
                                        uint64_t context_len) {
  spec->validate();
  if (context_len > spec->max_context) {
    fail(ErrorCode::kInvalidArgument,
         "context length " + std::to_string(context_len) +
             " exceeds max_context " + std::to_string(spec->max_context));
  }
  std::vector<SubLayerShard> shards;
  shards.reserve(3 * spec->n_layers + 1);
  const ShardKind ffn_kind =
      spec->moe ? ShardKind::kMoeExpertGroup : ShardKind::kFfn;
  uint32_t id = 0;
  for (uint32_t layer = 0; layer < spec->n_layers; ++layer) {
    shards.emplace_back(spec, id++, layer, ShardKind::kAttention, context_len);
    shards.emplace_back(spec, id++, layer, ShardKind::kKvCache, context_len);
    shards.emplace_back(spec, id++, layer, ffn_kind, context_len);
  }
  shards.emplace_back(spec, id++, static_cast<uint32_t>(spec->n_layers),
                      ShardKind::kOutputHead, context_len);
  return shards;
}

}  // namespace pshard
