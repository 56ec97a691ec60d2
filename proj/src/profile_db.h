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

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common.h"
#include "kernels.h"
#include "machine.h"

namespace pshard {

struct KernelKey {
  OpKind op = OpKind::kMatMul;
  // Bytes per element of the kernel's dominant operand (weights for matmul
  // and expert kernels, cache entries for attention, activations for
  // element-wise kernels).
  Rational quant;
  Backend backend = Backend::kCpu;
  // CPU only; always 0 for GPU keys.
  uint32_t threads = 0;
  Contention contention = Contention::kStandalone;
  std::vector<uint64_t> dims;

  friend bool operator==(const KernelKey&, const KernelKey&) = default;
  friend std::strong_ordering operator<=>(const KernelKey& a,
                                          const KernelKey& b);
};

// Throws Error(kInvalidArgument) for empty dims or GPU keys with threads or
// contention set.
void validate_key(const KernelKey& key);

struct ProfileEntry {
  KernelKey key;
  // Throughputs observed for this exact benchmark kernel.
  double flops_per_sec = 0.0;
  double bytes_per_sec = 0.0;
};

enum class ProfileGenerator { kMeasured, kSynthetic };

struct ProfileMetadata {
  std::string machine_id;
  std::string generation_timestamp;
  ProfileGenerator generator = ProfileGenerator::kSynthetic;
};

class ProfileDb {
 public:
  ProfileDb() = default;
  // Validates every entry and rejects duplicate keys.
  ProfileDb(ProfileMetadata metadata, std::vector<ProfileEntry> entries);

  const ProfileMetadata& metadata() const { return metadata_; }
  const std::vector<ProfileEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  // Entry with an identical key, or nullptr.
  const ProfileEntry* lookup_exact(const KernelKey& key) const;

  // Among entries that agree with `key` on everything but dims (and have the
  // same dims arity), the one closest in element-wise log-dims Euclidean
  // distance. Ties go to the lexicographically smallest dims. Entries with
  // dims identical to the query are not partial matches. nullptr if none.
  const ProfileEntry* lookup_nearest(const KernelKey& key) const;

  // Log-space distance used by lookup_nearest; dims must have equal arity.
  static double log_distance(std::span<const uint64_t> a,
                             std::span<const uint64_t> b);

 private:
  struct GroupKey {
    OpKind op;
    Rational quant;
    Backend backend;
    uint32_t threads;
    Contention contention;
    size_t arity;
    friend std::strong_ordering operator<=>(const GroupKey&,
                                            const GroupKey&) = default;
    friend bool operator==(const GroupKey&, const GroupKey&) = default;
  };
  static GroupKey group_of(const KernelKey& key);

  ProfileMetadata metadata_;
  std::vector<ProfileEntry> entries_;
  std::map<KernelKey, size_t> exact_;
  std::map<GroupKey, std::vector<size_t>> groups_;
  std::vector<std::vector<double>> log_dims_;
};

enum class RooflineBound { kCompute, kMemory };

// Arithmetic intensity at or above the entry's ridge point is compute bound.
RooflineBound roofline_bound(double kernel_flops, double kernel_bytes,
                             const ProfileEntry& entry);
double roofline_time(double kernel_flops, double kernel_bytes,
                     const ProfileEntry& entry);

enum class MatchKind { kExact, kPartial, kSkipped };
std::string_view to_string(MatchKind m);

struct KernelEstimate {
  double seconds = 0.0;
  MatchKind match = MatchKind::kSkipped;
};

KernelEstimate estimate_kernel_time(const ProfileDb& db, const KernelKey& key,
                                    double kernel_flops, double kernel_bytes);

struct KernelQuery {
  KernelKey key;
  double flops = 0.0;
  double bytes = 0.0;
};

struct MatchStats {
  double exact_frac = 0.0;
  double partial_frac = 0.0;
  double skipped_frac = 0.0;
};

MatchStats match_stats(const ProfileDb& db, std::span<const KernelQuery> kernels);

// Benchmark ladders used by the synthetic profiler.
struct SynthLadder {
  std::vector<uint64_t> tokens;
  std::vector<uint64_t> matmul_n;
  std::vector<uint64_t> matmul_k;
  std::vector<uint64_t> attn_kv_tokens;
  std::vector<uint64_t> attn_heads;
  std::vector<uint64_t> attn_group;  // n_heads / n_kv_heads for GQA
  std::vector<uint64_t> attn_head_dim;
  std::vector<uint64_t> moe_d_model;
  std::vector<uint64_t> moe_expert_ffn;
  std::vector<uint64_t> moe_experts;
  std::vector<uint64_t> moe_top_k;
  std::vector<uint64_t> elementwise_elems;
  std::vector<Rational> weight_quants;
  std::vector<Rational> kv_quants;
  std::vector<Rational> act_quants;

  static SynthLadder defaults();
};

// Stand-in for the install-time benchmark run: one entry per point of the
// ladder grid, per CPU thread count 1..threads_available and contention
// state, plus GPU entries. Rates are the observed throughputs of each
// benchmark kernel on the machine model.
ProfileDb synth_profile(const MachineSpec& machine,
                        const SynthLadder& ladder = SynthLadder::defaults(),
                        std::string timestamp = "1970-01-01T00:00:00Z");

// Number of entries synth_profile emits for a machine with `threads` CPU
// threads, counted from the ladder alone.
size_t synth_entry_count(const SynthLadder& ladder, uint32_t threads);

std::string serialize_profile(const ProfileDb& db);
ProfileDb parse_profile(std::string_view text);
ProfileDb load_profile(const std::string& path);
void save_profile(const ProfileDb& db, const std::string& path);

std::string format_dims(std::span<const uint64_t> dims);

}  // namespace pshard
