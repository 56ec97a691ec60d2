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

#include "profile_db.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pshard {

namespace {

constexpr std::string_view kProfileHeader = "pshard-profile v1";
constexpr std::string_view kEntriesMarker = "---";

std::string_view to_string(ProfileGenerator g) {
  return g == ProfileGenerator::kMeasured ? "Measured" : "Synthetic";
}

ProfileGenerator parse_generator(std::string_view text) {
  if (text == "Measured") return ProfileGenerator::kMeasured;
  if (text == "Synthetic") return ProfileGenerator::kSynthetic;
  fail(ErrorCode::kParse, "unknown profile generator '" + std::string(text) + "'");
}

std::vector<uint64_t> parse_dims(std::string_view text) {
  std::vector<uint64_t> dims;
  for (std::string_view d : split(text, ',')) dims.push_back(parse_u64(d));
  return dims;
}

}  // namespace

std::strong_ordering operator<=>(const KernelKey& a, const KernelKey& b) {
  if (auto c = a.op <=> b.op; c != 0) return c;
  if (auto c = a.quant <=> b.quant; c != 0) return c;
  if (auto c = a.backend <=> b.backend; c != 0) return c;
  if (auto c = a.threads <=> b.threads; c != 0) return c;
  if (auto c = a.contention <=> b.contention; c != 0) return c;
  return a.dims <=> b.dims;
}

void validate_key(const KernelKey& key) {
  if (key.dims.empty()) {
    fail(ErrorCode::kInvalidArgument, "kernel key with empty dims");
  }
  if (key.backend == Backend::kGpu &&
      (key.threads != 0 || key.contention != Contention::kStandalone)) {
    fail(ErrorCode::kInvalidArgument,
         "GPU kernel keys must have threads=0 and contention=Standalone");
  }
}

std::string format_dims(std::span<const uint64_t> dims) {
  std::string out;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

ProfileDb::GroupKey ProfileDb::group_of(const KernelKey& key) {
  return GroupKey{key.op,      key.quant,      key.backend,
                  key.threads, key.contention, key.dims.size()};
}

ProfileDb::ProfileDb(ProfileMetadata metadata, std::vector<ProfileEntry> entries)
    : metadata_(std::move(metadata)), entries_(std::move(entries)) {
  log_dims_.reserve(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i) {
    const ProfileEntry& e = entries_[i];
    validate_key(e.key);
    if (!(e.flops_per_sec > 0) || !(e.bytes_per_sec > 0)) {
      fail(ErrorCode::kInvalidArgument,
           "profile entry rates must be > 0 (entry " + std::to_string(i) + ")");
    }
    for (uint64_t d : e.key.dims) {
      if (d == 0) fail(ErrorCode::kInvalidArgument, "profile dims must be > 0");
    }
    if (!exact_.emplace(e.key, i).second) {
      fail(ErrorCode::kInvalidArgument,
           "duplicate profile key " + std::string(to_string(e.key.op)) + " [" +
               format_dims(e.key.dims) + "]");
    }
    groups_[group_of(e.key)].push_back(i);
    std::vector<double> logs;
    logs.reserve(e.key.dims.size());
    for (uint64_t d : e.key.dims) logs.push_back(std::log(static_cast<double>(d)));
    log_dims_.push_back(std::move(logs));
  }
}

const ProfileEntry* ProfileDb::lookup_exact(const KernelKey& key) const {
  auto it = exact_.find(key);
  return it == exact_.end() ? nullptr : &entries_[it->second];
}

double ProfileDb::log_distance(std::span<const uint64_t> a,
                               std::span<const uint64_t> b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = std::log(static_cast<double>(std::max<uint64_t>(a[i], 1))) -
                     std::log(static_cast<double>(std::max<uint64_t>(b[i], 1)));
    sum += d * d;
  }
  return std::sqrt(sum);
}

const ProfileEntry* ProfileDb::lookup_nearest(const KernelKey& key) const {
  auto it = groups_.find(group_of(key));
  if (it == groups_.end()) return nullptr;
  std::vector<double> query;
  query.reserve(key.dims.size());
  for (uint64_t d : key.dims) {
    query.push_back(std::log(static_cast<double>(std::max<uint64_t>(d, 1))));
  }
  const ProfileEntry* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  for (size_t idx : it->second) {
    const ProfileEntry& e = entries_[idx];
    if (e.key.dims == key.dims) continue;
    const auto& logs = log_dims_[idx];
    double sum = 0.0;
    for (size_t i = 0; i < query.size(); ++i) {
      const double d = logs[i] - query[i];
      sum += d * d;
    }
    const double dist = std::sqrt(sum);
    if (best == nullptr || dist < best_dist ||
        (dist == best_dist && e.key.dims < best->key.dims)) {
      best = &e;
      best_dist = dist;
    }
  }
  return best;
}

RooflineBound roofline_bound(double kernel_flops, double kernel_bytes,
                             const ProfileEntry& entry) {
  if (!(kernel_bytes > 0)) {
    fail(ErrorCode::kInvalidArgument, "roofline requires kernel_bytes > 0");
  }
  if (kernel_flops < 0) {
    fail(ErrorCode::kInvalidArgument, "roofline requires kernel_flops >= 0");
  }
  // AI >= ridge, i.e. flops/bytes >= F/B, evaluated without dividing.
  const double lhs = kernel_flops * entry.bytes_per_sec;
  const double rhs = entry.flops_per_sec * kernel_bytes;
  return lhs >= rhs ? RooflineBound::kCompute : RooflineBound::kMemory;
}

double roofline_time(double kernel_flops, double kernel_bytes,
                     const ProfileEntry& entry) {
  return roofline_bound(kernel_flops, kernel_bytes, entry) ==
                 RooflineBound::kCompute
             ? kernel_flops / entry.flops_per_sec
             : kernel_bytes / entry.bytes_per_sec;
}

std::string_view to_string(MatchKind m) {
  switch (m) {
    case MatchKind::kExact: return "Exact";
    case MatchKind::kPartial: return "Partial";
    case MatchKind::kSkipped: return "Skipped";
  }
  return "?";
}

KernelEstimate estimate_kernel_time(const ProfileDb& db, const KernelKey& key,
                                    double kernel_flops, double kernel_bytes) {
  if (const ProfileEntry* e = db.lookup_exact(key)) {
    return {kernel_flops / e->flops_per_sec, MatchKind::kExact};
  }
  if (const ProfileEntry* e = db.lookup_nearest(key)) {
    return {roofline_time(kernel_flops, kernel_bytes, *e), MatchKind::kPartial};
  }
  return {0.0, MatchKind::kSkipped};
}

MatchStats match_stats(const ProfileDb& db, std::span<const KernelQuery> kernels) {
  if (kernels.empty()) {
    fail(ErrorCode::kInvalidArgument, "match_stats needs at least one kernel");
  }
  size_t exact = 0, partial = 0, skipped = 0;
  for (const auto& q : kernels) {
    switch (estimate_kernel_time(db, q.key, q.flops, q.bytes).match) {
      case MatchKind::kExact: ++exact; break;
      case MatchKind::kPartial: ++partial; break;
      case MatchKind::kSkipped: ++skipped; break;
    }
  }
  const double n = static_cast<double>(kernels.size());
  return {exact / n, partial / n, skipped / n};
}

SynthLadder SynthLadder::defaults() {
  SynthLadder l;
  l.tokens = {1, 4, 16, 32, 64, 512, 1024, 2048, 4096, 8192, 16384};
  l.matmul_n = {1024, 4096, 16384, 65536, 262144};
  l.matmul_k = {1024, 4096, 16384};
  l.attn_kv_tokens = {1024, 4096, 16384, 65536};
  l.attn_heads = {16, 32, 64};
  l.attn_group = {4, 8};
  l.attn_head_dim = {128};
  l.moe_d_model = {2048, 4096};
  l.moe_expert_ffn = {768, 1536};
  l.moe_experts = {128};
  l.moe_top_k = {8};
  for (uint64_t e = 1024; e <= (uint64_t{1} << 30); e *= 4) {
    l.elementwise_elems.push_back(e);
  }
  // f32, f16, q8_0, q6_k, q4, q2_k ffn mix, q2_k.
  l.weight_quants = {Rational{4, 1},    Rational{2, 1},  Rational{17, 16},
                     Rational{105, 128}, Rational{9, 16}, Rational{11, 32},
                     Rational{21, 64}};
  l.kv_quants = {Rational{4, 1}, Rational{2, 1}, Rational{17, 16}};
  l.act_quants = {Rational{4, 1}, Rational{2, 1}};
  return l;
}

namespace {

struct BenchKernel {
  OpKind op;
  Rational quant;
  std::vector<uint64_t> dims;
  KernelWork work;
};

// Activations of benchmark kernels are f32.
constexpr Rational kBenchAct{4, 1};

std::vector<BenchKernel> bench_kernels(const SynthLadder& l) {
  std::vector<BenchKernel> out;
  for (const Rational& q : l.weight_quants) {
    for (uint64_t m : l.tokens) {
      for (uint64_t n : l.matmul_n) {
        for (uint64_t k : l.matmul_k) {
          out.push_back({OpKind::kMatMul, q, {m, n, k},
                         matmul_work(m, n, k, q, kBenchAct)});
        }
      }
    }
    for (uint64_t t : l.tokens) {
      for (uint64_t d : l.moe_d_model) {
        for (uint64_t f : l.moe_expert_ffn) {
          for (uint64_t e : l.moe_experts) {
            for (uint64_t k : l.moe_top_k) {
              out.push_back({OpKind::kMoeRoute, q, {t, d, f, e, k},
                             moe_work(t, d, f, e, k, q, kBenchAct)});
            }
          }
        }
      }
    }
  }
  for (const Rational& q : l.kv_quants) {
    for (uint64_t t : l.tokens) {
      for (uint64_t ctx : l.attn_kv_tokens) {
        for (uint64_t h : l.attn_heads) {
          for (uint64_t hd : l.attn_head_dim) {
            const double pairs = static_cast<double>(t) * ctx;
            out.push_back({OpKind::kMha, q, {t, ctx, h, h, hd},
                           attention_work(t, ctx, pairs, h, h, hd, q, kBenchAct)});
            for (uint64_t g : l.attn_group) {
              if (h % g != 0 || g == 1) continue;
              const uint64_t kv = h / g;
              out.push_back({OpKind::kGqa, q, {t, ctx, h, kv, hd},
                             attention_work(t, ctx, pairs, h, kv, hd, q, kBenchAct)});
            }
          }
        }
      }
    }
  }
  for (const Rational& q : l.act_quants) {
    for (uint64_t e : l.elementwise_elems) {
      out.push_back({OpKind::kElementWise, q, {e},
                     elementwise_work(e, kElementWiseBenchFlopsPerElement *
                                             static_cast<double>(e),
                                      q)});
    }
  }
  return out;
}

ProfileEntry observe(const MachineSpec& m, const BenchKernel& k, Backend b,
                     uint32_t threads, Contention c) {
  const double t = machine_kernel_time(m, b, threads, c, k.work);
  ProfileEntry e;
  e.key = KernelKey{k.op, k.quant, b, threads, c, k.dims};
  e.flops_per_sec = k.work.flops / t;
  e.bytes_per_sec = k.work.bytes() / t;
  return e;
}

}  // namespace

size_t synth_entry_count(const SynthLadder& ladder, uint32_t threads) {
  return bench_kernels(ladder).size() * (1 + 2 * static_cast<size_t>(threads));
}

ProfileDb synth_profile(const MachineSpec& machine, const SynthLadder& ladder,
                        std::string timestamp) {
  machine.validate();
  const std::vector<BenchKernel> kernels = bench_kernels(ladder);
  std::vector<ProfileEntry> entries;
  entries.reserve(kernels.size() * (1 + 2 * machine.threads_available));
  for (const BenchKernel& k : kernels) {
    entries.push_back(observe(machine, k, Backend::kGpu, 0,
                              Contention::kStandalone));
    for (uint32_t t = 1; t <= machine.threads_available; ++t) {
      for (Contention c : {Contention::kStandalone,
                           Contention::kUnderPcieTraffic}) {
        entries.push_back(observe(machine, k, Backend::kCpu, t, c));
      }
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const ProfileEntry& a, const ProfileEntry& b) {
              return a.key < b.key;
            });
  ProfileMetadata meta{machine.name, std::move(timestamp),
                       ProfileGenerator::kSynthetic};
  return ProfileDb(std::move(meta), std::move(entries));
}

std::string serialize_profile(const ProfileDb& db) {
  std::string out;
  out.reserve(db.size() * 72 + 256);
  out += kProfileHeader;
  out += "\nmachine_id = " + db.metadata().machine_id;
  out += "\ngeneration_timestamp = " + db.metadata().generation_timestamp;
  out += "\ngenerator = " + std::string(to_string(db.metadata().generator));
  out += "\nentries = " + std::to_string(db.size());
  out += "\n";
  out += kEntriesMarker;
  out += "\n# op quant backend threads contention dims flops_per_sec bytes_per_sec\n";
  for (const ProfileEntry& e : db.entries()) {
    out += to_string(e.key.op);
    out += ' ';
    out += e.key.quant.to_string();
    out += ' ';
    out += to_string(e.key.backend);
    out += ' ';
    out += std::to_string(e.key.threads);
    out += ' ';
    out += to_string(e.key.contention);
    out += ' ';
    out += format_dims(e.key.dims);
    out += ' ';
    out += format_double(e.flops_per_sec);
    out += ' ';
    out += format_double(e.bytes_per_sec);
    out += '\n';
  }
  return out;
}

ProfileDb parse_profile(std::string_view text) {
  const std::string marker = "\n" + std::string(kEntriesMarker) + "\n";
  const size_t split_at = text.find(marker);
  if (split_at == std::string_view::npos) {
    // A header line mismatch is the more useful diagnostic when present.
    KeyValueDoc::parse(text.substr(0, text.find('\n')), kProfileHeader);
    fail(ErrorCode::kParse, "profile is missing the '---' entries marker");
  }
  KeyValueDoc doc = KeyValueDoc::parse(text.substr(0, split_at), kProfileHeader);
  ProfileMetadata meta;
  meta.machine_id = doc.take_string("machine_id");
  meta.generation_timestamp = doc.take_string("generation_timestamp");
  meta.generator = parse_generator(doc.take_string("generator"));
  const uint64_t declared = doc.take_u64("entries");
  doc.expect_consumed();

  std::vector<ProfileEntry> entries;
  entries.reserve(declared);
  size_t line_no = 0;
  for (std::string_view line : split(text.substr(split_at + marker.size()), '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> f;
    for (std::string_view tok : split(line, ' ')) {
      if (!tok.empty()) f.push_back(tok);
    }
    if (f.size() != 8) {
      fail(ErrorCode::kParse,
           "profile entry line " + std::to_string(line_no) + ": expected 8 fields");
    }
    ProfileEntry e;
    e.key.op = parse_op_kind(f[0]);
    e.key.quant = Rational::parse(f[1]);
    e.key.backend = parse_backend(f[2]);
    e.key.threads = static_cast<uint32_t>(parse_u64(f[3]));
    e.key.contention = parse_contention(f[4]);
    e.key.dims = parse_dims(f[5]);
    e.flops_per_sec = parse_double(f[6]);
    e.bytes_per_sec = parse_double(f[7]);
    entries.push_back(std::move(e));
  }
  if (entries.size() != declared) {
    fail(ErrorCode::kParse, "profile declares " + std::to_string(declared) +
                                " entries but contains " +
                                std::to_string(entries.size()));
  }
  return ProfileDb(std::move(meta), std::move(entries));
}

ProfileDb load_profile(const std::string& path) {
  return parse_profile(read_file(path));
}

void save_profile(const ProfileDb& db, const std::string& path) {
  write_file(path, serialize_profile(db));
}

}  // namespace pshard
