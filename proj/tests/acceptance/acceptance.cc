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

// Acceptance checks A1-A10. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "machine.h"
#include "model_graph.h"
#include "planner.h"
#include "profile_db.h"
#include "simulator.h"
#include "test_util.h"
#include "vlm_memory.h"

namespace pshard {
namespace {

using testing::data_path;
using testing::load_machine;
using testing::load_model;

constexpr uint64_t kMb = 1000000;
const std::vector<uint64_t> kBudgetsMb = {2000,  4000,  6000,  8000,
                                          12000, 16000, 24000, 32000};
const std::vector<std::string> kModels = {"nemo4b", "nemo8b", "qwen30b",
                                          "qwen235b", "vnemo4b", "cr1"};

// Outcome of one criterion: `detail` summarizes what was measured.
struct Outcome {
  bool ok = true;
  std::string detail;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* format, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), format, a);
  return buf;
}

// Shared by A1 and A2.
struct GridRun {
  MachineSpec machine;
  ProfileDb db;
  ValidateReport report;
};

GridRun& a1_grid() {
  static GridRun run = [] {
    GridRun r;
    r.machine = load_machine("cli3");
    r.db = synth_profile(r.machine);
    ValidateConfig c;
    c.models = {load_model("nemo8b"), load_model("qwen30b")};
    c.machine = r.machine;
    c.db = &r.db;
    c.pcie_rates = {13e9, 50e9};
    c.thread_counts = {1, 16};
    c.contexts = {4096, 16384};
    c.budgets_mb = kBudgetsMb;
    r.report = run_validate(c);
    return r;
  }();
  return run;
}

Outcome a1() {
  const ValidateReport& r = a1_grid().report;
  Outcome o;
  o.ok = r.cases.size() >= 105 && r.feasible > 0 && r.agreement() >= 0.95;
  o.detail = std::to_string(r.agree) + "/" + std::to_string(r.feasible) +
             " feasible configurations agree (" + std::to_string(r.cases.size()) +
             " in grid)";
  return o;
}

Outcome a2() {
  GridRun& g = a1_grid();
  Outcome o;
  static const char* kFiles[3] = {"gpuonly", "static", "dynamic"};
  std::string wins;
  for (int k = 0; k < 3; ++k) {
    const size_t n = g.report.oracle_wins[k];
    wins += std::string(k ? " " : "") + std::string(to_string(static_cast<PlanKind>(k))) +
            "=" + std::to_string(n);
    if (n == 0) o.ok = false;
  }
  // Each committed witness must replay to its recorded winner.
  for (int k = 0; k < 3; ++k) {
    const std::string text =
        read_file(data_path(std::string("witness/") + kFiles[k] + ".witness"));
    if (text.find("# Oracle reasoning") == std::string::npos) {
      o.ok = false;
      wins += std::string("; ") + kFiles[k] + " lacks reasoning";
      continue;
    }
    const Witness w = parse_witness(text);
    MachineSpec m = load_machine(w.machine);
    m.pcie_h2d_bw = w.pcie_rate;
    m.pcie_d2h_bw = w.pcie_rate;
    const ProfileDb db = synth_profile(m);
    const auto shards = build_shards(load_model(w.model), w.context);
    const OracleResult r = oracle_best_plan(shards, m, db, w.budget_mb * kMb,
                                            w.tier, w.context, w.threads);
    if (w.winner != static_cast<PlanKind>(k) || r.best != w.winner) {
      o.ok = false;
      wins += std::string("; ") + kFiles[k] + " witness does not replay";
    }
  }
  o.detail = "oracle wins " + wins + "; 3 witnesses replayed";
  return o;
}

Outcome a3() {
  std::mt19937_64 rng(3);
  const std::vector<uint64_t> tiers(kTokenTiers.begin(), kTokenTiers.end());
  size_t mismatches = 0;
  constexpr int kTrials = 10000;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<double> times(tiers.size());
    for (auto& t : times) {
      t = rng() % 6 == 0 ? -1.0
                         : std::ldexp(static_cast<double>(rng() % 4096 + 1), -12);
    }
    if (std::all_of(times.begin(), times.end(), [](double t) { return t < 0; })) {
      times[rng() % times.size()] = 1.0;
    }
    const uint64_t tokens = 1 + rng() % 65536;
    size_t best = tiers.size();
    double best_cost = 0;
    for (size_t i = 0; i < tiers.size(); ++i) {
      if (times[i] < 0) continue;
      const double cost = std::ceil(static_cast<double>(tokens) / tiers[i]) * times[i];
      if (best == tiers.size() || cost < best_cost) {
        best = i;
        best_cost = cost;
      }
    }
    if (pick_tier_index(tiers, times, tokens) != best) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in " +
                               std::to_string(kTrials) + " pairs"};
}

Outcome a4() {
  const MachineSpec machine = load_machine("cli3");
  const ProfileDb db = synth_profile(machine);
  SweepConfig c;
  for (const auto& name : kModels) c.models.push_back(load_model(name));
  c.machine = machine;
  c.db = &db;
  c.budgets_mb = kBudgetsMb;
  c.contexts = {1024, 4096, 16384, 65536};
  const std::vector<SweepRow> rows = run_sweep(c);
  // Budget series per (model, context).
  std::map<std::string, std::vector<const SweepRow*>> by_model;
  for (const auto& r : rows) {
    by_model[r.model + " @" + std::to_string(r.context)].push_back(&r);
  }
  size_t violations = 0;
  std::string first;
  for (auto& [model, rs] : by_model) {
    std::sort(rs.begin(), rs.end(), [](const SweepRow* a, const SweepRow* b) {
      return a->budget_mb < b->budget_mb;
    });
    for (size_t i = 1; i < rs.size(); ++i) {
      const SweepRow& lo = *rs[i - 1];
      const SweepRow& hi = *rs[i];
      const bool bad = lo.feasible && (!hi.feasible || hi.tps < lo.tps * 0.99);
      if (bad) {
        ++violations;
        if (first.empty()) {
          first = "; first: " + model + " " + std::to_string(lo.budget_mb) + "->" +
                  std::to_string(hi.budget_mb) + " MB";
        }
      }
    }
  }
  return {violations == 0,
          std::to_string(by_model.size()) + " model/context series x " +
              std::to_string(kBudgetsMb.size()) + " budgets, " +
              std::to_string(violations) + " TPS drops beyond 1%" + first};
}

Outcome a5() {
  const auto spec = load_model("nemo8b");
  const MachineSpec machine = load_machine("cli3");
  const ProfileDb db = synth_profile(machine);
  const auto shards = build_shards(spec, 4096);
  auto plans_for = [&](const MachineSpec& m, uint64_t budget, uint64_t tier,
                       uint32_t threads) {
    const PassShape shape = planning_shape(tier, 4096);
    const BudgetSplit split = decide_scratch_budget(budget, shards, shape);
    const PinResult pins = pin_shards(split.pinned, shards);
    return std::make_pair(shape, heuristic_split(shards, pins,
                                                 PlanContext{&db, &m, threads, shape, split}));
  };
  Outcome o;
  size_t exact = 0;
  for (uint64_t budget : {16000000000ULL, 24000000000ULL, 32000000000ULL}) {
    for (uint64_t tier : {1ULL, 64ULL, 2048ULL}) {
      for (uint32_t threads : {1u, 16u}) {
        const auto [shape, plans] = plans_for(machine, budget, tier, threads);
        for (const SchedulePlan& p : plans) {
          if (!p.feasible || p.pcie_h2d_bytes != 0) continue;
          bool streams = false;
          for (const auto& pl : p.placements) {
            streams = streams || pl.streaming != Streaming::kNone;
          }
          if (streams) continue;
          double sum = 0;
          for (size_t i = 0; i < shards.size(); ++i) {
            sum += shard_compute_time(shards[i], shape, machine,
                                      p.placements[i].exec, threads, false);
          }
          bool any_cpu = false;
          for (const auto& pl : p.placements) {
            any_cpu = any_cpu || pl.exec == Backend::kCpu;
          }
          // CPU shards still exchange activations with the GPU over PCIe.
          if (any_cpu) continue;
          const ScheduleResult r = simulate_schedule(p, shards, machine, shape, threads);
          if (r.latency != sum) o.ok = false;
          ++exact;
        }
      }
    }
  }
  if (exact == 0) o.ok = false;
  MachineSpec fast = machine;
  fast.gpu_flops *= 1e6;
  fast.gpu_mem_bw *= 1e6;
  fast.gpu_launch_overhead = 0;
  const auto [shape, plans] = plans_for(fast, 4000000000ULL, 1, 16);
  const SchedulePlan& gpu_only = plans[0];
  double ratio = 0;
  if (!gpu_only.feasible) {
    o.ok = false;
  } else {
    const ScheduleResult r = simulate_schedule(gpu_only, shards, fast, shape, 16);
    const double bound = std::max(r.h2d_bytes / fast.pcie_h2d_bw,
                                  r.d2h_bytes / fast.pcie_d2h_bw);
    ratio = r.latency / bound;
    if (std::abs(ratio - 1.0) > 1e-3) o.ok = false;
  }
  o.detail = std::to_string(exact) + " non-streaming plans bit-exact; transfer-bound " +
             "makespan / (bytes / rate) = " + fmt("%.6f", ratio);
  return o;
}

Outcome a6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  size_t flips = 0;
  constexpr int kTrials = 10000;
  for (int i = 0; i < kTrials; ++i) {
    ProfileEntry e;
    e.flops_per_sec = std::pow(10.0, 10 + 4 * u(rng));
    e.bytes_per_sec = std::pow(10.0, 9 + 3 * u(rng));
    const double ridge = e.flops_per_sec / e.bytes_per_sec;
    const double bytes = std::pow(10.0, 4 + 6 * u(rng));
    const double lo = roofline_time((ridge - 1e-9) * bytes, bytes, e);
    const double hi = roofline_time((ridge + 1e-9) * bytes, bytes, e);
    worst = std::max(worst, std::abs(hi - lo) / lo);
    const bool flip =
        roofline_bound((ridge - 1e-9) * bytes, bytes, e) == RooflineBound::kMemory &&
        roofline_bound((ridge + 1e-9) * bytes, bytes, e) == RooflineBound::kCompute;
    if (flip) ++flips;
  }
  return {worst < 1e-6 && flips == kTrials,
          "max relative step " + fmt("%.3g", worst) + ", bound flips at the ridge in " +
              std::to_string(flips) + "/" + std::to_string(kTrials) + " entries"};
}

Outcome a7() {
  std::mt19937_64 rng(7);
  size_t failures = 0;
  constexpr int kTrials = 1000;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto spec = testing::random_spec(rng);
    const auto shards = build_shards(spec, rng() % 8192);
    uint64_t total = 0;
    for (const auto& s : shards) total += s.weight_bytes();
    const uint64_t budget = total ? rng() % (total + total / 4) : 0;
    const PinResult r = pin_shards(budget, shards);
    bool ok = r.pinned_bytes <= budget &&
              r.pinned == testing::replay_pins(shards, budget) &&
              pin_shards(total + rng() % 1000, shards).remaining.empty() &&
              pin_shards(0, shards).pinned.empty();
    if (!ok) ++failures;
  }
  return {failures == 0, std::to_string(failures) + " violations in " +
                             std::to_string(kTrials) + " random shard lists"};
}

Outcome a8() {
  const VisionSpec v = load_vision_spec(data_path("vision/cr1.vision"));
  constexpr uint64_t kBudget = 2000 * kMb;
  Outcome o;
  const uint64_t n = vision_token_count(v, 2560, 1440);
  uint64_t q = 0;
  try {
    q = choose_chunk(v, n, kBudget);
  } catch (const std::exception& e) {
    return {false, std::string("choose_chunk failed: ") + e.what()};
  }
  const uint64_t flash = flash_attn_peak_bytes(v, n, q);
  const uint64_t naive = naive_attn_peak_bytes(v, n);
  o.ok = flash <= kBudget && naive > kBudget;
  std::mt19937_64 rng(8);
  size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const uint64_t a = rng() >> 4;
    const uint64_t b = rng() >> 4;
    if (peak_vram(a, b, true) != std::max(a, b) || peak_vram(a, b, false) != a + b) {
      ++bad;
    }
  }
  o.ok = o.ok && bad == 0;
  o.detail = std::to_string(n) + " tokens at 2560x1440, chunk " + std::to_string(q) +
             ", flash " + fmt("%.3f", flash / 1e9) + " GB, naive " +
             fmt("%.3f", naive / 1e9) + " GB; " + std::to_string(bad) +
             " peak mismatches in 1000 pairs";
  return o;
}

// The CLI's default sweep.
SweepConfig default_sweep(const ProfileDb& db, const MachineSpec& machine) {
  SweepConfig c;
  for (const auto& name : kModels) c.models.push_back(load_model(name));
  c.machine = machine;
  c.db = &db;
  c.budgets_mb = kBudgetsMb;
  c.contexts = {1024, 4096, 16384, 65536};
  return c;
}

Outcome a9() {
  const MachineSpec machine = load_machine("cli3");
  const ProfileDb db = synth_profile(machine);
  const std::vector<SweepRow> rows = run_sweep(default_sweep(db, machine));
  size_t feasible = 0, bad = 0;
  for (const auto& r : rows) {
    if (!r.feasible) continue;
    ++feasible;
    const double expect = r.ttft + 100.0 / r.tps;
    if (!(std::abs(r.e2el - expect) <= 1e-9 * std::abs(expect))) ++bad;
  }
  return {bad == 0 && feasible > 0,
          std::to_string(feasible) + " feasible rows of " + std::to_string(rows.size()) +
              ", " + std::to_string(bad) + " identity violations"};
}

Outcome a10() {
  const MachineSpec machine = load_machine("cli3");
  const ProfileDb db1 = synth_profile(machine);
  const ProfileDb db2 = synth_profile(machine);
  const std::string p1 = serialize_profile(db1);
  Outcome o;
  std::string failed;
  if (p1 != serialize_profile(db2)) failed += " profile";
  if (p1 != serialize_profile(parse_profile(p1))) failed += " profile-reparse";

  const auto spec = load_model("nemo8b");
  const std::string t1 =
      serialize_tier_table(build_tier_table(spec, machine, db1, 8000 * kMb, 4096, 16));
  const std::string t2 =
      serialize_tier_table(build_tier_table(spec, machine, db2, 8000 * kMb, 4096, 16));
  if (t1 != t2) failed += " tier-table";
  if (t1 != serialize_tier_table(parse_tier_table(t1))) failed += " tier-table-reparse";

  SweepConfig c;
  c.models = {load_model("nemo4b"), load_model("qwen30b")};
  c.machine = machine;
  c.db = &db1;
  c.budgets_mb = {4000, 16000};
  c.contexts = {1024, 4096};
  const std::string s1 = sweep_csv(run_sweep(c));
  c.db = &db2;
  c.workers = 4;
  const std::string s2 = sweep_csv(run_sweep(c));
  if (s1 != s2) failed += " sweep";
  o.ok = failed.empty();
  o.detail = o.ok ? "profile, tier table and sweep regenerate byte-identically"
                  : "differs:" + failed;
  return o;
}

struct Criterion {
  const char* id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace pshard

int main() {
  using pshard::Criterion;
  const std::vector<Criterion> criteria = {
      {"A1", "oracle agreement", 60, pshard::a1},
      {"A2", "strategy diversity", 60, pshard::a2},
      {"A3", "tier selection", 1, pshard::a3},
      {"A4", "budget monotonicity", 30, pshard::a4},
      {"A5", "pipeline conservation", 1, pshard::a5},
      {"A6", "roofline continuity", 1, pshard::a6},
      {"A7", "pinning safety", 5, pshard::a7},
      {"A8", "VLM memory", 1, pshard::a8},
      {"A9", "E2EL identity", 60, pshard::a9},
      {"A10", "round-trip determinism", 10, pshard::a10},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    pshard::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.ok && in_time;
    if (!pass) ++failed;
    std::printf("%s %-4s %-23s %7.3f s (limit %g s)  %s%s\n", pass ? "PASS" : "FAIL",
                c.id, c.name, secs, c.limit_s, o.detail.c_str(),
                in_time ? "" : " [over time limit]");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
