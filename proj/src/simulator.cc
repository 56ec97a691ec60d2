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

#include "simulator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace pshard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Work left below this many seconds counts as finished; guards against
// round-off when two events land on the same instant.
constexpr double kDoneEps = 1e-15;
// Chunked prefill with more passes than this is simulated on evenly spaced
// pass groups, each charged at the cache size of its last pass.
constexpr uint64_t kMaxSimulatedPasses = 64;

int kind_rank(PlanKind k) {
  switch (k) {
    case PlanKind::kStatic: return 0;
    case PlanKind::kDynamic: return 1;
    case PlanKind::kGpuOnly: return 2;
  }
  return 3;
}

// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Results are
// written by index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(size_t n, uint32_t workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  const uint32_t count = std::min<uint32_t>(workers, static_cast<uint32_t>(n));
  for (uint32_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::string_view to_string(Resource r) {
  switch (r) {
    case Resource::kCpu: return "Cpu";
    case Resource::kGpu: return "Gpu";
    case Resource::kPcieH2D: return "PcieH2D";
    case Resource::kPcieD2H: return "PcieD2H";
  }
  return "?";
}

double shard_compute_time(const SubLayerShard& shard, const PassShape& shape,
                          const MachineSpec& machine, Backend backend,
                          uint32_t threads, bool contended) {
  const Contention c =
      contended ? Contention::kUnderPcieTraffic : Contention::kStandalone;
  double t = 0.0;
  for (const ShardKernel& k : shard.kernels(shape)) {
    t += machine_kernel_time(machine, backend, backend == Backend::kGpu ? 0 : threads,
                             backend == Backend::kGpu ? Contention::kStandalone : c,
                             k.work);
  }
  return t;
}

ScheduleResult run_pipeline(std::span<const PipelineStep> steps,
                            double contention_alpha) {
  const size_t n = steps.size();
  std::vector<size_t> streamed;
  for (size_t i = 0; i < n; ++i) {
    if (steps[i].streamed) streamed.push_back(i);
  }
  const size_t m = streamed.size();
  std::vector<bool> compute_done(n, false);
  std::vector<bool> copy_done(m, false);
  std::vector<size_t> copy_of(n, 0);
  for (size_t j = 0; j < m; ++j) copy_of[streamed[j]] = j;

  enum class Phase { kIdle, kHandOff, kCompute };
  Phase phase = Phase::kIdle;
  size_t ci = 0;  // shard on the compute stream
  double compute_left = 0.0;

  size_t next_copy = 0;
  bool copy_active = false;
  double copy_left = 0.0;

  std::deque<double> writebacks;
  bool wb_active = false;
  double wb_left = 0.0;

  ScheduleResult r;
  double now = 0.0;
  for (;;) {
    // Start whatever became eligible; zero-length work completes on the spot.
    for (bool progressed = true; progressed;) {
      progressed = false;
      if (phase == Phase::kIdle && ci < n) {
        const PipelineStep& s = steps[ci];
        if (!s.streamed || copy_done[copy_of[ci]]) {
          if (s.act_seconds > 0) {
            phase = Phase::kHandOff;
            compute_left = s.act_seconds;
          } else {
            phase = Phase::kCompute;
            compute_left = s.compute;
          }
          progressed = true;
        }
      }
      if (phase == Phase::kCompute && compute_left <= 0.0) {
        compute_done[ci] = true;
        if (steps[ci].d2h_seconds > 0) writebacks.push_back(steps[ci].d2h_seconds);
        phase = Phase::kIdle;
        ++ci;
        progressed = true;
      }
      if (!copy_active && next_copy < m) {
        const bool prev_done = next_copy == 0 || copy_done[next_copy - 1];
        const bool slot_free =
            next_copy < 2 || compute_done[streamed[next_copy - 2]];
        if (prev_done && slot_free) {
          copy_active = true;
          copy_left = steps[streamed[next_copy]].h2d_seconds;
          progressed = true;
        }
      }
      if (copy_active && copy_left <= 0.0) {
        copy_done[next_copy++] = true;
        copy_active = false;
        progressed = true;
      }
      if (!wb_active && !writebacks.empty()) {
        wb_active = true;
        wb_left = writebacks.front();
        writebacks.pop_front();
        progressed = true;
      }
      if (wb_active && wb_left <= 0.0) {
        wb_active = false;
        progressed = true;
      }
    }
    if (phase == Phase::kIdle && !copy_active && !wb_active) {
      if (ci < n || next_copy < m || !writebacks.empty()) {
        fail(ErrorCode::kInfeasibleSchedule, "pipeline deadlock");
      }
      break;
    }

    const PipelineStep* cur = ci < n ? &steps[ci] : nullptr;
    const bool handoff_h2d = phase == Phase::kHandOff && cur->act_h2d;
    const bool handoff_d2h = phase == Phase::kHandOff && !cur->act_h2d;
    const bool copy_moving = copy_active && !handoff_h2d;
    const bool wb_moving = wb_active && !handoff_d2h;
    const bool cpu_busy = phase == Phase::kCompute && cur->exec == Backend::kCpu;
    const bool link_busy = copy_moving || wb_moving;

    double compute_rate = 1.0;
    if (cpu_busy && link_busy && cur->compute_contended > 0) {
      compute_rate = cur->compute / cur->compute_contended;
    }
    const double link_rate = cpu_busy ? contention_alpha : 1.0;

    double dt = kInf;
    if (phase != Phase::kIdle) dt = std::min(dt, compute_left / compute_rate);
    if (copy_moving) dt = std::min(dt, copy_left / link_rate);
    if (wb_moving) dt = std::min(dt, wb_left / link_rate);

    now += dt;
    if (phase == Phase::kCompute) {
      r.busy[static_cast<size_t>(cur->exec == Backend::kCpu ? Resource::kCpu
                                                            : Resource::kGpu)] += dt;
    }
    if (copy_moving || handoff_h2d) r.busy[static_cast<size_t>(Resource::kPcieH2D)] += dt;
    if (wb_moving || handoff_d2h) r.busy[static_cast<size_t>(Resource::kPcieD2H)] += dt;

    auto advance = [&](double& left, double rate) {
      if (left / rate == dt) {
        left = 0.0;
      } else {
        left -= dt * rate;
        if (left < kDoneEps) left = 0.0;
      }
    };
    if (phase != Phase::kIdle) {
      advance(compute_left, compute_rate);
      if (phase == Phase::kHandOff && compute_left <= 0.0) {
        phase = Phase::kCompute;
        compute_left = cur->compute;
      }
    }
    if (copy_moving) advance(copy_left, link_rate);
    if (wb_moving) advance(wb_left, link_rate);
  }
  r.latency = now;
  return r;
}

ScheduleResult simulate_schedule(const SchedulePlan& plan,
                                 std::span<const SubLayerShard> shards,
                                 const MachineSpec& machine,
                                 const PassShape& shape, uint32_t threads) {
  const std::vector<ShardTransfers> tr = plan_transfers(plan, shards, shape);
  uint64_t largest_streamed = 0;
  for (size_t i = 0; i < shards.size(); ++i) {
    validate_placement(plan.placements[i]);
    if (streams_h2d(plan.placements[i].streaming)) {
      largest_streamed = std::max(largest_streamed, tr[i].h2d_stream);
    }
    if (plan.placements[i].exec == Backend::kCpu && threads == 0) {
      fail(ErrorCode::kInvalidArgument, "plan places shards on a CPU with no threads");
    }
  }
  if (largest_streamed > 0 && plan.scratch_bytes_required < 2 * largest_streamed) {
    fail(ErrorCode::kInfeasibleSchedule,
         "scratch of " + std::to_string(plan.scratch_bytes_required) +
             " bytes cannot double-buffer a " + std::to_string(largest_streamed) +
             "-byte shard");
  }
  if (plan.pinned_bytes + plan.scratch_bytes_required > machine.vram_capacity) {
    fail(ErrorCode::kInfeasibleSchedule, "plan exceeds the VRAM capacity of " +
                                             machine.name);
  }

  std::vector<PipelineStep> steps(shards.size());
  ScheduleResult bytes;
  for (size_t i = 0; i < shards.size(); ++i) {
    const Placement& p = plan.placements[i];
    PipelineStep& s = steps[i];
    s.exec = p.exec;
    s.compute = shard_compute_time(shards[i], shape, machine, p.exec, threads, false);
    s.compute_contended =
        p.exec == Backend::kCpu
            ? shard_compute_time(shards[i], shape, machine, p.exec, threads, true)
            : s.compute;
    s.streamed = streams_h2d(p.streaming);
    s.h2d_seconds = tr[i].h2d_stream / machine.pcie_h2d_bw;
    s.d2h_seconds = tr[i].d2h_writeback / machine.pcie_d2h_bw;
    s.act_h2d = tr[i].act_in_h2d;
    s.act_seconds =
        tr[i].act_in / (s.act_h2d ? machine.pcie_h2d_bw : machine.pcie_d2h_bw);
    bytes.h2d_bytes += tr[i].h2d_stream + (tr[i].act_in_h2d ? tr[i].act_in : 0);
    bytes.d2h_bytes += tr[i].d2h_writeback + (tr[i].act_in_h2d ? 0 : tr[i].act_in);
  }
  ScheduleResult r = run_pipeline(steps, machine.contention_alpha);
  r.h2d_bytes = bytes.h2d_bytes;
  r.d2h_bytes = bytes.d2h_bytes;
  return r;
}

SimResult simulate_inference(std::span<const Request> batch,
                             const TierTable& table,
                             std::span<const SubLayerShard> shards,
                             const MachineSpec& machine) {
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "empty request batch");
  for (const Request& r : batch) {
    if (r.prompt_len == 0 || r.gen_len == 0) {
      fail(ErrorCode::kInvalidArgument, "requests need prompt_len, gen_len >= 1");
    }
  }
  std::vector<uint64_t> prompt_left(batch.size());
  std::vector<uint64_t> gen_left(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    prompt_left[i] = batch[i].prompt_len;
    gen_left[i] = batch[i].gen_len;
  }

  std::map<std::pair<uint64_t, uint64_t>, ScheduleResult> memo;
  auto run_pass = [&](const TierEntry& e, uint64_t kv) -> const ScheduleResult& {
    const auto key = std::make_pair(e.tier, kv);
    auto it = memo.find(key);
    if (it == memo.end()) {
      it = memo.emplace(key, simulate_schedule(e.plan, shards, machine,
                                               planning_shape(e.tier, kv),
                                               table.threads))
               .first;
    }
    return it->second;
  };

  SimResult res;
  double now = 0.0;
  bool ttft_set = false;
  uint64_t kv = 0;
  for (;;) {
    uint64_t demand = 0;
    bool any_context = false;
    for (size_t i = 0; i < batch.size(); ++i) {
      if (prompt_left[i] > 0) {
        demand += prompt_left[i];
        any_context = true;
      } else if (gen_left[i] > 0) {
        demand += 1;
      }
    }
    if (demand == 0) break;
    const uint64_t tier = pick_tier(table, demand);
    const TierEntry& entry = tier_entry(table, tier);
    const uint64_t passes = (demand + tier - 1) / tier;

    IterationRecord rec;
    rec.tier = tier;
    rec.kind = entry.plan.kind;
    rec.new_tokens = demand;
    rec.passes = passes;
    // Prompt tokens of the first request occupy the front of the pass stream.
    const uint64_t first_prompt_passes =
        prompt_left[0] > 0 ? (prompt_left[0] + tier - 1) / tier : 0;
    const uint64_t groups = std::min(passes, kMaxSimulatedPasses);
    uint64_t done_passes = 0;
    for (uint64_t g = 0; g < groups; ++g) {
      const uint64_t end_pass = passes * (g + 1) / groups;
      const uint64_t count = end_pass - done_passes;
      const uint64_t processed = std::min(demand, end_pass * tier);
      const uint64_t kv_at = std::min(kv + processed, table.context_len);
      const ScheduleResult& pr = run_pass(entry, kv_at);
      const double t = pr.latency * static_cast<double>(count);
      if (!ttft_set && first_prompt_passes > 0 && end_pass >= first_prompt_passes) {
        // Locate the first request's final prompt pass inside the group.
        const uint64_t into = first_prompt_passes - done_passes;
        res.ttft = now + pr.latency * static_cast<double>(into);
        ttft_set = true;
      }
      now += t;
      rec.latency += t;
      for (size_t k = 0; k < kNumResources; ++k) {
        rec.busy[k] += pr.busy[k] * static_cast<double>(count);
      }
      done_passes = end_pass;
    }
    kv = std::min(kv + demand, table.context_len);

    uint64_t decoded = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
      if (prompt_left[i] > 0) {
        prompt_left[i] = 0;
      } else if (gen_left[i] > 0) {
        --gen_left[i];
        ++decoded;
      }
    }
    if (!any_context) {
      res.decode_tokens += decoded;
      res.decode_time += rec.latency;
    }
    res.iterations.push_back(rec);
  }
  res.tps = res.decode_time > 0 ? static_cast<double>(res.decode_tokens) / res.decode_time
                                : 0.0;
  res.e2el = e2el_from(res.ttft, res.tps);
  return res;
}

OracleResult oracle_best_plan(std::span<const SubLayerShard> shards,
                              const MachineSpec& machine, const ProfileDb& db,
                              uint64_t budget_bytes, uint64_t tier,
                              uint64_t context_len, uint32_t threads) {
  if (budget_bytes > machine.vram_capacity) {
    fail(ErrorCode::kInfeasibleBudget,
         "budget exceeds VRAM capacity of " + machine.name);
  }
  const PassShape shape = planning_shape(tier, context_len);
  const BudgetSplit split = decide_scratch_budget(budget_bytes, shards, shape);
  const PinResult pins = pin_shards(split.pinned, shards);
  const PlanContext ctx{&db, &machine, threads, shape, split};
  OracleResult out;
  out.plans = heuristic_split(shards, pins, ctx);
  const SchedulePlan* chosen = select_best_plan(out.plans);
  if (chosen == nullptr) {
    fail(ErrorCode::kInfeasibleBudget, "no feasible plan for tier " +
                                           std::to_string(tier));
  }
  out.planner_choice = chosen->kind;
  int best = -1;
  for (int i = 0; i < 3; ++i) {
    const SchedulePlan& p = out.plans[i];
    out.feasible[i] = p.feasible;
    if (!p.feasible) continue;
    out.simulated[i] = simulate_schedule(p, shards, machine, shape, threads).latency;
    if (best < 0) {
      best = i;
      continue;
    }
    const SchedulePlan& b = out.plans[best];
    const double ti = out.simulated[i];
    const double tb = out.simulated[best];
    if (ti < tb ||
        (ti == tb && (p.pcie_total_bytes() < b.pcie_total_bytes() ||
                      (p.pcie_total_bytes() == b.pcie_total_bytes() &&
                       kind_rank(p.kind) < kind_rank(b.kind))))) {
      best = i;
    }
  }
  out.best = out.plans[best].kind;
  return out;
}

std::string plan_digest(const TierTable& table) {
  std::string d;
  for (const TierEntry& e : table.tiers) {
    if (!e.feasible) {
      d += '-';
      continue;
    }
    switch (e.plan.kind) {
      case PlanKind::kGpuOnly: d += 'G'; break;
      case PlanKind::kStatic: d += 'S'; break;
      case PlanKind::kDynamic: d += 'D'; break;
    }
  }
  return d;
}

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
  if (config.models.empty() || config.budgets_mb.empty() ||
      config.contexts.empty() || config.batches.empty()) {
    fail(ErrorCode::kInvalidArgument, "sweep axes must be non-empty");
  }
  if (config.db == nullptr) fail(ErrorCode::kInvalidArgument, "sweep needs a profile");
  const uint32_t threads =
      config.threads ? config.threads : config.machine.threads_available;

  std::vector<SweepRow> rows;
  for (const auto& model : config.models) {
    for (uint64_t budget : config.budgets_mb) {
      for (uint64_t ctx : config.contexts) {
        for (uint64_t b : config.batches) {
          SweepRow r;
          r.model = model->name;
          r.budget_mb = budget;
          r.context = ctx;
          r.batch = b;
          rows.push_back(std::move(r));
        }
      }
    }
  }
  const size_t per_model =
      config.budgets_mb.size() * config.contexts.size() * config.batches.size();

  parallel_for(rows.size(), config.workers, [&](size_t i) {
    SweepRow& r = rows[i];
    const auto& model = config.models[i / per_model];
    r.digest = std::string(kTokenTiers.size(), '-');
    try {
      const uint64_t table_ctx = r.batch * (r.context + config.gen_len);
      const TierTable table =
          build_tier_table(model, config.machine, *config.db,
                           r.budget_mb * 1000000, table_ctx, threads);
      r.digest = plan_digest(table);
      const std::vector<SubLayerShard> shards = build_shards(model, table_ctx);
      const std::vector<Request> batch(r.batch, Request{r.context, config.gen_len});
      const SimResult sim = simulate_inference(batch, table, shards, config.machine);
      r.ttft = sim.ttft;
      r.tps = sim.tps;
      r.e2el = sim.e2el;
      r.interactive = sim.tps / static_cast<double>(r.batch) >= kInteractiveTps;
      r.feasible = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
  });
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "# pshard-sweep v1\n";
  out += "model,budget_mb,context,batch,ttft_s,tps,e2el_s,interactive_flag,"
         "plan_per_tier\n";
  for (const SweepRow& r : rows) {
    out += r.model + "," + std::to_string(r.budget_mb) + "," +
           std::to_string(r.context) + "," + std::to_string(r.batch) + ",";
    if (r.feasible) {
      out += format_double(r.ttft) + "," + format_double(r.tps) + "," +
             format_double(r.e2el) + ",";
    } else {
      out += "NA,NA,NA,";
    }
    out += std::string(r.interactive ? "1" : "0") + "," + r.digest + "\n";
  }
  return out;
}

ValidateReport run_validate(const ValidateConfig& config) {
  if (config.db == nullptr) fail(ErrorCode::kInvalidArgument, "validate needs a profile");
  if (config.models.empty() || config.pcie_rates.empty() ||
      config.thread_counts.empty() || config.contexts.empty() ||
      config.budgets_mb.empty()) {
    fail(ErrorCode::kInvalidArgument, "validate axes must be non-empty");
  }
  ValidateReport report;
  std::vector<size_t> model_index;
  for (size_t m = 0; m < config.models.size(); ++m) {
    for (double rate : config.pcie_rates) {
      for (uint32_t t : config.thread_counts) {
        for (uint64_t ctx : config.contexts) {
          for (uint64_t b : config.budgets_mb) {
            ValidateCase c;
            c.model = config.models[m]->name;
            c.pcie_rate = rate;
            c.threads = t;
            c.context = ctx;
            c.budget_mb = b;
            report.cases.push_back(std::move(c));
            model_index.push_back(m);
          }
        }
      }
    }
  }
  if (config.sample > 0 && config.sample < report.cases.size()) {
    std::vector<size_t> idx(report.cases.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(config.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(config.sample);
    std::sort(idx.begin(), idx.end());
    std::vector<ValidateCase> kept;
    std::vector<size_t> kept_model;
    for (size_t i : idx) {
      kept.push_back(std::move(report.cases[i]));
      kept_model.push_back(model_index[i]);
    }
    report.cases = std::move(kept);
    model_index = std::move(kept_model);
  }

  parallel_for(report.cases.size(), config.workers, [&](size_t i) {
    ValidateCase& c = report.cases[i];
    MachineSpec machine = config.machine;
    machine.pcie_h2d_bw = c.pcie_rate;
    machine.pcie_d2h_bw = c.pcie_rate;
    try {
      const std::vector<SubLayerShard> shards =
          build_shards(config.models[model_index[i]], c.context);
      c.oracle = oracle_best_plan(shards, machine, *config.db, c.budget_mb * 1000000,
                                  config.tier, c.context, c.threads);
      c.feasible = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInfeasibleBudget) throw;
      c.error = e.what();
    }
  });

  for (const ValidateCase& c : report.cases) {
    if (!c.feasible) continue;
    ++report.feasible;
    if (c.oracle.best == c.oracle.planner_choice) ++report.agree;
    ++report.oracle_wins[static_cast<size_t>(c.oracle.best)];
    ++report.planner_wins[static_cast<size_t>(c.oracle.planner_choice)];
  }
  return report;
}

std::string format_validate_report(const ValidateReport& report) {
  std::ostringstream out;
  out << "# model pcie_Bps threads context budget_mb planner oracle "
         "sim_gpuonly_s sim_static_s sim_dynamic_s\n";
  for (const ValidateCase& c : report.cases) {
    out << c.model << " " << format_double(c.pcie_rate) << " " << c.threads << " "
        << c.context << " " << c.budget_mb << " ";
    if (!c.feasible) {
      out << "infeasible\n";
      continue;
    }
    out << to_string(c.oracle.planner_choice) << " " << to_string(c.oracle.best);
    for (int k = 0; k < 3; ++k) {
      out << " " << (c.oracle.feasible[k] ? format_double(c.oracle.simulated[k]) : "NA");
    }
    out << (c.oracle.best == c.oracle.planner_choice ? "" : " MISMATCH") << "\n";
  }
  out << "configurations " << report.cases.size() << " feasible " << report.feasible
      << " agree " << report.agree << " agreement "
      << format_double(report.agreement()) << "\n";
  out << "oracle_wins GpuOnly " << report.oracle_wins[0] << " Static "
      << report.oracle_wins[1] << " Dynamic " << report.oracle_wins[2] << "\n";
  out << "planner_wins GpuOnly " << report.planner_wins[0] << " Static "
      << report.planner_wins[1] << " Dynamic " << report.planner_wins[2] << "\n";
  return out.str();
}

std::array<const ValidateCase*, 3> pick_witnesses(const ValidateReport& report) {
  std::array<const ValidateCase*, 3> out{};
  std::array<double, 3> margin{};
  for (const ValidateCase& c : report.cases) {
    if (!c.feasible) continue;
    const size_t w = static_cast<size_t>(c.oracle.best);
    double runner_up = kInf;
    for (size_t k = 0; k < 3; ++k) {
      if (k != w && c.oracle.feasible[k]) {
        runner_up = std::min(runner_up, c.oracle.simulated[k]);
      }
    }
    const double m = runner_up == kInf ? 0.0 : runner_up / c.oracle.simulated[w] - 1.0;
    if (out[w] == nullptr || m > margin[w]) {
      out[w] = &c;
      margin[w] = m;
    }
  }
  return out;
}

std::string format_witness(const ValidateCase& c, const std::string& machine,
                           uint64_t tier) {
  std::ostringstream out;
  out << "pshard-witness v1\n";
  out << "# Oracle reasoning: all three candidate plans were simulated for this\n"
      << "# configuration; the winner has the lowest simulated pass latency.\n";
  for (size_t k = 0; k < 3; ++k) {
    const SchedulePlan& p = c.oracle.plans[k];
    out << "# " << to_string(p.kind) << ": ";
    if (!c.oracle.feasible[k]) {
      out << "infeasible (" << p.infeasible_reason << ")\n";
      continue;
    }
    size_t pinned = 0, streamed = 0, staged = 0, cpu = 0;
    for (const Placement& pl : p.placements) {
      if (pl.residency == Residency::kVramPinned) {
        ++pinned;
      } else if (pl.exec == Backend::kCpu) {
        ++cpu;
      } else if (streams_h2d(pl.streaming)) {
        ++streamed;
      } else {
        ++staged;
      }
    }
    out << pinned << " pinned, " << streamed << " streamed, " << staged
        << " staged in scratch, " << cpu << " on CPU; PCIe H2D "
        << p.pcie_h2d_bytes << " B, D2H " << p.pcie_d2h_bytes
        << " B; estimated " << format_double(p.estimated_time) << " s, simulated "
        << format_double(c.oracle.simulated[k]) << " s\n";
  }
  out << "model = " << c.model << "\n"
      << "machine = " << machine << "\n"
      << "pcie_rate = " << format_double(c.pcie_rate) << "\n"
      << "threads = " << c.threads << "\n"
      << "context = " << c.context << "\n"
      << "budget_mb = " << c.budget_mb << "\n"
      << "tier = " << tier << "\n"
      << "winner = " << to_string(c.oracle.best) << "\n";
  return out.str();
}

Witness parse_witness(std::string_view text) {
  KeyValueDoc doc = KeyValueDoc::parse(text, "pshard-witness v1");
  Witness w;
  w.model = doc.take_string("model");
  w.machine = doc.take_string("machine");
  w.pcie_rate = doc.take_double("pcie_rate");
  w.threads = static_cast<uint32_t>(doc.take_u64("threads"));
  w.context = doc.take_u64("context");
  w.budget_mb = doc.take_u64("budget_mb");
  w.tier = doc.take_u64("tier");
  w.winner = parse_plan_kind(doc.take_string("winner"));
  doc.expect_consumed();
  return w;
}

}  // namespace pshard
