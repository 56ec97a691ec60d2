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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kernels.h"

namespace pshard {

enum class Backend { kCpu, kGpu };
enum class Contention { kStandalone, kUnderPcieTraffic };

std::string_view to_string(Backend b);
std::string_view to_string(Contention c);
Backend parse_backend(std::string_view text);
Contention parse_contention(std::string_view text);

// Parametric client machine. All rates are per second; byte quantities are
// decimal bytes.
struct MachineSpec {
  std::string name;
  uint64_t vram_capacity = 0;
  double gpu_flops = 0.0;
  double gpu_mem_bw = 0.0;
  // Per-kernel time floor on the GPU. Ten concurrently launched small
  // kernels share it, so a single kernel is charged a tenth of it.
  double gpu_launch_overhead = 5e-6;
  double cpu_thread_flops = 0.0;
  // Memory bandwidth one thread can pull on its own.
  double cpu_thread_bw = 0.0;
  // Efficiency factor per thread count: entry t-1 applies to t threads.
  std::vector<double> cpu_scaling;
  double sysram_bw = 0.0;
  double pcie_h2d_bw = 0.0;
  double pcie_d2h_bw = 0.0;
  // Fraction of standalone bandwidth left to CPU kernels (and to PCIe) while
  // the two overlap on the memory controller.
  double contention_alpha = 0.5;
  uint32_t threads_available = 0;

  void validate() const;

  double cpu_flops(uint32_t threads) const;
  double cpu_bytes_per_sec(uint32_t threads, Contention c) const;
};

MachineSpec parse_machine_spec(std::string_view text);
MachineSpec load_machine_spec(const std::string& path);
std::string serialize_machine_spec(const MachineSpec& m);

// Ground-truth time of one kernel on the modeled machine: the roofline max of
// compute and memory time (plus the small-kernel floor on the GPU). Used by
// the synthetic profiler and the simulator; the planner never calls it.
double machine_kernel_time(const MachineSpec& m, Backend backend,
                           uint32_t threads, Contention contention,
                           const KernelWork& work);

}  // namespace pshard
