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

#include "machine.h"

#include <algorithm>
#include <sstream>

namespace pshard {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kInvalidArgument, "invalid machine spec: " + what);
}

}  // namespace

std::string_view to_string(Backend b) {
  return b == Backend::kCpu ? "Cpu" : "Gpu";
}

std::string_view to_string(Contention c) {
  return c == Contention::kStandalone ? "Standalone" : "UnderPcieTraffic";
}

Backend parse_backend(std::string_view text) {
  if (text == "Cpu") return Backend::kCpu;
  if (text == "Gpu") return Backend::kGpu;
  fail(ErrorCode::kParse, "unknown backend '" + std::string(text) + "'");
}

Contention parse_contention(std::string_view text) {
  if (text == "Standalone") return Contention::kStandalone;
  if (text == "UnderPcieTraffic") return Contention::kUnderPcieTraffic;
  fail(ErrorCode::kParse, "unknown contention '" + std::string(text) + "'");
}

void MachineSpec::validate() const {
  require(!name.empty(), "name is empty");
  require(vram_capacity > 0, "vram_capacity must be > 0");
  require(gpu_flops > 0 && gpu_mem_bw > 0, "GPU rates must be > 0");
  require(gpu_launch_overhead >= 0, "gpu_launch_overhead must be >= 0");
  require(cpu_thread_flops > 0 && cpu_thread_bw > 0,
          "per-thread CPU rates must be > 0");
  require(sysram_bw > 0, "sysram_bw must be > 0");
  require(pcie_h2d_bw > 0 && pcie_d2h_bw > 0, "PCIe rates must be > 0");
  require(contention_alpha > 0 && contention_alpha <= 1,
          "contention_alpha must be in (0, 1]");
  require(cpu_scaling.size() >= threads_available,
          "cpu_scaling needs one factor per thread count");
  double prev_total = 0.0;
  double prev_marginal = 1e300;
  for (size_t i = 0; i < cpu_scaling.size(); ++i) {
    require(cpu_scaling[i] > 0, "cpu_scaling factors must be > 0");
    const double total = static_cast<double>(i + 1) * cpu_scaling[i];
    const double marginal = total - prev_total;
    require(marginal <= prev_marginal * (1 + 1e-12),
            "cpu_scaling must have non-increasing marginal efficiency");
    prev_total = total;
    prev_marginal = marginal;
  }
}

double MachineSpec::cpu_flops(uint32_t threads) const {
  if (threads == 0) return 0.0;
  const size_t idx = std::min<size_t>(threads, cpu_scaling.size()) - 1;
  return cpu_thread_flops * threads * cpu_scaling[idx];
}

double MachineSpec::cpu_bytes_per_sec(uint32_t threads, Contention c) const {
  if (threads == 0) return 0.0;
  const double standalone = std::min(sysram_bw, cpu_thread_bw * threads);
  return c == Contention::kStandalone ? standalone
                                      : standalone * contention_alpha;
}

MachineSpec parse_machine_spec(std::string_view text) {
  KeyValueDoc doc = KeyValueDoc::parse(text, "pshard-machine v1");
  MachineSpec m;
  m.name = doc.take_string("name");
  m.vram_capacity = doc.take_u64("vram_capacity");
  m.gpu_flops = doc.take_double("gpu_flops");
  m.gpu_mem_bw = doc.take_double("gpu_mem_bw");
  m.gpu_launch_overhead = doc.take_double_or("gpu_launch_overhead", 5e-6);
  m.cpu_thread_flops = doc.take_double("cpu_thread_flops");
  m.threads_available = static_cast<uint32_t>(doc.take_u64("threads_available"));
  m.cpu_thread_bw = doc.take_double_or("cpu_thread_bw", 0.0);
  m.sysram_bw = doc.take_double("sysram_bw");
  m.pcie_h2d_bw = doc.take_double("pcie_h2d_bw");
  m.pcie_d2h_bw = doc.take_double("pcie_d2h_bw");
  m.contention_alpha = doc.take_double_or("contention_alpha", 0.5);
  if (doc.has("cpu_scaling")) {
    m.cpu_scaling = doc.take_double_list("cpu_scaling");
  } else {
    m.cpu_scaling.assign(m.threads_available, 1.0);
  }
  if (m.cpu_thread_bw == 0.0 && m.threads_available > 0) {
    m.cpu_thread_bw = m.sysram_bw / m.threads_available;
  }
  doc.expect_consumed();
  m.validate();
  return m;
}

MachineSpec load_machine_spec(const std::string& path) {
  return parse_machine_spec(read_file(path));
}

std::string serialize_machine_spec(const MachineSpec& m) {
  std::ostringstream out;
  out << "pshard-machine v1\n"
      << "name = " << m.name << "\n"
      << "vram_capacity = " << m.vram_capacity << "\n"
      << "gpu_flops = " << format_double(m.gpu_flops) << "\n"
      << "gpu_mem_bw = " << format_double(m.gpu_mem_bw) << "\n"
      << "gpu_launch_overhead = " << format_double(m.gpu_launch_overhead) << "\n"
      << "cpu_thread_flops = " << format_double(m.cpu_thread_flops) << "\n"
      << "cpu_thread_bw = " << format_double(m.cpu_thread_bw) << "\n"
      << "threads_available = " << m.threads_available << "\n"
      << "sysram_bw = " << format_double(m.sysram_bw) << "\n"
      << "pcie_h2d_bw = " << format_double(m.pcie_h2d_bw) << "\n"
      << "pcie_d2h_bw = " << format_double(m.pcie_d2h_bw) << "\n"
      << "contention_alpha = " << format_double(m.contention_alpha) << "\n"
      << "cpu_scaling = ";
  for (size_t i = 0; i < m.cpu_scaling.size(); ++i) {
    out << (i ? ", " : "") << format_double(m.cpu_scaling[i]);
  }
  out << "\n";
  return out.str();
}

double machine_kernel_time(const MachineSpec& m, Backend backend,
                           uint32_t threads, Contention contention,
                           const KernelWork& work) {
  if (backend == Backend::kGpu) {
    return std::max({work.flops / m.gpu_flops, work.bytes() / m.gpu_mem_bw,
                     m.gpu_launch_overhead / 10.0});
  }
  if (threads == 0) {
    fail(ErrorCode::kInvalidArgument, "CPU kernel with zero threads");
  }
  return std::max(work.flops / m.cpu_flops(threads),
                  work.bytes() / m.cpu_bytes_per_sec(threads, contention));
}

}  // namespace pshard
