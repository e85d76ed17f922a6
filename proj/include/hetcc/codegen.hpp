/*
 * Copyright (c) hetcc contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <string>
#include <vector>

#include "hetcc/dispatch.hpp"

namespace hetcc {

// ---------------------------------------------------------------------------
// Layer template structure. Loops above the innermost operand cut are
// emitted as C loops (outermost first); the loops below it run inside one
// kernel call.

struct PlanNode {
  enum class Kind {
    loop,          // temporal loop at `pos`
    load,          // single-buffered copy of `operand` into L1
    prologue,      // double-buffered: first tile, guarded by t == 0
    prefetch,      // double-buffered: tile t+1 into the other buffer, guarded by t+1 < T
    wait,          // match_sync_transfers
    kernel,        // computational API call
    sync_compute,  // match_sync_compute
    store,         // write-back of the output tile
  };
  Kind kind = Kind::wait;
  int pos = -1;
  Operand operand = Operand::I;
  std::vector<PlanNode> body;
};

struct LayerPlan {
  Ordering temporal;
  std::array<int, kNumOperands> cut{};
  std::array<Buffering, kNumOperands> buffering{};
  int kernel_cut = 0;  // loops below run inside the kernel
  DimArray kernel_tile = ones();
  std::vector<PlanNode> body;
};

/// Throws ConfigError for operand chains deeper than L1 + one parent.
LayerPlan plan_layer(const Schedule& s, const Workload& w, const ExecModule& m);

struct PlanEvents {
  std::array<int64_t, kNumOperands> transfers{};
  int64_t kernel_calls = 0, waits = 0, compute_syncs = 0;
};

/// Executes the plan's loop structure and guards, counting events.
PlanEvents execute_plan(const LayerPlan& p);

// ---------------------------------------------------------------------------
// Static memory.

struct BufferSlot {
  std::string value;
  int64_t size = 0;
  int first = 0, last = 0;  // inclusive lifetime in decision steps
  int64_t offset = 0;
};

struct MemoryPlan {
  std::vector<BufferSlot> slots;  // placement order
  int64_t arena = 0;
  const BufferSlot* find(const std::string& value) const;
};

/// First-fit decreasing: larger buffers first, each at the lowest offset
/// free over its whole lifetime.
MemoryPlan plan_static_memory(std::vector<BufferSlot> requests, int64_t align = 1);

/// Graph inputs and every decision output; graph outputs live to the end.
MemoryPlan plan_static_memory(const PartitionedGraph& pg, int64_t align = 8);

/// True when no two simultaneously live slots overlap.
bool plan_is_sound(const MemoryPlan& p);

// ---------------------------------------------------------------------------
// C emission.

struct EmitOptions {
  bool test_backend = false;
  /// Specs (by name) in which main.c reads inputs and prints outputs when
  /// they differ from the compiled graph's layouts.
  std::map<std::string, TensorSpec> host_specs;
};

struct EmittedProgram {
  std::map<std::string, std::string> files;  // relative path -> text
  json report;
};

/// Symbol of the function emitted for decision `i`.
std::string layer_symbol(const PartitionedGraph& pg, size_t i);

/// Source of one assigned layer, with generic API names bound to the
/// module's target names.
std::string emit_layer(const PartitionedGraph& pg, size_t i, const TargetModel& t);

/// Naive host loops for one unmatched node.
std::string emit_fallback_layer(const PartitionedGraph& pg, size_t i);

std::string emit_api_header(const TargetModel& t);
std::string emit_test_backend(const TargetModel& t);

/// Every file of the program plus the report.
EmittedProgram emit_network(const PartitionedGraph& pg, const MemoryPlan& plan, const TargetModel& t,
                            const EmitOptions& opt = {});

json network_report(const PartitionedGraph& pg, const MemoryPlan& plan, const TargetModel& t);

}  // namespace hetcc
