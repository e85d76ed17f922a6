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
#include <set>
#include <string>
#include <vector>

#include "hetcc/graph.hpp"

namespace hetcc {

struct MemoryLevel {
  std::string name;
  int64_t size = 0;                 // bytes
  std::array<bool, kNumOperands> serves{};  // indexed by Operand
  int64_t bandwidth = 1;            // bytes per cycle towards the level below
  int64_t chunk_overhead = 0;       // cycles per contiguous chunk
  bool shared = true;               // operands compete for `size`

  bool serves_operand(Operand o) const { return serves[idx(o)]; }
};

enum class AdaptPolicy { pad_only, pad_or_reduce };

struct SpatialMapping {
  DimArray unroll = ones();
  AdaptPolicy policy = AdaptPolicy::pad_only;
};

/// What the anchor of a pattern computes; drives workload extraction,
/// constraints and spatial overrides.
enum class KernelKind { conv, depthwise, dense, add };
std::string_view kernel_kind_name(KernelKind k);
std::optional<KernelKind> parse_kernel_kind(std::string_view s);

/// One clause of a pattern constraint: `<var> <op> <values>`.
struct Constraint {
  enum class Op { eq, ne, le, ge, lt, gt, in };
  std::string var;
  Op op = Op::eq;
  std::vector<std::string> values;
  std::string text;  // as written
};
Constraint parse_constraint(std::string_view text);

struct PatternStep {
  OpKind op;
  bool optional = false;
};

struct PatternSpec {
  std::string name;
  std::vector<PatternStep> steps;  // steps[0] is the anchor and never optional
  std::vector<Constraint> constraints;
};

enum class Composition { sync_sum, async_max };
enum class CostModelId { diana, gap9_cluster, ne16 };
std::string_view cost_model_name(CostModelId id);

struct CostConstants {
  CostModelId model = CostModelId::diana;
  Composition composition = Composition::sync_sum;
  std::map<std::string, int64_t> values;
  int64_t get(const std::string& key) const;
};

/// Generic API name -> target function name, per family.
struct ApiBindings {
  std::map<std::string, std::string> platform, memory, sync, compute;
  /// Target name bound to `generic`; throws ConfigError when unbound.
  const std::string& resolve(const std::string& generic) const;
};

struct ModuleTransforms {
  std::set<Dim> paddable;  // dimensions the module may zero-pad
  std::string weight_layout;  // empty: plain OIHW/OHWI
};

struct ExecModule {
  std::string name;
  std::vector<PatternSpec> patterns;
  std::vector<MemoryLevel> levels;  // innermost first; last one is the top
  SpatialMapping spatial;
  std::map<KernelKind, DimArray> spatial_overrides;
  CostConstants cost;
  ModuleTransforms transforms;
  ApiBindings api;

  const DimArray& unroll_for(KernelKind k) const;
  /// Indices of the levels serving `o`, innermost first.
  std::vector<int> chain(Operand o) const;
  int64_t top_size() const { return levels.back().size; }
};

struct TargetModel {
  std::string name;
  Layout activation_layout = Layout::nchw();
  std::vector<ExecModule> modules;

  const ExecModule* find(std::string_view module) const;
  int module_index(std::string_view module) const;
  int64_t l2_size() const;
};

/// Built-in "diana" / "gap9", or a path to a JSON target description.
TargetModel load_target(const std::string& source);
TargetModel builtin_target(const std::string& name);
TargetModel parse_target(const json& doc);
json target_to_json(const TargetModel& t);
void validate_target(const TargetModel& t);

/// Every generic API name a layer for this module may emit.
std::vector<std::string> required_apis();

/// Caps every non-top level at `bytes`.
TargetModel with_l1_size(const TargetModel& t, int64_t bytes);

}  // namespace hetcc
