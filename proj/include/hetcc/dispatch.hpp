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

#include <string>
#include <vector>

#include "hetcc/dse.hpp"
#include "hetcc/match.hpp"

namespace hetcc {

struct ModuleCost {
  std::string module;
  bool feasible = false;
  int64_t total = 0;
};

struct DispatchDecision {
  std::vector<std::string> node_ids;  // chain order, anchor first
  bool assigned = false;
  std::string module;
  int module_index = -1;
  std::string pattern;
  std::string anchor;
  Workload workload;
  Schedule schedule;
  CostBreakdown cost;
  SearchMode search_used = SearchMode::exhaustive;
  std::vector<ModuleCost> alternatives;  // every module whose constraints passed, target order
};

struct PartitionedGraph {
  Graph graph;
  std::vector<DispatchDecision> decisions;  // topological order
};

/// Costs every candidate on every module that matched it and keeps the
/// cheapest; overlaps are resolved in topological order, larger chains
/// first, and every node left over becomes a fallback decision.
PartitionedGraph dispatch(const Graph& g, const TargetModel& t, const SearchLimits& limits = {});

/// Orders decisions by the position of their anchor and checks that they
/// cover the graph exactly once; throws InternalError otherwise.
PartitionedGraph partition_graph(const Graph& g, std::vector<DispatchDecision> decisions);
void check_coverage(const PartitionedGraph& pg);

/// Rewrites the graph so every assigned region runs on the extents its
/// schedule was searched for: zero padding of channels and filters, larger
/// bottom/right convolution padding for padded output rows and columns, a
/// slice restoring the original output, and filters re-blocked into the
/// module's custom layout. Inserted pad/slice nodes become fallback
/// decisions. A slice takes over the region's output name; the region's
/// last node is then renamed "<id>__padded".
PartitionedGraph materialize(const PartitionedGraph& pg, const TargetModel& t);

/// Same rewrite for every maximal candidate of one module, without costing.
Graph apply_module_transforms(const Graph& g, const ExecModule& m);

json dispatch_report(const PartitionedGraph& pg, const TargetModel& t);

}  // namespace hetcc
