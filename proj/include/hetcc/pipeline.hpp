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

#include "hetcc/codegen.hpp"
#include "hetcc/dispatch.hpp"

namespace hetcc {

/// Hardware-agnostic passes followed by the switch to the target's
/// activation layout.
Graph prepare_graph(const Graph& g, const TargetModel& t, bool strict_requant = true);

struct CompileOptions {
  SearchLimits limits;
  bool strict_requant = true;
  EmitOptions emit;
};

struct CompileResult {
  PartitionedGraph dispatched;    // decisions on the prepared graph
  PartitionedGraph materialized;  // the graph the program implements
  MemoryPlan plan;
  EmittedProgram program;
  bool accelerated = false;  // at least one decision runs on a module
};

CompileResult compile_graph(const Graph& g, const TargetModel& t, const CompileOptions& opt = {});

/// Dispatch only, no rewriting or emission.
PartitionedGraph estimate_graph(const Graph& g, const TargetModel& t, const CompileOptions& opt = {});

}  // namespace hetcc
