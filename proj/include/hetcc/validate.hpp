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

#include "hetcc/graph.hpp"

namespace hetcc {

struct Diagnostic {
  std::string where;  // node id / tensor name, empty for graph-level issues
  std::string message;
  std::string str() const { return where.empty() ? message : where + ": " + message; }
};

/// Empty iff the graph satisfies every structural and per-node rule.
std::vector<Diagnostic> validate_graph(const Graph& g);

/// Specs of every value (inputs, constants, node outputs). Throws GraphError
/// with the first diagnostic when the graph is invalid.
std::map<std::string, TensorSpec> infer_specs(const Graph& g);

/// Output spec of a single node given the specs of its inputs; appends
/// diagnostics instead of throwing.
TensorSpec infer_node(const Node& n, const std::vector<const TensorSpec*>& in, std::vector<Diagnostic>& diags);

}  // namespace hetcc
