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

#include "hetcc/graph.hpp"
#include "hetcc/graph_io.hpp"

namespace hetcc {

// Reference integer semantics; the numerical oracle for every pass and for
// generated code. Tensors are exchanged in physical order.
//   conv2d/dense/elementwise arithmetic: exact, then wrapped to i32
//   div: truncation toward zero
//   right_shift, requant: floor (arithmetic) shift
//   requant: clip(((x*M + B) >> S), min, max), per channel or scalar M/B
//   avgpool2d: i32 window sum / (ky*kx), truncating, padding counts as zero

/// Evaluates the graph and returns its outputs. Throws Error on missing or
/// mis-sized inputs.
TensorMap interpret_graph(const Graph& g, const TensorMap& inputs);

/// Same as interpret_graph but returns every value, including constants.
TensorMap interpret_all(const Graph& g, const TensorMap& inputs);

/// Evaluates one node given physical input payloads.
std::vector<int64_t> eval_node(const Node& n, const std::vector<const TensorSpec*>& in_specs,
                               const std::vector<const std::vector<int64_t>*>& in_data, const TensorSpec& out_spec);

/// clip((x*M + B) >> S) with floor shift; the scalar requant function.
int64_t requant_value(int64_t x, int64_t M, int64_t B, int64_t S, int64_t lo = -128, int64_t hi = 127);

}  // namespace hetcc
