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

#include "hetcc/graph.hpp"

namespace hetcc {

/// Evaluates nodes whose inputs are all constants and drops every node and
/// constant that no output depends on. Graph inputs are kept.
Graph fold_constants_and_dce(const Graph& g);

/// Collapses mul(x,M) -> add(B) -> div(2^S) -> clip -> cast(i8) into a
/// requant node. In strict mode the rewrite only fires when it is provably
/// exact for every input (no i32 wrap, and either x*M+B >= 0 or the clip
/// lower bound is >= 0 so truncating and flooring division agree).
Graph rewrite_requant(const Graph& g, bool strict = true);

/// Switches every activation to `target` (NCHW or NHWC) and permutes filter
/// constants to the matching OIHW / OHWI order. Custom filter layouts are
/// left alone.
Graph transform_layout(const Graph& g, const Layout& target);

/// Removes constants nothing references.
void prune_constants(Graph& g);

/// Closed value interval of a tensor over all possible graph inputs.
struct Range {
  int64_t lo = 0, hi = 0;
};

/// Conservative per-value ranges (inputs span their dtype).
std::map<std::string, Range> value_ranges(const Graph& g);

}  // namespace hetcc
