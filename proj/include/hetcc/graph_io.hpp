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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hetcc/graph.hpp"

namespace hetcc {

/// Parses and validates a graph document. Throws ParseError on malformed
/// JSON (with line/column) or schema violations, GraphError on dangling
/// references, cycles or invalid node semantics.
Graph parse_graph(std::string_view text);
Graph load_graph(const std::filesystem::path& path);

json graph_to_json(const Graph& g);
std::string serialize_graph(const Graph& g);

/// Named integer arrays, as used for interpreter inputs and outputs.
using TensorMap = std::map<std::string, std::vector<int64_t>>;

TensorMap parse_tensor_map(std::string_view text);
std::string serialize_tensor_map(const TensorMap& m);

/// Reads a whole file; throws Error naming the path if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace hetcc
