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

#include <random>

#include "hetcc/graph.hpp"

namespace hetcc {

/// Incremental graph construction with canonical shapes; used by the
/// fixture generator and tests. Shapes passed here are canonical (NCHW /
/// OIHW) and stored physically according to the builder's layouts.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::string name, Layout activation = Layout::nchw());

  std::string input(const std::string& name, std::vector<int64_t> canonical, DType dt = DType::i8);
  std::string constant(const std::string& name, std::vector<int64_t> canonical, DType dt,
                       std::vector<int64_t> canonical_data);
  std::string node(const std::string& id, OpKind op, std::vector<std::string> inputs, json attrs = json::object());

  std::string conv2d(const std::string& id, const std::string& x, const std::string& w, const ConvAttrs& a);
  std::string requant(const std::string& id, const std::string& x, const RequantAttrs& r);

  /// Random constant payload in [lo, hi].
  std::string random_constant(const std::string& name, std::vector<int64_t> canonical, DType dt, int64_t lo,
                              int64_t hi, std::mt19937_64& rng);

  Graph build(std::vector<std::string> outputs);

 private:
  Graph g_;
  Layout act_;
};

}  // namespace hetcc
