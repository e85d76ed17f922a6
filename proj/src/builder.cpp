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

#include "hetcc/builder.hpp"

#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

GraphBuilder::GraphBuilder(std::string name, Layout activation) : act_(std::move(activation)) {
  g_.name = std::move(name);
}

std::string GraphBuilder::input(const std::string& name, std::vector<int64_t> canonical, DType dt) {
  TensorSpec s;
  s.name = name;
  s.dtype = dt;
  s.layout = canonical.size() == 4 ? act_ : Layout::none();
  s.shape = physical_shape(canonical, s.layout);
  g_.inputs.push_back(std::move(s));
  return name;
}

std::string GraphBuilder::constant(const std::string& name, std::vector<int64_t> canonical, DType dt,
                                   std::vector<int64_t> canonical_data) {
  Constant c;
  c.spec.name = name;
  c.spec.dtype = dt;
  c.spec.layout = canonical.size() == 4 ? (act_ == Layout::nhwc() ? Layout::ohwi() : Layout::oihw()) : Layout::none();
  c.spec.shape = physical_shape(canonical, c.spec.layout);
  c.data = from_canonical(c.spec, canonical_data);
  g_.constants[name] = std::move(c);
  return name;
}

std::string GraphBuilder::random_constant(const std::string& name, std::vector<int64_t> canonical, DType dt,
                                          int64_t lo, int64_t hi, std::mt19937_64& rng) {
  int64_t n = 1;
  for (auto d : canonical) n *= d;
  std::uniform_int_distribution<int64_t> dist(lo, hi);
  std::vector<int64_t> data(n);
  for (auto& v : data) v = dist(rng);
  return constant(name, std::move(canonical), dt, std::move(data));
}

std::string GraphBuilder::node(const std::string& id, OpKind op, std::vector<std::string> inputs, json attrs) {
  Node n;
  n.id = id;
  n.op = op;
  n.attrs = std::move(attrs);
  n.inputs = std::move(inputs);
  g_.nodes.push_back(std::move(n));
  return id;
}

std::string GraphBuilder::conv2d(const std::string& id, const std::string& x, const std::string& w,
                                 const ConvAttrs& a) {
  Node n;
  n.id = id;
  n.op = OpKind::conv2d;
  n.inputs = {x, w};
  set_conv_attrs(n, a);
  g_.nodes.push_back(std::move(n));
  return id;
}

std::string GraphBuilder::requant(const std::string& id, const std::string& x, const RequantAttrs& r) {
  Node n;
  n.id = id;
  n.op = OpKind::requant;
  n.inputs = {x};
  set_requant_attrs(n, r);
  g_.nodes.push_back(std::move(n));
  return id;
}

Graph GraphBuilder::build(std::vector<std::string> outputs) {
  g_.outputs = std::move(outputs);
  auto diags = validate_graph(g_);
  if (!diags.empty()) throw GraphError(diags.front().str());
  return g_;
}

}  // namespace hetcc
