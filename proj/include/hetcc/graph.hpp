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

#include <json.hpp>

#include "hetcc/common.hpp"

namespace hetcc {

using json = nlohmann::json;

enum class DType { i8, i32 };

std::string_view dtype_name(DType t);
DType parse_dtype(std::string_view s);
int dtype_bytes(DType t);
int64_t dtype_min(DType t);
int64_t dtype_max(DType t);
/// Two's complement wrap of an exact value into the dtype's range.
int64_t wrap_to(DType t, int64_t v);

/// Physical storage order. Activation layouts apply to 4-D activations,
/// weight layouts to 4-D convolution filters; `Custom` names a
/// module-specific blocked filter layout.
struct Layout {
  enum class Kind { None, NCHW, NHWC, OIHW, OHWI, Custom };
  Kind kind = Kind::None;
  std::string custom;

  static Layout none() { return {}; }
  static Layout nchw() { return {Kind::NCHW, {}}; }
  static Layout nhwc() { return {Kind::NHWC, {}}; }
  static Layout oihw() { return {Kind::OIHW, {}}; }
  static Layout ohwi() { return {Kind::OHWI, {}}; }
  static Layout custom_layout(std::string name) { return {Kind::Custom, std::move(name)}; }

  bool is_activation() const { return kind == Kind::NCHW || kind == Kind::NHWC; }
  bool is_weight() const { return kind == Kind::OIHW || kind == Kind::OHWI || kind == Kind::Custom; }
  std::string str() const;

  friend bool operator==(const Layout&, const Layout&) = default;
};

Layout parse_layout(std::string_view s);

struct TensorSpec {
  std::string name;
  std::vector<int64_t> shape;  // physical order
  DType dtype = DType::i8;
  Layout layout;

  int64_t numel() const;
  int64_t bytes() const { return numel() * dtype_bytes(dtype); }
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

struct Constant {
  TensorSpec spec;
  std::vector<int64_t> data;  // physical order, length == spec.numel()
  friend bool operator==(const Constant&, const Constant&) = default;
};

enum class OpKind {
  conv2d,
  dense,
  add,
  mul,
  bias_add,
  relu,
  clip,
  cast,
  right_shift,
  div,
  avgpool2d,
  maxpool2d,
  requant,
  reshape,
  flatten,
  pad,
  slice,
};

std::string_view op_name(OpKind op);
std::optional<OpKind> parse_op(std::string_view s);
bool is_binary_elementwise(OpKind op);

struct Node {
  std::string id;
  OpKind op = OpKind::relu;
  json attrs = json::object();
  std::vector<std::string> inputs;  // value names (ref suffix ":0" stripped)
  friend bool operator==(const Node&, const Node&) = default;
};

struct Graph {
  std::string name;
  std::vector<TensorSpec> inputs;
  std::map<std::string, Constant> constants;
  std::vector<Node> nodes;  // topological order
  std::vector<std::string> outputs;

  const Node* find_node(std::string_view id) const;
  Node* find_node(std::string_view id);
  int node_index(std::string_view id) const;  // -1 if absent
  const TensorSpec* find_input(std::string_view name) const;
  bool is_constant(std::string_view name) const { return constants.count(std::string(name)) != 0; }
  /// Node ids consuming `value`, in topological order.
  std::vector<std::string> consumers(std::string_view value) const;
  bool is_output(std::string_view value) const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

// ---------------------------------------------------------------------------
// Typed attribute views.

struct ConvAttrs {
  int64_t sy = 1, sx = 1;
  int64_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  int64_t dy = 1, dx = 1;
  int64_t groups = 1;
};
ConvAttrs conv_attrs(const Node& n);
void set_conv_attrs(Node& n, const ConvAttrs& a);

struct PoolAttrs {
  int64_t ky = 1, kx = 1;
  int64_t sy = 1, sx = 1;
  int64_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
};
PoolAttrs pool_attrs(const Node& n);

struct RequantAttrs {
  std::vector<int64_t> M;  // size 1 (scalar) or per channel
  std::vector<int64_t> B;
  int64_t S = 0;
  int64_t min = -128, max = 127;
};
RequantAttrs requant_attrs(const Node& n);
void set_requant_attrs(Node& n, const RequantAttrs& a);

struct ClipAttrs {
  int64_t min = 0, max = 0;
};
ClipAttrs clip_attrs(const Node& n);

/// Output extent of a sliding window along one axis.
int64_t window_out(int64_t in, int64_t pad_lo, int64_t pad_hi, int64_t kernel, int64_t dilation, int64_t stride);

/// Index of the channel axis in physical shape for an activation tensor.
int channel_axis(const TensorSpec& s);

}  // namespace hetcc
