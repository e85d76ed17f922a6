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

#include "hetcc/graph.hpp"

#include <algorithm>
#include <numeric>

namespace hetcc {

std::string_view dim_name(Dim d) {
  static constexpr std::array<std::string_view, kNumDims> names = {"K", "C", "OY", "OX", "FY", "FX"};
  return names[idx(d)];
}

std::optional<Dim> parse_dim(std::string_view s) {
  for (Dim d : kAllDims)
    if (dim_name(d) == s) return d;
  return std::nullopt;
}

char operand_char(Operand op) { return "IWO"[idx(op)]; }

std::optional<Operand> parse_operand(char c) {
  switch (c) {
    case 'I': return Operand::I;
    case 'W': return Operand::W;
    case 'O': return Operand::O;
    default: return std::nullopt;
  }
}

std::string_view dtype_name(DType t) { return t == DType::i8 ? "i8" : "i32"; }

DType parse_dtype(std::string_view s) {
  if (s == "i8" || s == "int8") return DType::i8;
  if (s == "i32" || s == "int32") return DType::i32;
  throw ParseError("unknown dtype '" + std::string(s) + "'");
}

int dtype_bytes(DType t) { return t == DType::i8 ? 1 : 4; }
int64_t dtype_min(DType t) { return t == DType::i8 ? -128 : INT32_MIN; }
int64_t dtype_max(DType t) { return t == DType::i8 ? 127 : INT32_MAX; }

int64_t wrap_to(DType t, int64_t v) {
  if (t == DType::i8) return static_cast<int8_t>(static_cast<uint8_t>(static_cast<uint64_t>(v) & 0xffu));
  return static_cast<int32_t>(static_cast<uint32_t>(static_cast<uint64_t>(v) & 0xffffffffu));
}

std::string Layout::str() const {
  switch (kind) {
    case Kind::None: return "";
    case Kind::NCHW: return "NCHW";
    case Kind::NHWC: return "NHWC";
    case Kind::OIHW: return "OIHW";
    case Kind::OHWI: return "OHWI";
    case Kind::Custom: return custom;
  }
  return "";
}

Layout parse_layout(std::string_view s) {
  if (s.empty()) return Layout::none();
  if (s == "NCHW") return Layout::nchw();
  if (s == "NHWC") return Layout::nhwc();
  if (s == "OIHW") return Layout::oihw();
  if (s == "OHWI") return Layout::ohwi();
  return Layout::custom_layout(std::string(s));
}

int64_t TensorSpec::numel() const {
  return std::accumulate(shape.begin(), shape.end(), int64_t{1}, std::multiplies<>());
}

namespace {
constexpr std::array<std::pair<OpKind, std::string_view>, 17> kOps = {{
    {OpKind::conv2d, "conv2d"},
    {OpKind::dense, "dense"},
    {OpKind::add, "add"},
    {OpKind::mul, "mul"},
    {OpKind::bias_add, "bias_add"},
    {OpKind::relu, "relu"},
    {OpKind::clip, "clip"},
    {OpKind::cast, "cast"},
    {OpKind::right_shift, "right_shift"},
    {OpKind::div, "div"},
    {OpKind::avgpool2d, "avgpool2d"},
    {OpKind::maxpool2d, "maxpool2d"},
    {OpKind::requant, "requant"},
    {OpKind::reshape, "reshape"},
    {OpKind::flatten, "flatten"},
    {OpKind::pad, "pad"},
    {OpKind::slice, "slice"},
}};
}  // namespace

std::string_view op_name(OpKind op) {
  for (auto& [k, n] : kOps)
    if (k == op) return n;
  return "?";
}

std::optional<OpKind> parse_op(std::string_view s) {
  for (auto& [k, n] : kOps)
    if (n == s) return k;
  return std::nullopt;
}

bool is_binary_elementwise(OpKind op) {
  return op == OpKind::add || op == OpKind::mul || op == OpKind::div || op == OpKind::right_shift ||
         op == OpKind::bias_add;
}

const Node* Graph::find_node(std::string_view id) const {
  for (auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

Node* Graph::find_node(std::string_view id) {
  for (auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

int Graph::node_index(std::string_view id) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

const TensorSpec* Graph::find_input(std::string_view name) const {
  for (auto& t : inputs)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<std::string> Graph::consumers(std::string_view value) const {
  std::vector<std::string> out;
  for (auto& n : nodes)
    if (std::find(n.inputs.begin(), n.inputs.end(), value) != n.inputs.end()) out.push_back(n.id);
  return out;
}

bool Graph::is_output(std::string_view value) const {
  return std::find(outputs.begin(), outputs.end(), value) != outputs.end();
}

namespace {

int64_t get_int(const json& attrs, const char* key, int64_t dflt) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return dflt;
  if (!it->is_number_integer()) throw ParseError(std::string("attribute '") + key + "' must be an integer");
  return it->get<int64_t>();
}

std::vector<int64_t> get_ints(const json& attrs, const char* key, std::vector<int64_t> dflt) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return dflt;
  if (it->is_number_integer()) return {it->get<int64_t>()};
  if (!it->is_array()) throw ParseError(std::string("attribute '") + key + "' must be an integer list");
  std::vector<int64_t> v;
  for (auto& e : *it) {
    if (!e.is_number_integer()) throw ParseError(std::string("attribute '") + key + "' must be an integer list");
    v.push_back(e.get<int64_t>());
  }
  return v;
}

std::vector<int64_t> get_pair(const json& attrs, const char* key, int64_t dflt) {
  auto v = get_ints(attrs, key, {dflt, dflt});
  if (v.size() == 1) v.push_back(v[0]);
  if (v.size() != 2) throw ParseError(std::string("attribute '") + key + "' must have 2 entries");
  return v;
}

std::vector<int64_t> get_pads(const json& attrs) {
  auto v = get_ints(attrs, "padding", {0, 0, 0, 0});
  if (v.size() == 1) v = {v[0], v[0], v[0], v[0]};
  if (v.size() == 2) v = {v[0], v[1], v[0], v[1]};
  if (v.size() != 4) throw ParseError("attribute 'padding' must have 4 entries (top, left, bottom, right)");
  return v;
}

}  // namespace

ConvAttrs conv_attrs(const Node& n) {
  ConvAttrs a;
  auto s = get_pair(n.attrs, "strides", 1);
  auto d = get_pair(n.attrs, "dilation", 1);
  auto p = get_pads(n.attrs);
  a.sy = s[0], a.sx = s[1];
  a.dy = d[0], a.dx = d[1];
  a.pad_top = p[0], a.pad_left = p[1], a.pad_bottom = p[2], a.pad_right = p[3];
  a.groups = get_int(n.attrs, "groups", 1);
  return a;
}

void set_conv_attrs(Node& n, const ConvAttrs& a) {
  n.attrs["strides"] = {a.sy, a.sx};
  n.attrs["dilation"] = {a.dy, a.dx};
  n.attrs["padding"] = {a.pad_top, a.pad_left, a.pad_bottom, a.pad_right};
  n.attrs["groups"] = a.groups;
}

PoolAttrs pool_attrs(const Node& n) {
  PoolAttrs a;
  auto k = get_pair(n.attrs, "kernel", 1);
  auto s = get_pair(n.attrs, "strides", 0);
  auto p = get_pads(n.attrs);
  a.ky = k[0], a.kx = k[1];
  a.sy = s[0] > 0 ? s[0] : a.ky;
  a.sx = s[1] > 0 ? s[1] : a.kx;
  a.pad_top = p[0], a.pad_left = p[1], a.pad_bottom = p[2], a.pad_right = p[3];
  return a;
}

RequantAttrs requant_attrs(const Node& n) {
  RequantAttrs a;
  a.M = get_ints(n.attrs, "M", {1});
  a.B = get_ints(n.attrs, "B", {0});
  a.S = get_int(n.attrs, "S", 0);
  a.min = get_int(n.attrs, "min", -128);
  a.max = get_int(n.attrs, "max", 127);
  return a;
}

void set_requant_attrs(Node& n, const RequantAttrs& a) {
  auto put = [&](const char* key, const std::vector<int64_t>& v) {
    if (v.size() == 1)
      n.attrs[key] = v[0];
    else
      n.attrs[key] = v;
  };
  put("M", a.M);
  put("B", a.B);
  n.attrs["S"] = a.S;
  if (a.min != -128) n.attrs["min"] = a.min; else n.attrs.erase("min");
  if (a.max != 127) n.attrs["max"] = a.max; else n.attrs.erase("max");
}

ClipAttrs clip_attrs(const Node& n) {
  ClipAttrs a;
  a.min = get_int(n.attrs, "min", INT32_MIN);
  a.max = get_int(n.attrs, "max", INT32_MAX);
  return a;
}

int64_t window_out(int64_t in, int64_t pad_lo, int64_t pad_hi, int64_t kernel, int64_t dilation, int64_t stride) {
  int64_t span = in + pad_lo + pad_hi - dilation * (kernel - 1) - 1;
  if (span < 0) return 0;
  return span / stride + 1;
}

int channel_axis(const TensorSpec& s) {
  if (s.shape.size() == 4 && s.layout.kind == Layout::Kind::NHWC) return 3;
  if (s.shape.size() >= 2) return 1;
  return 0;
}

}  // namespace hetcc
