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

#include "hetcc/validate.hpp"

#include <set>

#include "hetcc/layout.hpp"

namespace hetcc {

namespace {

size_t expected_arity(OpKind op) {
  switch (op) {
    case OpKind::conv2d:
    case OpKind::dense:
    case OpKind::add:
    case OpKind::mul:
    case OpKind::bias_add:
    case OpKind::right_shift:
    case OpKind::div: return 2;
    default: return 1;
  }
}

std::vector<int64_t> attr_shape(const Node& n, std::vector<Diagnostic>& diags) {
  auto it = n.attrs.find("shape");
  std::vector<int64_t> v;
  if (it == n.attrs.end() || !it->is_array()) {
    diags.push_back({n.id, "missing integer list attribute 'shape'"});
    return v;
  }
  for (auto& e : *it) {
    if (!e.is_number_integer() || e.get<int64_t>() < 1) {
      diags.push_back({n.id, "attribute 'shape' must hold positive integers"});
      return {};
    }
    v.push_back(e.get<int64_t>());
  }
  return v;
}

TensorSpec with_canonical(const std::string& name, const std::vector<int64_t>& cshape, DType dt, const Layout& l) {
  TensorSpec s;
  s.name = name;
  s.dtype = dt;
  s.layout = cshape.size() == 4 ? l : Layout::none();
  s.shape = physical_shape(cshape, s.layout);
  return s;
}

// Broadcast rule for the second operand of binary elementwise ops.
bool broadcastable(const TensorSpec& a, const TensorSpec& b) {
  if (b.shape == a.shape && b.layout == a.layout) return true;
  if (b.shape.size() == 1 && b.shape[0] == 1) return true;
  if (b.shape.size() == 1 && a.shape.size() >= 2) return b.shape[0] == canonical_shape(a)[1];
  return false;
}

}  // namespace

TensorSpec infer_node(const Node& n, const std::vector<const TensorSpec*>& in, std::vector<Diagnostic>& diags) {
  TensorSpec out;
  out.name = n.id;
  auto bad = [&](std::string msg) {
    diags.push_back({n.id, std::move(msg)});
    return out;
  };
  if (in.size() != expected_arity(n.op))
    return bad(std::string(op_name(n.op)) + " expects " + std::to_string(expected_arity(n.op)) + " input(s), got " +
               std::to_string(in.size()));
  const TensorSpec& x = *in[0];
  auto xc = canonical_shape(x);

  try {
    switch (n.op) {
      case OpKind::conv2d: {
        const TensorSpec& w = *in[1];
        if (x.shape.size() != 4 || !x.layout.is_activation()) return bad("conv2d input must be a 4-D activation");
        if (w.shape.size() != 4 || !w.layout.is_weight()) return bad("conv2d filter must be a 4-D weight tensor");
        auto wc = canonical_shape(w);
        auto a = conv_attrs(n);
        if (a.groups < 1) return bad("groups must be positive");
        if (xc[1] % a.groups != 0) return bad("groups must divide channels");
        if (wc[0] % a.groups != 0) return bad("groups must divide output channels");
        if (wc[1] * a.groups != xc[1])
          return bad("filter input channels " + std::to_string(wc[1]) + " x groups " + std::to_string(a.groups) +
                     " != input channels " + std::to_string(xc[1]));
        if (a.sy < 1 || a.sx < 1 || a.dy < 1 || a.dx < 1) return bad("strides and dilation must be positive");
        if (a.pad_top < 0 || a.pad_left < 0 || a.pad_bottom < 0 || a.pad_right < 0) return bad("negative padding");
        if (w.layout.kind == Layout::Kind::Custom) check_filter_layout(w.layout, wc[0], wc[1], wc[2], wc[3]);
        int64_t oy = window_out(xc[2], a.pad_top, a.pad_bottom, wc[2], a.dy, a.sy);
        int64_t ox = window_out(xc[3], a.pad_left, a.pad_right, wc[3], a.dx, a.sx);
        if (oy < 1 || ox < 1) return bad("empty convolution output");
        return with_canonical(n.id, {xc[0], wc[0], oy, ox}, DType::i32, x.layout);
      }
      case OpKind::dense: {
        const TensorSpec& w = *in[1];
        if (x.shape.size() != 2) return bad("dense input must be rank 2");
        if (w.shape.size() != 2) return bad("dense weight must be rank 2");
        if (w.shape[1] != x.shape[1]) return bad("dense weight input size mismatch");
        return with_canonical(n.id, {x.shape[0], w.shape[0]}, DType::i32, Layout::none());
      }
      case OpKind::add:
      case OpKind::mul:
      case OpKind::div:
      case OpKind::right_shift:
      case OpKind::bias_add: {
        const TensorSpec& b = *in[1];
        if (n.op == OpKind::bias_add) {
          if (b.shape.size() != 1 || x.shape.size() < 2 || b.shape[0] != xc[1])
            return bad("bias_add bias must have one entry per channel");
        } else if (!broadcastable(x, b)) {
          return bad("operand shapes are not broadcastable");
        }
        out = x;
        out.name = n.id;
        out.dtype = DType::i32;
        return out;
      }
      case OpKind::relu:
      case OpKind::clip:
      case OpKind::cast: {
        out = x;
        out.name = n.id;
        if (n.op == OpKind::cast) {
          auto it = n.attrs.find("dtype");
          if (it == n.attrs.end() || !it->is_string()) return bad("cast needs attribute 'dtype'");
          out.dtype = parse_dtype(it->get<std::string>());
        }
        if (n.op == OpKind::clip) {
          auto c = clip_attrs(n);
          if (c.min > c.max) return bad("clip min exceeds max");
        }
        return out;
      }
      case OpKind::requant: {
        auto r = requant_attrs(n);
        int64_t ch = x.shape.size() >= 2 ? xc[1] : x.shape[0];
        if (r.M.size() != 1 && static_cast<int64_t>(r.M.size()) != ch) return bad("requant M must be scalar or per channel");
        if (r.B.size() != 1 && static_cast<int64_t>(r.B.size()) != ch) return bad("requant B must be scalar or per channel");
        if (r.S < 0 || r.S > 31) return bad("requant shift must be in 0..31");
        if (r.min < -128 || r.max > 127 || r.min > r.max) return bad("requant clip bounds must lie in the i8 range");
        out = x;
        out.name = n.id;
        out.dtype = DType::i8;
        return out;
      }
      case OpKind::avgpool2d:
      case OpKind::maxpool2d: {
        if (x.shape.size() != 4 || !x.layout.is_activation()) return bad("pooling input must be a 4-D activation");
        auto p = pool_attrs(n);
        if (p.ky < 1 || p.kx < 1 || p.sy < 1 || p.sx < 1) return bad("pool kernel and strides must be positive");
        int64_t oy = window_out(xc[2], p.pad_top, p.pad_bottom, p.ky, 1, p.sy);
        int64_t ox = window_out(xc[3], p.pad_left, p.pad_right, p.kx, 1, p.sx);
        if (oy < 1 || ox < 1) return bad("empty pooling output");
        return with_canonical(n.id, {xc[0], xc[1], oy, ox}, x.dtype, x.layout);
      }
      case OpKind::reshape: {
        auto shape = attr_shape(n, diags);
        if (shape.empty()) return out;
        int64_t numel = 1;
        for (auto s : shape) numel *= s;
        if (numel != x.numel()) return bad("reshape changes element count");
        Layout l = Layout::nchw();
        if (auto it = n.attrs.find("layout"); it != n.attrs.end() && it->is_string()) l = parse_layout(it->get<std::string>());
        if (shape.size() == 4 && !l.is_activation()) return bad("rank-4 reshape needs an activation layout");
        return with_canonical(n.id, shape, x.dtype, l);
      }
      case OpKind::flatten: {
        if (x.shape.size() != 4) return bad("flatten input must be rank 4");
        return with_canonical(n.id, {xc[0], xc[1] * xc[2] * xc[3]}, x.dtype, Layout::none());
      }
      case OpKind::pad:
      case OpKind::slice: {
        auto shape = attr_shape(n, diags);
        if (shape.empty()) return out;
        if (shape.size() != xc.size()) return bad("pad/slice shape rank mismatch");
        for (size_t i = 0; i < shape.size(); ++i) {
          if (n.op == OpKind::pad && shape[i] < xc[i]) return bad("pad target smaller than input");
          if (n.op == OpKind::slice && shape[i] > xc[i]) return bad("slice target larger than input");
        }
        return with_canonical(n.id, shape, x.dtype, x.layout);
      }
    }
  } catch (const Error& e) {
    return bad(e.what());
  }
  return out;
}

namespace {

std::vector<Diagnostic> run_validation(const Graph& g, std::map<std::string, TensorSpec>* specs_out) {
  std::vector<Diagnostic> diags;
  std::map<std::string, TensorSpec> specs;
  std::set<std::string> names;
  std::set<std::string> node_ids;
  for (auto& n : g.nodes) node_ids.insert(n.id);

  auto declare = [&](const std::string& name) {
    if (name.empty()) diags.push_back({"", "empty value name"});
    if (!names.insert(name).second) diags.push_back({name, "duplicate value name"});
  };
  auto check_spec = [&](const TensorSpec& s) {
    if (s.shape.empty() || (s.shape.size() != 1 && s.shape.size() != 2 && s.shape.size() != 4))
      diags.push_back({s.name, "rank must be 1, 2 or 4"});
    for (auto d : s.shape)
      if (d < 1) diags.push_back({s.name, "shape entries must be positive"});
  };

  for (auto& t : g.inputs) {
    declare(t.name);
    check_spec(t);
    if (t.shape.size() == 4 && !t.layout.is_activation())
      diags.push_back({t.name, "4-D graph inputs need an activation layout"});
    specs[t.name] = t;
  }
  for (auto& [name, c] : g.constants) {
    declare(name);
    check_spec(c.spec);
    if (static_cast<int64_t>(c.data.size()) != c.spec.numel())
      diags.push_back({name, "payload length " + std::to_string(c.data.size()) + " != shape product " +
                                 std::to_string(c.spec.numel())});
    for (auto v : c.data)
      if (v < dtype_min(c.spec.dtype) || v > dtype_max(c.spec.dtype)) {
        diags.push_back({name, "payload value out of dtype range"});
        break;
      }
    if (c.spec.shape.size() == 4 && c.spec.layout.kind == Layout::Kind::None)
      diags.push_back({name, "4-D constants need a layout"});
    specs[name] = c.spec;
  }
  for (auto& n : g.nodes) {
    declare(n.id);
    std::vector<const TensorSpec*> in;
    bool resolved = true;
    for (auto& ref : n.inputs) {
      auto it = specs.find(ref);
      if (it == specs.end()) {
        resolved = false;
        if (node_ids.count(ref))
          diags.push_back({n.id, "input '" + ref + "' is defined later (cycle or broken topological order)"});
        else
          diags.push_back({n.id, "references undefined tensor \"" + ref + "\""});
        continue;
      }
      in.push_back(&it->second);
    }
    if (!resolved) continue;
    size_t before = diags.size();
    TensorSpec s = infer_node(n, in, diags);
    if (diags.size() == before) specs[n.id] = s;
  }
  if (g.outputs.empty()) diags.push_back({"", "graph has no outputs"});
  for (auto& o : g.outputs)
    if (!specs.count(o) && !node_ids.count(o)) diags.push_back({"", "output references undefined tensor \"" + o + "\""});
  if (specs_out) *specs_out = std::move(specs);
  return diags;
}

}  // namespace

std::vector<Diagnostic> validate_graph(const Graph& g) { return run_validation(g, nullptr); }

std::map<std::string, TensorSpec> infer_specs(const Graph& g) {
  std::map<std::string, TensorSpec> specs;
  auto diags = run_validation(g, &specs);
  if (!diags.empty()) throw GraphError(diags.front().str());
  return specs;
}

}  // namespace hetcc
