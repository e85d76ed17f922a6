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

#include "hetcc/workload.hpp"

#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

namespace {

int64_t at(const DimArray& t, Dim d) { return t[idx(d)]; }

bool can_pad(KernelKind kind, Dim d) {
  switch (kind) {
    case KernelKind::conv: return d == Dim::K || d == Dim::C || d == Dim::OY || d == Dim::OX;
    case KernelKind::depthwise: return d == Dim::K || d == Dim::OY || d == Dim::OX;
    case KernelKind::dense: return d == Dim::K || d == Dim::C;
    case KernelKind::add: return false;
  }
  return false;
}

int64_t largest_divisor_at_most(int64_t n, int64_t u) {
  for (int64_t d = std::min(n, u); d > 1; --d)
    if (n % d == 0) return d;
  return 1;
}

// Storage-order extents of a filter tile in `layout`.
std::vector<int64_t> filter_storage(const Layout& l, int64_t K, int64_t C, int64_t FY, int64_t FX, int64_t Cfull) {
  if (l.kind == Layout::Kind::OHWI) return {K, FY, FX, C};
  if (l.kind == Layout::Kind::Custom && l.custom == "diana_kblock16") return {ceil_div(K, 16), C, FY, FX, std::min<int64_t>(K, 16)};
  if (l.kind == Layout::Kind::Custom && l.custom == "ne16_cblock16")
    return {K, ceil_div(C, 16), FY, FX, std::min<int64_t>(Cfull, 16)};
  return {K, C, FY, FX};
}

}  // namespace

int64_t Workload::macs() const {
  const DimArray& d = dims;
  switch (kind) {
    case KernelKind::conv:
    case KernelKind::depthwise:
      return at(d, Dim::K) * at(d, Dim::C) * at(d, Dim::OY) * at(d, Dim::OX) * at(d, Dim::FY) * at(d, Dim::FX);
    case KernelKind::dense: return at(d, Dim::K) * at(d, Dim::C);
    case KernelKind::add: return at(d, Dim::K) * at(d, Dim::OY) * at(d, Dim::OX);
  }
  return 0;
}

bool relevant(KernelKind kind, Operand o, Dim d) {
  switch (kind) {
    case KernelKind::conv:
      if (o == Operand::I) return d != Dim::K;
      if (o == Operand::W) return d == Dim::K || d == Dim::C || d == Dim::FY || d == Dim::FX;
      return d == Dim::K || d == Dim::OY || d == Dim::OX;
    case KernelKind::depthwise:
      if (o == Operand::I) return d != Dim::C;
      if (o == Operand::W) return d == Dim::K || d == Dim::C || d == Dim::FY || d == Dim::FX;
      return d == Dim::K || d == Dim::OY || d == Dim::OX;
    case KernelKind::dense:
      if (o == Operand::I) return d == Dim::C;
      if (o == Operand::W) return d == Dim::K || d == Dim::C;
      return d == Dim::K;
    case KernelKind::add: return d == Dim::K || d == Dim::OY || d == Dim::OX;
  }
  return false;
}

namespace {

int64_t elems(const Workload& w, Operand o, const DimArray& t, bool clip) {
  auto iy = [&] {
    int64_t v = window_extent(at(t, Dim::OY), at(t, Dim::FY), w.sy, w.dy);
    return clip ? std::min(v, w.IY) : v;
  };
  auto ix = [&] {
    int64_t v = window_extent(at(t, Dim::OX), at(t, Dim::FX), w.sx, w.dx);
    return clip ? std::min(v, w.IX) : v;
  };
  switch (w.kind) {
    case KernelKind::conv:
    case KernelKind::depthwise: {
      int64_t ch = w.kind == KernelKind::conv ? at(t, Dim::C) : at(t, Dim::K);
      if (o == Operand::I) return ch * iy() * ix();
      if (o == Operand::W) return at(t, Dim::K) * at(t, Dim::C) * at(t, Dim::FY) * at(t, Dim::FX);
      return at(t, Dim::K) * at(t, Dim::OY) * at(t, Dim::OX);
    }
    case KernelKind::dense:
      if (o == Operand::I) return at(t, Dim::C);
      if (o == Operand::W) return at(t, Dim::K) * at(t, Dim::C);
      return at(t, Dim::K);
    case KernelKind::add: return at(t, Dim::K) * at(t, Dim::OY) * at(t, Dim::OX);
  }
  return 0;
}

}  // namespace

int64_t tile_bytes(const Workload& w, Operand o, const DimArray& t) {
  return elems(w, o, t, false) * dtype_bytes(w.dtype[idx(o)]);
}

int64_t transfer_bytes(const Workload& w, Operand o, const DimArray& t) {
  return elems(w, o, t, true) * dtype_bytes(w.dtype[idx(o)]);
}

void operand_extents(const Workload& w, Operand o, const DimArray& t, std::vector<int64_t>& tile,
                     std::vector<int64_t>& full) {
  const DimArray& a = w.adapted;
  const bool nhwc = w.act_layout == Layout::nhwc();
  auto act = [&](int64_t c, int64_t h, int64_t x) {
    return nhwc ? std::vector<int64_t>{h, x, c} : std::vector<int64_t>{c, h, x};
  };
  switch (w.kind) {
    case KernelKind::conv:
    case KernelKind::depthwise: {
      const bool dw = w.kind == KernelKind::depthwise;
      if (o == Operand::I) {
        int64_t iy = std::min(window_extent(at(t, Dim::OY), at(t, Dim::FY), w.sy, w.dy), w.IY);
        int64_t ix = std::min(window_extent(at(t, Dim::OX), at(t, Dim::FX), w.sx, w.dx), w.IX);
        tile = act(dw ? at(t, Dim::K) : at(t, Dim::C), iy, ix);
        full = act(dw ? at(a, Dim::K) : at(a, Dim::C), w.IY, w.IX);
      } else if (o == Operand::W) {
        tile = filter_storage(w.weight_layout, at(t, Dim::K), at(t, Dim::C), at(t, Dim::FY), at(t, Dim::FX), at(a, Dim::C));
        full = filter_storage(w.weight_layout, at(a, Dim::K), at(a, Dim::C), at(a, Dim::FY), at(a, Dim::FX), at(a, Dim::C));
      } else {
        tile = act(at(t, Dim::K), at(t, Dim::OY), at(t, Dim::OX));
        full = act(at(a, Dim::K), at(a, Dim::OY), at(a, Dim::OX));
      }
      return;
    }
    case KernelKind::dense:
      if (o == Operand::I) {
        tile = {at(t, Dim::C)};
        full = {at(a, Dim::C)};
      } else if (o == Operand::W) {
        tile = {at(t, Dim::K), at(t, Dim::C)};
        full = {at(a, Dim::K), at(a, Dim::C)};
      } else {
        tile = {at(t, Dim::K)};
        full = {at(a, Dim::K)};
      }
      return;
    case KernelKind::add:
      tile = act(at(t, Dim::K), at(t, Dim::OY), at(t, Dim::OX));
      full = act(at(a, Dim::K), at(a, Dim::OY), at(a, Dim::OX));
      return;
  }
}

int64_t tile_chunks(const Workload& w, Operand o, const DimArray& t) {
  std::vector<int64_t> tile, full;
  operand_extents(w, o, t, tile, full);
  return contiguous_chunks(tile, full);
}

int64_t tile_chunks(const Workload& w, Operand o, const DimArray& t, const DimArray& parent) {
  std::vector<int64_t> tile, ptile, full;
  operand_extents(w, o, t, tile, full);
  operand_extents(w, o, parent, ptile, full);
  return contiguous_chunks(tile, ptile);
}

void resolve_spatial(Workload& w, const ExecModule& m) {
  const DimArray& u = m.unroll_for(w.kind);
  for (Dim d : kAllDims) {
    int64_t n = w.dims[idx(d)];
    int64_t ud = u[idx(d)];
    if (w.kind == KernelKind::depthwise && d == Dim::C) ud = 1;
    Adaptation a{Adaptation::Kind::keep_reduced, 1};
    if (ud > 1) {
      bool pad_ok = can_pad(w.kind, d) && m.transforms.paddable.count(d);
      if (n % ud == 0) {
        a = {Adaptation::Kind::keep_reduced, ud};
      } else if (m.spatial.policy == AdaptPolicy::pad_only) {
        a = pad_ok ? Adaptation{Adaptation::Kind::pad_to, ceil_div(n, ud) * ud}
                   : Adaptation{Adaptation::Kind::keep_reduced, largest_divisor_at_most(n, ud)};
      } else {
        a = choose_spatial_adaptation(n, ud);
        if (a.kind == Adaptation::Kind::pad_to && !pad_ok) a = {Adaptation::Kind::keep_reduced, largest_divisor_at_most(n, ud - 1)};
      }
    }
    w.adaptation[idx(d)] = a;
    if (a.kind == Adaptation::Kind::pad_to) {
      w.adapted[idx(d)] = a.value;
      w.spatial[idx(d)] = ud;
    } else {
      w.adapted[idx(d)] = n;
      w.spatial[idx(d)] = a.value;
    }
  }
}

Workload extract_workload(const MatchCandidate& c, const Graph& g, const ExecModule& m) {
  auto specs = infer_specs(g);
  const Node* a = g.find_node(c.anchor);
  if (!a) throw InternalError("candidate anchor '" + c.anchor + "' not in graph");
  auto kind = anchor_kind(g, *a);
  if (!kind) throw InternalError("anchor '" + c.anchor + "' has no workload model");
  Workload w;
  w.kind = *kind;
  const TensorSpec& x = specs.at(a->inputs[0]);
  const TensorSpec& y = specs.at(a->inputs[1]);
  w.dtype[idx(Operand::I)] = x.dtype;
  w.dtype[idx(Operand::W)] = y.dtype;
  w.act_layout = x.layout.kind == Layout::Kind::None ? Layout::nchw() : x.layout;
  auto set = [&](Dim d, int64_t v) { w.dims[idx(d)] = v; };
  switch (w.kind) {
    case KernelKind::conv:
    case KernelKind::depthwise: {
      auto xc = canonical_shape(x), wc = canonical_shape(y), oc = canonical_shape(specs.at(a->id));
      auto at = conv_attrs(*a);
      set(Dim::K, wc[0]);
      set(Dim::C, wc[1]);
      set(Dim::OY, oc[2]);
      set(Dim::OX, oc[3]);
      set(Dim::FY, wc[2]);
      set(Dim::FX, wc[3]);
      w.sy = at.sy;
      w.sx = at.sx;
      w.dy = at.dy;
      w.dx = at.dx;
      w.pad_top = at.pad_top;
      w.pad_left = at.pad_left;
      w.pad_bottom = at.pad_bottom;
      w.pad_right = at.pad_right;
      w.IY = xc[2];
      w.IX = xc[3];
      w.weight_layout = y.layout;
      break;
    }
    case KernelKind::dense:
      set(Dim::K, y.shape[0]);
      set(Dim::C, y.shape[1]);
      w.weight_layout = Layout::none();
      break;
    case KernelKind::add: {
      auto xc = canonical_shape(x);
      set(Dim::K, xc[1]);
      set(Dim::OY, xc[2]);
      set(Dim::OX, xc[3]);
      w.IY = xc[2];
      w.IX = xc[3];
      w.weight_layout = x.layout;
      break;
    }
  }
  for (size_t i = 1; i < c.node_ids.size(); ++i) {
    const Node* n = g.find_node(c.node_ids[i]);
    if (n->op == OpKind::bias_add) w.has_bias = true;
    if (n->op == OpKind::requant) w.has_requant = true;
    if (n->op == OpKind::relu) w.has_relu = true;
  }
  w.dtype[idx(Operand::O)] = specs.at(c.node_ids.back()).dtype;
  if ((w.kind == KernelKind::conv || w.kind == KernelKind::depthwise) && !m.transforms.weight_layout.empty())
    w.weight_layout = Layout::custom_layout(m.transforms.weight_layout);
  resolve_spatial(w, m);
  return w;
}

json workload_to_json(const Workload& w) {
  json j;
  j["kind"] = std::string(kernel_kind_name(w.kind));
  for (Dim d : kAllDims) {
    j["dims"][std::string(dim_name(d))] = w.dims[idx(d)];
    j["adapted"][std::string(dim_name(d))] = w.adapted[idx(d)];
    if (w.spatial[idx(d)] != 1) j["spatial"][std::string(dim_name(d))] = w.spatial[idx(d)];
  }
  if (!j.contains("spatial")) j["spatial"] = json::object();
  j["strides"] = {w.sy, w.sx};
  j["dilation"] = {w.dy, w.dx};
  return j;
}

}  // namespace hetcc
