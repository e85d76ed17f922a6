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

#include "hetcc/interpreter.hpp"

#include <algorithm>
#include <limits>

#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

int64_t requant_value(int64_t x, int64_t M, int64_t B, int64_t S, int64_t lo, int64_t hi) {
  int64_t v = (x * M + B) >> S;
  return std::clamp(v, lo, hi);
}

namespace {

struct Canon {
  std::vector<int64_t> shape;
  std::vector<int64_t> data;
};

Canon canon(const TensorSpec& s, const std::vector<int64_t>& phys) { return {canonical_shape(s), to_canonical(s, phys)}; }

// Canonical channel index of flat canonical position i.
int64_t channel_at(const std::vector<int64_t>& cs, int64_t i) {
  if (cs.size() == 1) return i;
  int64_t inner = 1;
  for (size_t d = 2; d < cs.size(); ++d) inner *= cs[d];
  return (i / inner) % cs[1];
}

int64_t pick(const std::vector<int64_t>& v, int64_t c) { return v.size() == 1 ? v[0] : v[c]; }

std::vector<int64_t> conv2d(const Node& n, const Canon& x, const Canon& w, const std::vector<int64_t>& os) {
  auto a = conv_attrs(n);
  const int64_t N = x.shape[0], C = x.shape[1], IY = x.shape[2], IX = x.shape[3];
  const int64_t K = w.shape[0], Cg = w.shape[1], FY = w.shape[2], FX = w.shape[3];
  const int64_t OY = os[2], OX = os[3];
  const int64_t Kg = K / a.groups;
  std::vector<int64_t> out(N * K * OY * OX);
  for (int64_t b = 0; b < N; ++b)
    for (int64_t k = 0; k < K; ++k) {
      int64_t g = k / Kg;
      for (int64_t oy = 0; oy < OY; ++oy)
        for (int64_t ox = 0; ox < OX; ++ox) {
          int64_t acc = 0;
          for (int64_t c = 0; c < Cg; ++c)
            for (int64_t fy = 0; fy < FY; ++fy) {
              int64_t iy = oy * a.sy - a.pad_top + fy * a.dy;
              if (iy < 0 || iy >= IY) continue;
              for (int64_t fx = 0; fx < FX; ++fx) {
                int64_t ix = ox * a.sx - a.pad_left + fx * a.dx;
                if (ix < 0 || ix >= IX) continue;
                int64_t xi = ((b * C + g * Cg + c) * IY + iy) * IX + ix;
                int64_t wi = ((k * Cg + c) * FY + fy) * FX + fx;
                acc += x.data[xi] * w.data[wi];
              }
            }
          out[((b * K + k) * OY + oy) * OX + ox] = wrap_to(DType::i32, acc);
        }
    }
  return out;
}

std::vector<int64_t> pool(const Node& n, const Canon& x, const std::vector<int64_t>& os) {
  auto p = pool_attrs(n);
  const bool avg = n.op == OpKind::avgpool2d;
  const int64_t N = x.shape[0], C = x.shape[1], IY = x.shape[2], IX = x.shape[3];
  const int64_t OY = os[2], OX = os[3];
  std::vector<int64_t> out(N * C * OY * OX);
  for (int64_t b = 0; b < N; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oy = 0; oy < OY; ++oy)
        for (int64_t ox = 0; ox < OX; ++ox) {
          int64_t acc = avg ? 0 : std::numeric_limits<int64_t>::min();
          for (int64_t ky = 0; ky < p.ky; ++ky) {
            int64_t iy = oy * p.sy - p.pad_top + ky;
            if (iy < 0 || iy >= IY) continue;
            for (int64_t kx = 0; kx < p.kx; ++kx) {
              int64_t ix = ox * p.sx - p.pad_left + kx;
              if (ix < 0 || ix >= IX) continue;
              int64_t v = x.data[((b * C + c) * IY + iy) * IX + ix];
              acc = avg ? acc + v : std::max(acc, v);
            }
          }
          if (avg) acc = wrap_to(DType::i32, acc) / (p.ky * p.kx);
          out[((b * C + c) * OY + oy) * OX + ox] = acc;
        }
  return out;
}

// Zero-pad (grow) or slice (shrink) at the end of every axis.
std::vector<int64_t> resize(const Canon& x, const std::vector<int64_t>& os) {
  int64_t total = 1;
  for (auto d : os) total *= d;
  std::vector<int64_t> out(total, 0);
  const size_t r = os.size();
  std::vector<int64_t> idx(r, 0);
  for (int64_t i = 0; i < total; ++i) {
    bool inside = true;
    int64_t src = 0;
    for (size_t d = 0; d < r; ++d) {
      if (idx[d] >= x.shape[d]) inside = false;
      src = src * x.shape[d] + std::min(idx[d], x.shape[d] - 1);
    }
    if (inside) out[i] = x.data[src];
    for (size_t d = r; d-- > 0;) {
      if (++idx[d] < os[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace

std::vector<int64_t> eval_node(const Node& n, const std::vector<const TensorSpec*>& in_specs,
                               const std::vector<const std::vector<int64_t>*>& in_data, const TensorSpec& out_spec) {
  Canon x = canon(*in_specs[0], *in_data[0]);
  const auto os = canonical_shape(out_spec);
  std::vector<int64_t> out;

  switch (n.op) {
    case OpKind::conv2d: {
      Canon w = canon(*in_specs[1], *in_data[1]);
      out = conv2d(n, x, w, os);
      break;
    }
    case OpKind::dense: {
      const auto& w = *in_data[1];
      const int64_t N = x.shape[0], C = x.shape[1], K = in_specs[1]->shape[0];
      out.assign(N * K, 0);
      for (int64_t b = 0; b < N; ++b)
        for (int64_t k = 0; k < K; ++k) {
          int64_t acc = 0;
          for (int64_t c = 0; c < C; ++c) acc += x.data[b * C + c] * w[k * C + c];
          out[b * K + k] = wrap_to(DType::i32, acc);
        }
      break;
    }
    case OpKind::add:
    case OpKind::mul:
    case OpKind::div:
    case OpKind::right_shift:
    case OpKind::bias_add: {
      Canon b = canon(*in_specs[1], *in_data[1]);
      const bool same = b.shape == x.shape;
      out.resize(x.data.size());
      for (size_t i = 0; i < x.data.size(); ++i) {
        int64_t rhs = same ? b.data[i] : (b.data.size() == 1 ? b.data[0] : b.data[channel_at(x.shape, i)]);
        int64_t lhs = x.data[i];
        int64_t v = 0;
        switch (n.op) {
          case OpKind::add:
          case OpKind::bias_add: v = lhs + rhs; break;
          case OpKind::mul: v = lhs * rhs; break;
          case OpKind::div:
            if (rhs == 0) throw Error(n.id + ": division by zero");
            v = lhs / rhs;
            break;
          default:
            if (rhs < 0 || rhs > 31) throw Error(n.id + ": shift amount out of range");
            v = lhs >> rhs;
            break;
        }
        out[i] = wrap_to(DType::i32, v);
      }
      break;
    }
    case OpKind::relu:
      out = x.data;
      for (auto& v : out) v = std::max<int64_t>(v, 0);
      break;
    case OpKind::clip: {
      auto c = clip_attrs(n);
      out = x.data;
      for (auto& v : out) v = std::clamp(v, c.min, c.max);
      break;
    }
    case OpKind::cast:
      out = x.data;
      for (auto& v : out) v = wrap_to(out_spec.dtype, v);
      break;
    case OpKind::requant: {
      auto r = requant_attrs(n);
      out.resize(x.data.size());
      for (size_t i = 0; i < x.data.size(); ++i) {
        int64_t c = channel_at(x.shape, i);
        out[i] = requant_value(x.data[i], pick(r.M, c), pick(r.B, c), r.S, r.min, r.max);
      }
      break;
    }
    case OpKind::avgpool2d:
    case OpKind::maxpool2d: out = pool(n, x, os); break;
    case OpKind::reshape:
    case OpKind::flatten: out = x.data; break;
    case OpKind::pad:
    case OpKind::slice: out = resize(x, os); break;
  }
  return from_canonical(out_spec, out);
}

TensorMap interpret_all(const Graph& g, const TensorMap& inputs) {
  auto specs = infer_specs(g);
  TensorMap vals;
  for (auto& t : g.inputs) {
    auto it = inputs.find(t.name);
    if (it == inputs.end()) throw Error("missing input '" + t.name + "'");
    if (static_cast<int64_t>(it->second.size()) != t.numel())
      throw Error("input '" + t.name + "' has " + std::to_string(it->second.size()) + " values, expected " +
                  std::to_string(t.numel()));
    for (auto v : it->second)
      if (v < dtype_min(t.dtype) || v > dtype_max(t.dtype))
        throw Error("input '" + t.name + "' holds a value outside its dtype range");
    vals[t.name] = it->second;
  }
  for (auto& [name, c] : g.constants) vals[name] = c.data;
  for (auto& n : g.nodes) {
    std::vector<const TensorSpec*> in_specs;
    std::vector<const std::vector<int64_t>*> in_data;
    for (auto& r : n.inputs) {
      in_specs.push_back(&specs.at(r));
      in_data.push_back(&vals.at(r));
    }
    vals[n.id] = eval_node(n, in_specs, in_data, specs.at(n.id));
  }
  return vals;
}

TensorMap interpret_graph(const Graph& g, const TensorMap& inputs) {
  TensorMap all = interpret_all(g, inputs);
  TensorMap out;
  for (auto& o : g.outputs) out[o] = all.at(o);
  return out;
}

}  // namespace hetcc
