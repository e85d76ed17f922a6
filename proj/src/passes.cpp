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

#include "hetcc/passes.hpp"

#include <algorithm>
#include <set>

#include "hetcc/interpreter.hpp"
#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

void prune_constants(Graph& g) {
  std::set<std::string> used(g.outputs.begin(), g.outputs.end());
  for (auto& n : g.nodes) used.insert(n.inputs.begin(), n.inputs.end());
  std::erase_if(g.constants, [&](const auto& kv) { return !used.count(kv.first); });
}

Graph fold_constants_and_dce(const Graph& g) {
  Graph out = g;
  auto specs = infer_specs(g);
  std::vector<Node> kept;
  for (auto& n : g.nodes) {
    bool all_const = !n.inputs.empty() && std::all_of(n.inputs.begin(), n.inputs.end(),
                                                      [&](const std::string& r) { return out.is_constant(r); });
    if (!all_const) {
      kept.push_back(n);
      continue;
    }
    std::vector<const TensorSpec*> in_specs;
    std::vector<const std::vector<int64_t>*> in_data;
    for (auto& r : n.inputs) {
      in_specs.push_back(&out.constants.at(r).spec);
      in_data.push_back(&out.constants.at(r).data);
    }
    Constant c;
    c.spec = specs.at(n.id);
    c.data = eval_node(n, in_specs, in_data, c.spec);
    // A folded 4-D value that is not a filter keeps its activation layout;
    // constants must carry some layout, and activation ones are legal.
    out.constants[n.id] = std::move(c);
  }
  out.nodes.clear();

  std::set<std::string> live(g.outputs.begin(), g.outputs.end());
  for (auto it = kept.rbegin(); it != kept.rend(); ++it)
    if (live.count(it->id)) live.insert(it->inputs.begin(), it->inputs.end());
  for (auto& n : kept)
    if (live.count(n.id)) out.nodes.push_back(n);
  prune_constants(out);
  return out;
}

// ---------------------------------------------------------------------------
// Interval analysis.

namespace {

using i128 = __int128;

constexpr int64_t kI32Min = -(int64_t{1} << 31);
constexpr int64_t kI32Max = (int64_t{1} << 31) - 1;

struct R128 {
  i128 lo, hi;
};

Range fit(R128 r, DType dt) {
  if (r.lo < dtype_min(dt) || r.hi > dtype_max(dt)) return {dtype_min(dt), dtype_max(dt)};
  return {static_cast<int64_t>(r.lo), static_cast<int64_t>(r.hi)};
}

R128 hull(std::initializer_list<i128> v) { return {std::min(v), std::max(v)}; }

Range data_range(const std::vector<int64_t>& d) {
  auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  return {*lo, *hi};
}

// Range of sum_j x*w_j over the rows of a reduction, 0 always admissible
// per term (padding).
R128 reduction_range(Range x, const std::vector<int64_t>& w, int64_t rows) {
  int64_t per = static_cast<int64_t>(w.size()) / rows;
  R128 total{0, 0};
  bool first = true;
  for (int64_t k = 0; k < rows; ++k) {
    i128 lo = 0, hi = 0;
    for (int64_t j = 0; j < per; ++j) {
      i128 a = static_cast<i128>(x.lo) * w[k * per + j], b = static_cast<i128>(x.hi) * w[k * per + j];
      lo += std::min<i128>({a, b, 0});
      hi += std::max<i128>({a, b, 0});
    }
    total = first ? R128{lo, hi} : R128{std::min(total.lo, lo), std::max(total.hi, hi)};
    first = false;
  }
  return total;
}

}  // namespace

std::map<std::string, Range> value_ranges(const Graph& g) {
  auto specs = infer_specs(g);
  std::map<std::string, Range> r;
  for (auto& t : g.inputs) r[t.name] = {dtype_min(t.dtype), dtype_max(t.dtype)};
  for (auto& [name, c] : g.constants) r[name] = data_range(c.data);
  for (auto& n : g.nodes) {
    const TensorSpec& os = specs.at(n.id);
    Range x = r.at(n.inputs[0]);
    Range full{dtype_min(os.dtype), dtype_max(os.dtype)};
    Range out = full;
    switch (n.op) {
      case OpKind::conv2d:
      case OpKind::dense: {
        const std::string& wname = n.inputs[1];
        if (g.is_constant(wname)) {
          const auto& w = g.constants.at(wname);
          auto wc = to_canonical(w.spec, w.data);
          out = fit(reduction_range(x, wc, canonical_shape(w.spec)[0]), os.dtype);
        }
        break;
      }
      case OpKind::add:
      case OpKind::bias_add: {
        Range b = r.at(n.inputs[1]);
        out = fit({static_cast<i128>(x.lo) + b.lo, static_cast<i128>(x.hi) + b.hi}, os.dtype);
        break;
      }
      case OpKind::mul: {
        Range b = r.at(n.inputs[1]);
        i128 a0 = x.lo, a1 = x.hi;
        out = fit(hull({a0 * b.lo, a0 * b.hi, a1 * b.lo, a1 * b.hi}), os.dtype);
        break;
      }
      case OpKind::div: {
        Range b = r.at(n.inputs[1]);
        if (b.lo > 0 || b.hi < 0) {
          // Truncating division is monotone in x for a fixed divisor sign and
          // extreme at divisor endpoints of equal sign.
          out = fit(hull({x.lo / b.lo, x.lo / b.hi, x.hi / b.lo, x.hi / b.hi}), os.dtype);
        }
        break;
      }
      case OpKind::right_shift: {
        Range b = r.at(n.inputs[1]);
        if (b.lo >= 0 && b.hi <= 31)
          out = fit(hull({x.lo >> b.lo, x.lo >> b.hi, x.hi >> b.lo, x.hi >> b.hi}), os.dtype);
        break;
      }
      case OpKind::relu: out = {std::max<int64_t>(x.lo, 0), std::max<int64_t>(x.hi, 0)}; break;
      case OpKind::clip: {
        auto c = clip_attrs(n);
        out = {std::clamp(x.lo, c.min, c.max), std::clamp(x.hi, c.min, c.max)};
        break;
      }
      case OpKind::cast: out = fit({x.lo, x.hi}, os.dtype); break;
      case OpKind::requant: {
        auto q = requant_attrs(n);
        int64_t lo = q.max, hi = q.min;
        for (size_t i = 0; i < std::max(q.M.size(), q.B.size()); ++i) {
          int64_t m = q.M.size() == 1 ? q.M[0] : q.M[i], b = q.B.size() == 1 ? q.B[0] : q.B[i];
          for (int64_t v : {x.lo, x.hi}) {
            int64_t y = requant_value(v, m, b, q.S, q.min, q.max);
            lo = std::min(lo, y);
            hi = std::max(hi, y);
          }
        }
        out = {lo, hi};
        break;
      }
      case OpKind::avgpool2d:
      case OpKind::maxpool2d:
      case OpKind::pad: out = {std::min<int64_t>(x.lo, 0), std::max<int64_t>(x.hi, 0)}; break;
      case OpKind::reshape:
      case OpKind::flatten:
      case OpKind::slice: out = x; break;
    }
    if (n.op == OpKind::maxpool2d || n.op == OpKind::avgpool2d) {
      auto p = pool_attrs(n);
      if (p.pad_top == 0 && p.pad_left == 0 && p.pad_bottom == 0 && p.pad_right == 0) out = x;
    }
    r[n.id] = out;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Requant rewrite.

namespace {

struct Chain {
  const Node *mul, *add, *div, *clip, *cast;
  std::string x;
  std::string m, b, d;
};

// Returns the other (non-constant) input of a binary node whose second or
// first input is a constant; for non-commutative ops the constant must be
// the second operand.
bool split_const(const Graph& g, const Node& n, bool commutative, std::string& var, std::string& cst) {
  if (n.inputs.size() != 2) return false;
  if (g.is_constant(n.inputs[1]) && !g.is_constant(n.inputs[0])) {
    var = n.inputs[0];
    cst = n.inputs[1];
    return true;
  }
  if (commutative && g.is_constant(n.inputs[0]) && !g.is_constant(n.inputs[1])) {
    var = n.inputs[1];
    cst = n.inputs[0];
    return true;
  }
  return false;
}

const Node* sole_consumer(const Graph& g, const Node& n) {
  if (g.is_output(n.id)) return nullptr;
  auto c = g.consumers(n.id);
  if (c.size() != 1) return nullptr;
  const Node* next = g.find_node(c[0]);
  if (std::count(next->inputs.begin(), next->inputs.end(), n.id) != 1) return nullptr;
  return next;
}

bool scalar_or_channel(const Constant& c, int64_t channels) {
  return c.spec.shape.size() == 1 && (c.spec.shape[0] == 1 || c.spec.shape[0] == channels);
}

std::optional<Chain> match_chain(const Graph& g, const Node& mul, const std::map<std::string, TensorSpec>& specs) {
  if (mul.op != OpKind::mul) return std::nullopt;
  Chain ch{};
  ch.mul = &mul;
  std::string v;
  if (!split_const(g, mul, true, ch.x, ch.m)) return std::nullopt;
  ch.add = sole_consumer(g, mul);
  if (!ch.add || ch.add->op != OpKind::add || !split_const(g, *ch.add, true, v, ch.b) || v != mul.id)
    return std::nullopt;
  ch.div = sole_consumer(g, *ch.add);
  if (!ch.div || ch.div->op != OpKind::div || !split_const(g, *ch.div, false, v, ch.d) || v != ch.add->id)
    return std::nullopt;
  ch.clip = sole_consumer(g, *ch.div);
  if (!ch.clip || ch.clip->op != OpKind::clip) return std::nullopt;
  ch.cast = sole_consumer(g, *ch.clip);
  if (!ch.cast || ch.cast->op != OpKind::cast || specs.at(ch.cast->id).dtype != DType::i8) return std::nullopt;

  const TensorSpec& xs = specs.at(ch.x);
  int64_t channels = xs.shape.size() >= 2 ? canonical_shape(xs)[1] : xs.shape[0];
  for (auto* name : {&ch.m, &ch.b, &ch.d})
    if (!scalar_or_channel(g.constants.at(*name), channels)) return std::nullopt;
  return ch;
}

}  // namespace

Graph rewrite_requant(const Graph& g, bool strict) {
  Graph out = g;
  auto specs = infer_specs(g);
  std::map<std::string, Range> ranges;
  if (strict) ranges = value_ranges(g);

  std::map<std::string, Node> replace;  // cast id -> requant node
  std::set<std::string> drop;
  for (auto& n : g.nodes) {
    auto ch = match_chain(g, n, specs);
    if (!ch) continue;
    const auto& D = g.constants.at(ch->d).data;
    int64_t d0 = D[0];
    if (d0 <= 0 || (d0 & (d0 - 1)) != 0 || !std::all_of(D.begin(), D.end(), [&](int64_t v) { return v == d0; }))
      continue;
    int64_t S = std::countr_zero(static_cast<uint64_t>(d0));
    if (S > 31) continue;
    auto c = clip_attrs(*ch->clip);
    if (c.min < -128 || c.max > 127) continue;

    RequantAttrs q;
    q.M = g.constants.at(ch->m).data;
    q.B = g.constants.at(ch->b).data;
    q.S = S;
    q.min = c.min;
    q.max = c.max;

    if (strict) {
      Range x = ranges.at(ch->x);
      bool exact = true;
      for (size_t i = 0; exact && i < std::max(q.M.size(), q.B.size()); ++i) {
        i128 m = q.M.size() == 1 ? q.M[0] : q.M[i], b = q.B.size() == 1 ? q.B[0] : q.B[i];
        R128 p = hull({x.lo * m, x.hi * m});
        R128 s{p.lo + b, p.hi + b};
        if (p.lo < kI32Min || p.hi > kI32Max || s.lo < kI32Min || s.hi > kI32Max) exact = false;
        if (s.lo < 0 && c.min < 0 && S > 0) exact = false;
      }
      if (!exact) continue;
    }

    Node rq;
    rq.id = ch->cast->id;
    rq.op = OpKind::requant;
    rq.inputs = {ch->x};
    set_requant_attrs(rq, q);
    replace[rq.id] = rq;
    for (const Node* m : {ch->mul, ch->add, ch->div, ch->clip}) drop.insert(m->id);
  }

  out.nodes.clear();
  for (auto& n : g.nodes) {
    if (drop.count(n.id)) continue;
    auto it = replace.find(n.id);
    out.nodes.push_back(it != replace.end() ? it->second : n);
  }
  prune_constants(out);
  return out;
}

// ---------------------------------------------------------------------------
// Layout switch.

Graph transform_layout(const Graph& g, const Layout& target) {
  HETCC_CHECK(target.is_activation(), "layout target must be NCHW or NHWC");
  const bool nhwc = target == Layout::nhwc();
  const Layout filt = nhwc ? Layout::ohwi() : Layout::oihw();
  Graph out = g;
  for (auto& t : out.inputs) {
    if (t.shape.size() != 4) continue;
    auto cs = canonical_shape(t);
    t.layout = target;
    t.shape = physical_shape(cs, target);
  }
  for (auto& [name, c] : out.constants) {
    if (c.spec.shape.size() != 4 || c.spec.layout.kind == Layout::Kind::Custom) continue;
    auto cs = canonical_shape(c.spec);
    auto cd = to_canonical(c.spec, c.data);
    c.spec.layout = c.spec.layout.is_activation() ? target : filt;
    c.spec.shape = physical_shape(cs, c.spec.layout);
    c.data = from_canonical(c.spec, cd);
  }
  for (auto& n : out.nodes)
    if (n.op == OpKind::reshape) {
      auto it = n.attrs.find("shape");
      if (it != n.attrs.end() && it->is_array() && it->size() == 4) n.attrs["layout"] = target.str();
    }
  return out;
}

}  // namespace hetcc
