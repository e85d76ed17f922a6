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

#include "hetcc/match.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

namespace {

using SpecMap = std::map<std::string, TensorSpec>;

std::optional<KernelKind> kind_of(const Graph& g, const Node& a, const SpecMap& specs) {
  switch (a.op) {
    case OpKind::conv2d: {
      const auto& x = specs.at(a.inputs[0]);
      if (x.shape[0] != 1 || !g.is_constant(a.inputs[1])) return std::nullopt;
      auto attrs = conv_attrs(a);
      auto xc = canonical_shape(x);
      auto wc = canonical_shape(specs.at(a.inputs[1]));
      if (attrs.groups == 1) return KernelKind::conv;
      if (attrs.groups == xc[1] && wc[0] == xc[1]) return KernelKind::depthwise;
      return std::nullopt;
    }
    case OpKind::dense:
      if (specs.at(a.inputs[0]).shape[0] != 1 || !g.is_constant(a.inputs[1])) return std::nullopt;
      return KernelKind::dense;
    case OpKind::add: {
      const auto& x = specs.at(a.inputs[0]);
      const auto& y = specs.at(a.inputs[1]);
      if (g.is_constant(a.inputs[0]) || g.is_constant(a.inputs[1])) return std::nullopt;
      if (x.shape != y.shape || x.layout != y.layout || x.shape.size() != 4 || x.shape[0] != 1) return std::nullopt;
      if (x.dtype != y.dtype) return std::nullopt;
      return KernelKind::add;
    }
    default: return std::nullopt;
  }
}

std::map<std::string, std::string> facts_of(const Graph& g, const Node& a, const SpecMap& specs) {
  std::map<std::string, std::string> f;
  auto num = [&](const char* k, int64_t v) { f[k] = std::to_string(v); };
  f["op"] = std::string(op_name(a.op));
  auto kind = kind_of(g, a, specs);
  const auto& x = specs.at(a.inputs[0]);
  f["dtype"] = std::string(dtype_name(x.dtype));
  f["layout"] = x.layout.kind == Layout::Kind::None ? "none" : x.layout.str();
  for (auto k : {"FX", "FY", "SX", "SY", "DX", "DY", "groups"}) num(k, 1);
  if (a.op == OpKind::conv2d) {
    auto c = conv_attrs(a);
    auto wc = canonical_shape(specs.at(a.inputs[1]));
    auto xc = canonical_shape(x);
    num("FY", wc[2]);
    num("FX", wc[3]);
    num("SY", c.sy);
    num("SX", c.sx);
    num("DY", c.dy);
    num("DX", c.dx);
    num("groups", c.groups);
    num("C", xc[1]);
    num("K", wc[0]);
    f["kind"] = kind ? std::string(kernel_kind_name(*kind)) : "grouped";
  } else if (a.op == OpKind::dense) {
    num("C", x.shape[1]);
    num("K", specs.at(a.inputs[1]).shape[0]);
    f["kind"] = kind ? "dense" : "unsupported";
  } else {
    auto xc = canonical_shape(x);
    num("C", xc.size() >= 2 ? xc[1] : xc[0]);
    num("K", xc.size() >= 2 ? xc[1] : xc[0]);
    if (a.op == OpKind::avgpool2d || a.op == OpKind::maxpool2d) {
      auto p = pool_attrs(a);
      num("FY", p.ky);
      num("FX", p.kx);
      num("SY", p.sy);
      num("SX", p.sx);
      f["kind"] = "pool";
    } else {
      f["kind"] = kind ? std::string(kernel_kind_name(*kind)) : "elementwise";
    }
  }
  return f;
}

std::optional<int64_t> as_int(const std::string& s) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Tail node `n` may follow `prev` in a fused chain.
bool links(const Graph& g, const Node& prev, const Node& n, const SpecMap& specs) {
  if (g.is_output(prev.id)) return false;
  auto cons = g.consumers(prev.id);
  if (cons.size() != 1 || cons[0] != n.id) return false;
  if (n.inputs.empty() || n.inputs[0] != prev.id) return false;
  for (size_t i = 1; i < n.inputs.size(); ++i)
    if (!g.is_constant(n.inputs[i]) || n.inputs[i] == prev.id) return false;
  if (n.op == OpKind::bias_add) {
    const auto& s = specs.at(prev.id);
    auto cs = canonical_shape(s);
    if (g.constants.at(n.inputs[1]).spec.shape != std::vector<int64_t>{cs[1]}) return false;
  }
  return true;
}

std::vector<std::vector<std::string>> match_with(const Graph& g, const PatternSpec& p, const Node& anchor,
                                                 const SpecMap& specs) {
  std::vector<std::vector<std::string>> out;
  if (p.steps.empty() || anchor.op != p.steps[0].op) return out;
  std::vector<std::string> cur{anchor.id};
  // Depth-first over optional steps.
  auto rec = [&](auto&& self, size_t step, const Node* last) -> void {
    if (step == p.steps.size()) {
      out.push_back(cur);
      return;
    }
    const PatternStep& s = p.steps[step];
    auto cons = g.consumers(last->id);
    if (cons.size() == 1) {
      const Node* nx = g.find_node(cons[0]);
      if (nx->op == s.op && links(g, *last, *nx, specs)) {
        cur.push_back(nx->id);
        self(self, step + 1, nx);
        cur.pop_back();
      }
    }
    if (s.optional) self(self, step + 1, last);
  };
  rec(rec, 1, &anchor);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const PatternSpec* find_pattern(const ExecModule& m, const std::string& name) {
  for (auto& p : m.patterns)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace

std::optional<KernelKind> anchor_kind(const Graph& g, const Node& anchor) {
  return kind_of(g, anchor, infer_specs(g));
}

std::map<std::string, std::string> anchor_facts(const Graph& g, const Node& anchor) {
  return facts_of(g, anchor, infer_specs(g));
}

bool eval_constraint(const Constraint& c, const std::map<std::string, std::string>& facts) {
  auto lhs_it = facts.find(c.var);
  if (lhs_it == facts.end()) return false;
  const std::string& lhs = lhs_it->second;
  auto value = [&](const std::string& tok) {
    auto it = facts.find(tok);
    return it != facts.end() ? it->second : tok;
  };
  auto equal = [&](const std::string& tok) {
    std::string r = value(tok);
    auto a = as_int(lhs), b = as_int(r);
    if (a && b) return *a == *b;
    return lhs == r;
  };
  if (c.op == Constraint::Op::in) return std::any_of(c.values.begin(), c.values.end(), equal);
  if (c.op == Constraint::Op::eq) return equal(c.values[0]);
  if (c.op == Constraint::Op::ne) return !equal(c.values[0]);
  auto a = as_int(lhs), b = as_int(value(c.values[0]));
  if (!a || !b) return false;
  switch (c.op) {
    case Constraint::Op::le: return *a <= *b;
    case Constraint::Op::ge: return *a >= *b;
    case Constraint::Op::lt: return *a < *b;
    case Constraint::Op::gt: return *a > *b;
    default: return false;
  }
}

namespace {

bool check_with(const MatchCandidate& c, const Graph& g, const TargetModel& t, const SpecMap& specs) {
  const ExecModule* m = t.find(c.module);
  if (!m) return false;
  const PatternSpec* p = find_pattern(*m, c.pattern);
  if (!p) return false;
  const Node* a = g.find_node(c.anchor);
  if (!a) return false;
  auto facts = facts_of(g, *a, specs);
  for (auto& k : p->constraints)
    if (!eval_constraint(k, facts)) return false;
  // Tail dtypes: a requant must see an i32 accumulator, i8 elsewhere.
  for (auto& id : c.node_ids) {
    const Node* n = g.find_node(id);
    if (n->op == OpKind::requant && specs.at(n->inputs[0]).dtype != DType::i32) return false;
  }
  return true;
}

}  // namespace

bool check_constraints(const MatchCandidate& c, const Graph& g, const TargetModel& t) {
  return check_with(c, g, t, infer_specs(g));
}

std::vector<std::vector<std::string>> match_at(const Graph& g, const PatternSpec& p, const Node& anchor) {
  return match_with(g, p, anchor, infer_specs(g));
}

std::vector<MatchCandidate> match_candidates(const Graph& g, const TargetModel& t) {
  auto specs = infer_specs(g);
  std::vector<MatchCandidate> all;
  for (auto& node : g.nodes)
    for (auto& m : t.modules)
      for (auto& p : m.patterns)
        for (auto& ids : match_with(g, p, node, specs)) {
          MatchCandidate c{p.name, m.name, ids, node.id};
          if (check_with(c, g, t, specs)) all.push_back(std::move(c));
        }
  std::vector<std::set<std::string>> sets;
  for (auto& c : all) sets.emplace_back(c.node_ids.begin(), c.node_ids.end());
  std::vector<MatchCandidate> out;
  for (size_t i = 0; i < all.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < all.size() && !dominated; ++j)
      dominated = sets[j].size() > sets[i].size() &&
                  std::includes(sets[j].begin(), sets[j].end(), sets[i].begin(), sets[i].end());
    if (!dominated) out.push_back(all[i]);
  }
  return out;
}

}  // namespace hetcc
