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

#include <algorithm>

#include "hetcc/codegen.hpp"

namespace hetcc {

namespace {

using K = PlanNode::Kind;

PlanNode leaf(K kind, Operand o = Operand::I) {
  PlanNode n;
  n.kind = kind;
  n.operand = o;
  return n;
}

// Contents of the body of loop `p` (the layer root when p == n).
std::vector<PlanNode> body_at(const LayerPlan& lp, int p) {
  const int n = static_cast<int>(lp.temporal.size());
  std::vector<PlanNode> out;
  auto at = [&](Operand o) { return lp.cut[idx(o)] == p; };
  auto dbl = [&](Operand o) { return lp.buffering[idx(o)] == Buffering::dbl; };
  bool wait = false;
  for (Operand o : {Operand::I, Operand::W})
    if (at(o)) {
      out.push_back(leaf(dbl(o) ? K::prologue : K::load, o));
      wait = true;
    }
  if (at(Operand::O) && dbl(Operand::O)) wait = true;
  if (wait) out.push_back(leaf(K::wait));
  for (Operand o : {Operand::I, Operand::W})
    if (at(o) && dbl(o)) out.push_back(leaf(K::prefetch, o));
  if (p == lp.kernel_cut) {
    out.push_back(leaf(K::kernel));
    out.push_back(leaf(K::sync_compute));
  } else {
    PlanNode loop = leaf(K::loop);
    loop.pos = p - 1;
    loop.body = body_at(lp, p - 1);
    out.push_back(std::move(loop));
  }
  if (at(Operand::O)) {
    out.push_back(leaf(K::store, Operand::O));
    if (!dbl(Operand::O)) out.push_back(leaf(K::wait));
  }
  if (p == n && dbl(Operand::O)) out.push_back(leaf(K::wait));
  return out;
}

struct Exec {
  const LayerPlan& lp;
  std::vector<int64_t> it;
  PlanEvents ev;

  int64_t linear(int from) const {
    int64_t t = 0;
    for (int q = static_cast<int>(it.size()) - 1; q >= from; --q) t = t * lp.temporal[q].factor + it[q];
    return t;
  }
  int64_t count(int from) const {
    int64_t c = 1;
    for (size_t q = from; q < it.size(); ++q) c *= lp.temporal[q].factor;
    return c;
  }

  void run(const std::vector<PlanNode>& body) {
    for (auto& s : body) {
      switch (s.kind) {
        case K::loop:
          for (it[s.pos] = 0; it[s.pos] < lp.temporal[s.pos].factor; ++it[s.pos]) run(s.body);
          it[s.pos] = 0;
          break;
        case K::load:
        case K::store: ++ev.transfers[idx(s.operand)]; break;
        case K::prologue:
          if (linear(lp.cut[idx(s.operand)]) == 0) ++ev.transfers[idx(s.operand)];
          break;
        case K::prefetch: {
          int c = lp.cut[idx(s.operand)];
          if (linear(c) + 1 < count(c)) ++ev.transfers[idx(s.operand)];
          break;
        }
        case K::wait: ++ev.waits; break;
        case K::kernel: ++ev.kernel_calls; break;
        case K::sync_compute: ++ev.compute_syncs; break;
      }
    }
  }
};

}  // namespace

LayerPlan plan_layer(const Schedule& s, const Workload& w, const ExecModule& m) {
  LayerPlan lp;
  lp.temporal = s.temporal;
  const int n = static_cast<int>(s.temporal.size());
  lp.kernel_cut = n;
  for (Operand o : kAllOperands) {
    if (m.chain(o).size() != 2 || s.cuts[idx(o)].size() != 1)
      throw ConfigError("module '" + m.name + "': code generation supports one L1 level below the top for operand " +
                        std::string(1, operand_char(o)));
    lp.cut[idx(o)] = s.cuts[idx(o)][0];
    lp.buffering[idx(o)] = s.buffering[idx(o)][0];
    lp.kernel_cut = std::min(lp.kernel_cut, lp.cut[idx(o)]);
  }
  check_schedule(s, w, m);
  lp.kernel_tile = s.spatial;
  for (int q = 0; q < lp.kernel_cut; ++q) lp.kernel_tile[idx(s.temporal[q].dim)] *= s.temporal[q].factor;
  lp.body = body_at(lp, n);
  return lp;
}

PlanEvents execute_plan(const LayerPlan& p) {
  Exec e{p, std::vector<int64_t>(p.temporal.size(), 0), {}};
  e.run(p.body);
  return e.ev;
}

}  // namespace hetcc
