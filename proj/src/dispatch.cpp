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

#include "hetcc/dispatch.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hetcc/layout.hpp"
#include "hetcc/passes.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

namespace {

DispatchDecision fallback_decision(const std::string& id) {
  DispatchDecision d;
  d.node_ids = {id};
  d.anchor = id;
  return d;
}

bool name_taken(const Graph& g, const std::string& n) {
  return g.find_node(n) || g.is_constant(n) || g.find_input(n);
}

std::string fresh_name(const Graph& g, const std::string& base) {
  if (!name_taken(g, base)) return base;
  for (int i = 1;; ++i) {
    std::string n = base + std::to_string(i);
    if (!name_taken(g, n)) return n;
  }
}

// Zero-extends a canonical payload at the end of every axis.
std::vector<int64_t> grow(const std::vector<int64_t>& data, const std::vector<int64_t>& from,
                          const std::vector<int64_t>& to) {
  int64_t total = 1;
  for (auto v : to) total *= v;
  std::vector<int64_t> out(total, 0);
  const size_t r = to.size();
  std::vector<int64_t> i(r, 0);
  for (int64_t src = 0; src < static_cast<int64_t>(data.size()); ++src) {
    int64_t dst = 0;
    for (size_t d = 0; d < r; ++d) dst = dst * to[d] + i[d];
    out[dst] = data[src];
    for (size_t d = r; d-- > 0;) {
      if (++i[d] < from[d]) break;
      i[d] = 0;
    }
  }
  return out;
}

struct RegionEdit {
  std::vector<std::string> before, after;  // inserted node ids
};

RegionEdit transform_region(Graph& g, std::vector<std::string>& ids, const Workload& w, const ExecModule& m) {
  RegionEdit e;
  if (w.kind == KernelKind::add) return e;
  auto specs = infer_specs(g);
  auto dim = [&](Dim d) { return w.dims[idx(d)]; };
  auto pad = [&](Dim d) { return w.adapted[idx(d)]; };
  const int64_t K = dim(Dim::K), Kp = pad(Dim::K), C = dim(Dim::C), Cp = pad(Dim::C);
  const bool padK = Kp > K, padC = Cp > C;
  const bool padOY = pad(Dim::OY) > dim(Dim::OY), padOX = pad(Dim::OX) > dim(Dim::OX);
  const bool dw = w.kind == KernelKind::depthwise;
  const bool filt = w.kind != KernelKind::dense;

  Node* a = g.find_node(ids[0]);
  const std::string x = a->inputs[0];
  const bool pad_input = dw ? padK : padC;

  // Filter: pad and re-block.
  const Constant& wc = g.constants.at(a->inputs[1]);
  Layout wl = wc.spec.layout;
  if (filt && !m.transforms.weight_layout.empty()) wl = Layout::custom_layout(m.transforms.weight_layout);
  if (padK || padC || wl != wc.spec.layout) {
    auto cshape = canonical_shape(wc.spec);
    auto nshape = cshape;
    nshape[0] = Kp;
    if (!dw) nshape[1] = Cp;
    Constant nc;
    nc.spec = wc.spec;
    nc.spec.name = fresh_name(g, a->id + "__w");
    nc.spec.layout = wl;
    nc.spec.shape = wl.kind == Layout::Kind::Custom ? nshape : physical_shape(nshape, wl);
    nc.data = from_canonical(nc.spec, grow(to_canonical(wc.spec, wc.data), cshape, nshape));
    a->inputs[1] = nc.spec.name;
    g.constants[nc.spec.name] = std::move(nc);
  }

  if (filt) {
    ConvAttrs ca = conv_attrs(*a);
    if (dw && padK) ca.groups = Kp;
    if (padOY) ca.pad_bottom = (pad(Dim::OY) - 1) * ca.sy + ca.dy * (dim(Dim::FY) - 1) + 1 - w.IY - ca.pad_top;
    if (padOX) ca.pad_right = (pad(Dim::OX) - 1) * ca.sx + ca.dx * (dim(Dim::FX) - 1) + 1 - w.IX - ca.pad_left;
    set_conv_attrs(*a, ca);
  }

  if (padK)
    for (size_t i = 1; i < ids.size(); ++i) {
      Node* n = g.find_node(ids[i]);
      if (n->op == OpKind::bias_add) {
        const Constant& b = g.constants.at(n->inputs[1]);
        Constant nb = b;
        nb.spec.name = fresh_name(g, n->id + "__b");
        nb.spec.shape = {Kp};
        nb.data = grow(b.data, {K}, {Kp});
        n->inputs[1] = nb.spec.name;
        g.constants[nb.spec.name] = std::move(nb);
      } else if (n->op == OpKind::requant) {
        RequantAttrs r = requant_attrs(*n);
        if (r.M.size() > 1) r.M.resize(Kp, 0);
        if (r.B.size() > 1) r.B.resize(Kp, 0);
        set_requant_attrs(*n, r);
      }
    }

  if (padK || padOY || padOX) {
    const std::string orig = ids.back();
    auto out_shape = canonical_shape(specs.at(orig));
    std::string renamed = fresh_name(g, orig + "__padded");
    int pos = g.node_index(orig);
    g.nodes[pos].id = renamed;
    ids.back() = renamed;
    Node s;
    s.id = orig;
    s.op = OpKind::slice;
    s.attrs["shape"] = out_shape;
    s.inputs = {renamed};
    g.nodes.insert(g.nodes.begin() + pos + 1, std::move(s));
    e.after.push_back(orig);
  }

  if (pad_input) {
    auto cs = canonical_shape(specs.at(x));
    cs[1] = dw ? Kp : Cp;
    Node p;
    p.id = fresh_name(g, ids[0] + "__pad_in");
    p.op = OpKind::pad;
    p.attrs["shape"] = cs;
    p.inputs = {x};
    int pos = g.node_index(ids[0]);
    g.nodes[pos].inputs[0] = p.id;
    e.before.push_back(p.id);
    g.nodes.insert(g.nodes.begin() + pos, std::move(p));
  }
  return e;
}

}  // namespace

void check_coverage(const PartitionedGraph& pg) {
  std::map<std::string, int> seen;
  for (auto& d : pg.decisions) {
    if (d.node_ids.empty()) throw InternalError("empty dispatch decision");
    for (auto& id : d.node_ids) {
      if (!pg.graph.find_node(id)) throw InternalError("decision names unknown node '" + id + "'");
      if (++seen[id] > 1) throw InternalError("node '" + id + "' appears in two decisions");
    }
  }
  for (auto& n : pg.graph.nodes)
    if (!seen.count(n.id)) throw InternalError("node '" + n.id + "' is not covered by any decision");
}

PartitionedGraph partition_graph(const Graph& g, std::vector<DispatchDecision> decisions) {
  PartitionedGraph pg{g, std::move(decisions)};
  check_coverage(pg);
  std::stable_sort(pg.decisions.begin(), pg.decisions.end(), [&](const auto& a, const auto& b) {
    return g.node_index(a.node_ids[0]) < g.node_index(b.node_ids[0]);
  });
  return pg;
}

PartitionedGraph dispatch(const Graph& g, const TargetModel& t, const SearchLimits& limits) {
  auto cands = match_candidates(g, t);
  std::map<std::vector<std::string>, std::vector<const MatchCandidate*>> groups;
  for (auto& c : cands) groups[c.node_ids].push_back(&c);

  std::vector<DispatchDecision> chosen;
  for (auto& [ids, cs] : groups) {
    std::stable_sort(cs.begin(), cs.end(), [&](auto* a, auto* b) {
      return t.module_index(a->module) < t.module_index(b->module);
    });
    DispatchDecision best;
    std::vector<ModuleCost> alts;
    for (auto* c : cs) {
      const ExecModule& m = *t.find(c->module);
      Workload w = extract_workload(*c, g, m);
      auto r = search_best(w, m, limits);
      alts.push_back({m.name, r.has_value(), r ? r->cost.total : 0});
      if (!r || (best.assigned && r->cost.total >= best.cost.total)) continue;
      best.node_ids = ids;
      best.assigned = true;
      best.module = m.name;
      best.module_index = t.module_index(m.name);
      best.pattern = c->pattern;
      best.anchor = c->anchor;
      best.workload = w;
      best.schedule = r->schedule;
      best.cost = r->cost;
      best.search_used = r->used;
    }
    if (!best.assigned) continue;
    best.alternatives = std::move(alts);
    chosen.push_back(std::move(best));
  }

  std::stable_sort(chosen.begin(), chosen.end(), [&](const auto& a, const auto& b) {
    int ia = g.node_index(a.anchor), ib = g.node_index(b.anchor);
    if (ia != ib) return ia < ib;
    return a.node_ids.size() > b.node_ids.size();
  });
  std::set<std::string> taken;
  std::vector<DispatchDecision> decisions;
  for (auto& d : chosen) {
    if (std::any_of(d.node_ids.begin(), d.node_ids.end(), [&](auto& id) { return taken.count(id); })) continue;
    taken.insert(d.node_ids.begin(), d.node_ids.end());
    decisions.push_back(std::move(d));
  }
  for (auto& n : g.nodes)
    if (!taken.count(n.id)) decisions.push_back(fallback_decision(n.id));
  return partition_graph(g, std::move(decisions));
}

PartitionedGraph materialize(const PartitionedGraph& pg, const TargetModel& t) {
  Graph g = pg.graph;
  std::vector<DispatchDecision> out;
  for (const auto& src : pg.decisions) {
    DispatchDecision d = src;
    if (!d.assigned) {
      out.push_back(std::move(d));
      continue;
    }
    RegionEdit e = transform_region(g, d.node_ids, d.workload, *t.find(d.module));
    d.anchor = d.node_ids[0];
    for (auto& id : e.before) out.push_back(fallback_decision(id));
    out.push_back(std::move(d));
    for (auto& id : e.after) out.push_back(fallback_decision(id));
  }
  prune_constants(g);
  infer_specs(g);
  for (auto& d : out) {
    if (!d.assigned) continue;
    const ExecModule& m = *t.find(d.module);
    Workload w = extract_workload(MatchCandidate{d.pattern, d.module, d.node_ids, d.anchor}, g, m);
    HETCC_CHECK(w.adapted == d.workload.adapted && w.spatial == d.workload.spatial,
                "materialized region '" + d.anchor + "' changed its loop extents");
    HETCC_CHECK(evaluate_schedule(d.schedule, w, m).total == d.cost.total,
                "materialized region '" + d.anchor + "' changed its predicted cost");
    d.workload = w;
  }
  return partition_graph(g, std::move(out));
}

Graph apply_module_transforms(const Graph& g, const ExecModule& m) {
  if (!m.transforms.weight_layout.empty() && !is_known_custom_layout(m.transforms.weight_layout))
    throw ConfigError("module '" + m.name + "': unknown custom weight layout '" + m.transforms.weight_layout + "'");
  TargetModel t;
  t.name = m.name;
  t.modules = {m};
  auto cands = match_candidates(g, t);
  std::stable_sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
    int ia = g.node_index(a.anchor), ib = g.node_index(b.anchor);
    if (ia != ib) return ia < ib;
    return a.node_ids.size() > b.node_ids.size();
  });
  Graph out = g;
  std::set<std::string> taken;
  for (auto& c : cands) {
    if (std::any_of(c.node_ids.begin(), c.node_ids.end(), [&](auto& id) { return taken.count(id); })) continue;
    taken.insert(c.node_ids.begin(), c.node_ids.end());
    Workload w = extract_workload(c, out, m);
    auto ids = c.node_ids;
    transform_region(out, ids, w, m);
  }
  prune_constants(out);
  return out;
}

json dispatch_report(const PartitionedGraph& pg, const TargetModel& t) {
  json arr = json::array();
  for (auto& d : pg.decisions) {
    json j;
    j["nodes"] = d.node_ids;
    j["module"] = d.assigned ? d.module : "fallback";
    if (d.assigned) {
      j["pattern"] = d.pattern;
      j["predicted_cycles"] = d.cost.total;
      j["schedule"] = schedule_digest(d.schedule, *t.find(d.module));
      j["search"] = d.search_used == SearchMode::exhaustive ? "exhaustive" : "genetic";
      json alts = json::array();
      for (auto& a : d.alternatives) {
        json aj = {{"module", a.module}, {"feasible", a.feasible}};
        if (a.feasible) aj["predicted_cycles"] = a.total;
        alts.push_back(aj);
      }
      j["alternatives"] = alts;
    } else {
      j["predicted_cycles"] = 0;
      j["unmodeled"] = true;
    }
    arr.push_back(j);
  }
  return arr;
}

}  // namespace hetcc
