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

#include "hetcc/dse.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

namespace hetcc {

std::vector<int64_t> prime_factorize(int64_t n) {
  if (n < 1) throw InternalError("prime_factorize of " + std::to_string(n));
  std::vector<int64_t> f;
  for (int64_t p = 2; p * p <= n; ++p)
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  if (n > 1) f.push_back(n);
  return f;
}

Ordering workload_factors(const Workload& w) {
  Ordering out;
  for (Dim d : kAllDims)
    for (int64_t p : prime_factorize(w.temporal(d))) out.push_back({d, p});
  std::sort(out.begin(), out.end());
  return out;
}

uint64_t count_orderings(const Ordering& factors) {
  std::map<LoopFactor, uint64_t> mult;
  for (auto& f : factors) ++mult[f];
  // Product of binomials C(placed + m, m).
  unsigned __int128 total = 1;
  uint64_t placed = 0;
  constexpr uint64_t kMax = std::numeric_limits<uint64_t>::max();
  for (auto& [f, m] : mult) {
    unsigned __int128 c = 1;
    for (uint64_t i = 1; i <= m; ++i) {
      c = c * (placed + i) / i;
      if (c > kMax) return kMax;
    }
    placed += m;
    total *= c;
    if (total > kMax) return kMax;
  }
  return static_cast<uint64_t>(total);
}

bool for_each_ordering(Ordering factors, uint64_t cap, const std::function<bool(const Ordering&)>& visit) {
  std::sort(factors.begin(), factors.end());
  uint64_t n = 0;
  do {
    if (n == cap) return true;
    ++n;
    if (!visit(factors)) return false;
  } while (std::next_permutation(factors.begin(), factors.end()));
  return false;
}

OrderingSet enumerate_orderings(Ordering factors, uint64_t cap) {
  OrderingSet s;
  s.truncated = for_each_ordering(std::move(factors), cap, [&](const Ordering& o) {
    s.orderings.push_back(o);
    return true;
  });
  return s;
}

// ---------------------------------------------------------------------------
// Greedy allocation

namespace {

constexpr int64_t kInf = std::numeric_limits<int64_t>::max();

DimArray mul(const DimArray& a, const DimArray& b) {
  DimArray r;
  for (int i = 0; i < kNumDims; ++i) r[i] = a[i] * b[i];
  return r;
}

bool is_reduction(KernelKind k, Dim d) { return !relevant(k, Operand::O, d); }

struct OpState {
  int pos = 0;                    // chain position currently absorbing loops
  std::vector<int> cut_count;     // per closed boundary
  std::vector<DimArray> cut_loops;  // loop products below each closed boundary
};

struct Run {
  bool infeasible = false;
  std::array<int, kNumOperands> mult{1, 1, 1};
  std::array<OpState, kNumOperands> ops;
};

struct Ctx {
  const Workload& w;
  const ExecModule& m;
  std::array<std::vector<int>, kNumOperands> chain;
  int top = 0;
  int64_t scratch = 0;
  int scratch_level = -1;
  bool async = false;
  int64_t budget = 0;  // caps every non-top level; 0: none

  Ctx(const Workload& w_, const ExecModule& m_, int64_t budget_ = 0) : w(w_), m(m_), budget(budget_) {
    for (Operand o : kAllOperands) chain[idx(o)] = m.chain(o);
    top = static_cast<int>(m.levels.size()) - 1;
    scratch = scratch_bytes(w, m);
    scratch_level = chain[idx(Operand::I)][0];
    async = m.cost.composition == Composition::async_max;
  }

  int top_pos(Operand o) const { return static_cast<int>(chain[idx(o)].size()) - 1; }
  int64_t cap(int L) const { return budget > 0 ? std::min(m.levels[L].size, budget) : m.levels[L].size; }
};

// Loops of operand `o` resident at chain position j, given the loops it is
// currently absorbing.
const DimArray& loops_at(const Run& r, Operand o, int j, const DimArray& cur) {
  const OpState& s = r.ops[idx(o)];
  return j < s.pos ? s.cut_loops[j] : cur;
}


bool fits(const Ctx& c, const Run& r, const std::array<DimArray, kNumOperands>& cur) {
  const int nl = static_cast<int>(c.m.levels.size());
  for (int L = 0; L < nl - 1; ++L) {
    const MemoryLevel& lv = c.m.levels[L];
    const int64_t size = c.cap(L);
    int64_t extra = L == c.scratch_level ? c.scratch : 0;
    if (extra > size) return false;
    int64_t sum = extra;
    for (Operand o : kAllOperands) {
      const auto& ch = c.chain[idx(o)];
      for (int j = 0; j + 1 < static_cast<int>(ch.size()); ++j) {
        if (ch[j] != L) continue;
        int64_t b = tile_bytes(c.w, o, mul(c.w.spatial, loops_at(r, o, j, cur[idx(o)]))) * r.mult[idx(o)];
        if (lv.shared)
          sum += b;
        else if (b > size)
          return false;
      }
    }
    if (lv.shared && sum > size) return false;
  }
  return true;
}

std::vector<Run> initial_runs(const Ctx& c) {
  std::vector<Run> runs(c.async ? 8 : 1);
  for (size_t mask = 0; mask < runs.size(); ++mask) {
    for (Operand o : kAllOperands) runs[mask].mult[idx(o)] = (mask >> idx(o)) & 1 ? 2 : 1;
    runs[mask].infeasible = !fits(c, runs[mask], {ones(), ones(), ones()});
  }
  return runs;
}

void step(const Ctx& c, Run& r, const LoopFactor& f, const DimArray& before, int i) {
  if (r.infeasible) return;
  DimArray after = before;
  after[idx(f.dim)] *= f.factor;
  std::array<DimArray, kNumOperands> cur{before, before, before};
  if (is_reduction(c.w.kind, f.dim)) {
    // Reductions stay below every cut so that outputs leave the innermost
    // level complete.
    for (auto& s : r.ops)
      if (s.pos != 0) {
        r.infeasible = true;
        return;
      }
    if (!fits(c, r, {after, after, after})) r.infeasible = true;
    return;
  }
  for (Operand o : kAllOperands) {
    OpState& s = r.ops[idx(o)];
    cur[idx(o)] = after;
    if (!relevant(c.w.kind, o, f.dim)) continue;
    while (s.pos < c.top_pos(o) && !fits(c, r, cur)) {
      s.cut_count.push_back(i);
      s.cut_loops.push_back(before);
      ++s.pos;
    }
  }
}

int closed_mask(const Run& r) {
  int mask = 0;
  for (Operand o : kAllOperands)
    if (!r.ops[idx(o)].cut_count.empty()) mask |= 1 << idx(o);
  return mask;
}

void step_all(const Ctx& c, std::vector<Run>& runs, const LoopFactor& f, const DimArray& before, int i) {
  for (auto& r : runs) step(c, r, f, before, i);
  // The double-buffered variant finally used covers every operand phase 1
  // has tiled; variants missing one can never be selected.
  if (runs.size() > 1 && !runs[0].infeasible) {
    int s0 = closed_mask(runs[0]);
    for (size_t mask = 1; mask < runs.size(); ++mask)
      if ((static_cast<int>(mask) & s0) != s0) runs[mask].infeasible = true;
  }
}

Allocation to_allocation(const Ctx& c, const Run& r, int dbl_mask, int n) {
  Allocation a;
  for (Operand o : kAllOperands) {
    const OpState& s = r.ops[idx(o)];
    int nb = c.top_pos(o);
    auto& cuts = a.cuts[idx(o)];
    cuts = s.cut_count;
    cuts.resize(nb, n);
    auto& buf = a.buffering[idx(o)];
    buf.assign(nb, Buffering::single);
    if ((dbl_mask >> idx(o)) & 1)
      for (int b = 0; b < nb; ++b)
        if (cuts[b] < n) buf[b] = Buffering::dbl;
  }
  return a;
}

std::optional<Allocation> finalize(const Ctx& c, const std::vector<Run>& runs, int n) {
  const Run& p1 = runs[0];
  if (p1.infeasible) return std::nullopt;
  if (!c.async) return to_allocation(c, p1, 0, n);
  int s = closed_mask(p1);
  if (s != 0 && !runs[s].infeasible) return to_allocation(c, runs[s], s, n);
  return to_allocation(c, p1, 0, n);
}

std::optional<Allocation> allocate(const Ctx& c, const Ordering& ord) {
  auto runs = initial_runs(c);
  DimArray consumed = ones();
  for (int i = 0; i < static_cast<int>(ord.size()); ++i) {
    step_all(c, runs, ord[i], consumed, i);
    if (runs[0].infeasible) return std::nullopt;
    consumed[idx(ord[i].dim)] *= ord[i].factor;
  }
  return finalize(c, runs, static_cast<int>(ord.size()));
}

Schedule make_schedule(const Workload& w, const Ordering& ord, const Allocation& a) {
  Schedule s;
  s.spatial = w.spatial;
  s.temporal = ord;
  s.cuts = a.cuts;
  s.buffering = a.buffering;
  return s;
}

DimArray loop_product(const Ordering& ord, int from, int to) {
  DimArray p = ones();
  for (int i = from; i < to; ++i) p[idx(ord[i].dim)] *= ord[i].factor;
  return p;
}

int64_t iterations(const Ordering& ord, int from) {
  int64_t p = 1;
  for (int i = from; i < static_cast<int>(ord.size()); ++i) p *= ord[i].factor;
  return p;
}

}  // namespace

std::vector<int64_t> tiling_budgets(const ExecModule& m) {
  int64_t top = 0;
  for (size_t L = 0; L + 1 < m.levels.size(); ++L) top = std::max(top, m.levels[L].size);
  std::vector<int64_t> b{top};
  std::vector<int64_t> grid;
  for (int64_t g = kMinTilingBudget; g < top; g *= 2) {
    grid.push_back(g);
    if (g * 3 / 2 < top) grid.push_back(g * 3 / 2);
  }
  std::sort(grid.rbegin(), grid.rend());
  b.insert(b.end(), grid.begin(), grid.end());
  return b;
}

std::optional<Allocation> allocate_levels(const Ordering& ordering, const Workload& w, const ExecModule& m,
                                          int64_t budget) {
  return allocate(Ctx(w, m, budget), ordering);
}

int64_t scratch_bytes(const Workload& w, const ExecModule& m) {
  if (w.kind != KernelKind::conv && w.kind != KernelKind::depthwise) return 0;
  auto it = m.cost.values.find("scratch_per_reduction");
  if (it == m.cost.values.end()) return 0;
  return it->second * w.adapted[idx(Dim::C)] * w.adapted[idx(Dim::FY)] * w.adapted[idx(Dim::FX)];
}

DimArray operand_tile(const Schedule& s, Operand o, int j) {
  const auto& cuts = s.cuts[idx(o)];
  int n = static_cast<int>(s.temporal.size());
  int upto = j < static_cast<int>(cuts.size()) ? cuts[j] : n;
  return mul(s.spatial, loop_product(s.temporal, 0, upto));
}

std::vector<int64_t> schedule_footprint(const Schedule& s, const Workload& w, const ExecModule& m) {
  std::vector<int64_t> fp(m.levels.size(), 0);
  const int nl = static_cast<int>(m.levels.size());
  int64_t scratch = scratch_bytes(w, m);
  auto chi = m.chain(Operand::I);
  if (scratch > 0) fp[chi[0]] += scratch;
  for (Operand o : kAllOperands) {
    auto ch = m.chain(o);
    for (int j = 0; j + 1 < static_cast<int>(ch.size()); ++j) {
      int64_t b = tile_bytes(w, o, operand_tile(s, o, j));
      if (s.buffering[idx(o)][j] == Buffering::dbl) b *= 2;
      if (m.levels[ch[j]].shared)
        fp[ch[j]] += b;
      else
        fp[ch[j]] = std::max(fp[ch[j]], b);
    }
  }
  fp.resize(nl - 1);
  return fp;
}

int64_t CostBreakdown::mem_cycles() const {
  int64_t s = 0;
  for (auto& v : l_mem)
    for (auto& t : v) s += t.cycles;
  return s;
}

CostBreakdown evaluate_schedule(const Schedule& s, const Workload& w, const ExecModule& m) {
  CostBreakdown cb;
  const int n = static_cast<int>(s.temporal.size());
  int mcut = n;
  for (Operand o : kAllOperands) mcut = std::min(mcut, s.cuts[idx(o)][0]);
  cb.kernel_tile = mul(s.spatial, loop_product(s.temporal, 0, mcut));
  cb.kernel_calls = iterations(s.temporal, mcut);
  cb.l_ops = cb.kernel_calls * tile_compute_cycles(m.cost, cb.kernel_tile);
  int64_t dbl = 0, single = 0;
  for (Operand o : kAllOperands) {
    auto ch = m.chain(o);
    const int nb = static_cast<int>(ch.size()) - 1;
    for (int b = 0; b < nb; ++b) {
      DimArray tile = operand_tile(s, o, b);
      DimArray parent = operand_tile(s, o, b + 1);
      TransferCost t;
      t.transfers = iterations(s.temporal, s.cuts[idx(o)][b]);
      t.bytes = transfer_bytes(w, o, tile);
      t.chunks = tile_chunks(w, o, tile, parent);
      t.cycles = t.transfers * transfer_cycles(t.bytes, t.chunks, m.levels[ch[b + 1]]);
      t.buffering = s.buffering[idx(o)][b];
      (t.buffering == Buffering::dbl ? dbl : single) += t.cycles;
      cb.l_mem[idx(o)].push_back(t);
    }
  }
  cb.composition = m.cost.composition;
  if (cb.composition == Composition::async_max)
    cb.total = std::max(cb.l_ops, dbl) + single;
  else
    cb.total = cb.l_ops + dbl + single;
  cb.macs = w.macs();
  return cb;
}

void check_schedule(const Schedule& s, const Workload& w, const ExecModule& m) {
  DimArray prod = mul(s.spatial, loop_product(s.temporal, 0, static_cast<int>(s.temporal.size())));
  for (Dim d : kAllDims)
    if (prod[idx(d)] != w.adapted[idx(d)])
      throw InternalError("schedule does not cover dimension " + std::string(dim_name(d)) + ": " +
                          std::to_string(prod[idx(d)]) + " vs " + std::to_string(w.adapted[idx(d)]));
  const int n = static_cast<int>(s.temporal.size());
  for (Operand o : kAllOperands) {
    auto ch = m.chain(o);
    const auto& cuts = s.cuts[idx(o)];
    if (cuts.size() + 1 != ch.size() || s.buffering[idx(o)].size() != cuts.size())
      throw InternalError("schedule cut count does not match the level chain of operand " +
                          std::string(1, operand_char(o)));
    for (size_t b = 0; b < cuts.size(); ++b) {
      if (cuts[b] < 0 || cuts[b] > n) throw InternalError("schedule cut out of range");
      if (b > 0 && cuts[b] < cuts[b - 1]) throw InternalError("schedule cuts are not monotone");
    }
  }
}

std::string schedule_digest(const Schedule& s, const ExecModule& m) {
  std::ostringstream os;
  os << "spatial=";
  bool first = true;
  for (Dim d : kAllDims)
    if (s.spatial[idx(d)] > 1) {
      os << (first ? "" : ",") << dim_name(d) << s.spatial[idx(d)];
      first = false;
    }
  if (first) os << "-";
  os << " loops=";
  const int n = static_cast<int>(s.temporal.size());
  auto marks = [&](int i) {
    std::string mk;
    for (Operand o : kAllOperands) {
      const auto& cuts = s.cuts[idx(o)];
      for (size_t b = 0; b < cuts.size(); ++b)
        if (cuts[b] == i) {
          mk += operand_char(o);
          if (b > 0) mk += std::to_string(b);
        }
    }
    return mk;
  };
  for (int i = 0; i <= n; ++i) {
    auto mk = marks(i);
    if (!mk.empty()) os << "|" << mk << " ";
    if (i < n) os << dim_name(s.temporal[i].dim) << s.temporal[i].factor << " ";
  }
  std::string dbl;
  for (Operand o : kAllOperands)
    for (auto b : s.buffering[idx(o)])
      if (b == Buffering::dbl) {
        dbl += operand_char(o);
        break;
      }
  os << "dbl=" << (dbl.empty() ? "-" : dbl);
  (void)m;
  return os.str();
}

json schedule_to_json(const Schedule& s) {
  json j;
  j["spatial"] = json::object();
  for (Dim d : kAllDims) j["spatial"][std::string(dim_name(d))] = s.spatial[idx(d)];
  j["temporal"] = json::array();
  for (auto& f : s.temporal) j["temporal"].push_back({std::string(dim_name(f.dim)), f.factor});
  for (Operand o : kAllOperands) {
    std::string k(1, operand_char(o));
    j["cuts"][k] = s.cuts[idx(o)];
    json b = json::array();
    for (auto x : s.buffering[idx(o)]) b.push_back(x == Buffering::dbl ? "double" : "single");
    j["buffering"][k] = b;
  }
  return j;
}

json cost_to_json(const CostBreakdown& c) {
  json j;
  j["total"] = c.total;
  j["l_ops"] = c.l_ops;
  j["composition"] = c.composition == Composition::async_max ? "async_max" : "sync_sum";
  j["macs"] = c.macs;
  j["macs_per_cycle"] = c.macs_per_cycle();
  j["kernel_calls"] = c.kernel_calls;
  for (Dim d : kAllDims) j["kernel_tile"][std::string(dim_name(d))] = c.kernel_tile[idx(d)];
  for (Operand o : kAllOperands) {
    json v = json::array();
    for (auto& t : c.l_mem[idx(o)])
      v.push_back({{"transfers", t.transfers},
                   {"bytes", t.bytes},
                   {"chunks", t.chunks},
                   {"cycles", t.cycles},
                   {"buffering", t.buffering == Buffering::dbl ? "double" : "single"}});
    j["l_mem"][std::string(1, operand_char(o))] = v;
  }
  return j;
}

Schedule untiled_schedule(const Workload& w, const ExecModule& m) {
  Schedule s;
  s.spatial = w.spatial;
  s.temporal = workload_factors(w);
  const int n = static_cast<int>(s.temporal.size());
  for (Operand o : kAllOperands) {
    size_t nb = m.chain(o).size() - 1;
    s.cuts[idx(o)].assign(nb, n);
    s.buffering[idx(o)].assign(nb, Buffering::single);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Search

namespace {

// One context per tiling budget whose minimal tiles fit, largest first.
std::vector<Ctx> budget_contexts(const Workload& w, const ExecModule& m) {
  std::vector<Ctx> cs;
  DimArray all = ones();
  for (Dim d : kAllDims) all[idx(d)] = w.temporal(d);
  bool untiled_fit = false;
  for (int64_t b : tiling_budgets(m)) {
    Ctx c(w, m, b);
    auto runs = initial_runs(c);
    if (runs[0].infeasible) break;
    // Budgets under which nothing is ever cut all allocate identically.
    bool fit = fits(c, runs[0], {all, all, all});
    if (fit && untiled_fit) continue;
    untiled_fit = fit;
    cs.push_back(c);
  }
  return cs;
}

struct Costed {
  int64_t cost = kInf;
  std::optional<Allocation> alloc;
};

// Cheapest allocation over the budgets; ties keep the larger budget.
Costed best_allocation(const std::vector<Ctx>& cs, const Ordering& ord) {
  Costed best;
  for (auto& c : cs) {
    auto a = allocate(c, ord);
    if (!a) continue;
    int64_t t = evaluate_schedule(make_schedule(c.w, ord, *a), c.w, c.m).total;
    if (t < best.cost) best = {t, std::move(a)};
  }
  return best;
}

int64_t ordering_cost(const std::vector<Ctx>& cs, const Ordering& ord) { return best_allocation(cs, ord).cost; }

std::optional<SearchResult> make_result(const std::vector<Ctx>& cs, const Ordering& ord, SearchMode used,
                                        uint64_t space, uint64_t evaluated) {
  auto best = best_allocation(cs, ord);
  if (!best.alloc) return std::nullopt;
  const Ctx& c = cs.front();
  const auto& a = best.alloc;
  SearchResult r;
  r.schedule = make_schedule(c.w, ord, *a);
  check_schedule(r.schedule, c.w, c.m);
  r.cost = evaluate_schedule(r.schedule, c.w, c.m);
  r.used = used;
  r.orderings = space;
  r.evaluated = evaluated;
  return r;
}

struct Best {
  int64_t cost = kInf;
  Ordering completion;
};

int64_t dim_product(const DimArray& a) {
  int64_t p = 1;
  for (int64_t v : a) p *= v;
  return p;
}

// Lower bound on every completion of variant `mask` (its double-buffered
// operands). Once a cut is closed the kernel tile is fixed, and so is the
// traffic of each closed operand; traffic that can never be double-buffered
// adds to the bound directly. A closed cut with reductions still to come can
// never complete.
int64_t variant_bound(const Ctx& c, const Run& r, int mask, int64_t iters, bool red_left, int64_t ops_floor) {
  if (r.infeasible) return kInf;
  int mcut = std::numeric_limits<int>::max();
  const DimArray* kernel = nullptr;
  int64_t overlap = 0, serial = 0;
  for (Operand o : kAllOperands) {
    const OpState& s = r.ops[idx(o)];
    if (c.chain[idx(o)].size() != 2) continue;
    const bool dbl = c.async && ((mask >> idx(o)) & 1);
    if (s.cut_count.empty()) {
      // Tiles of W and O partition the tensor, so the traffic is at least
      // one whole transfer; input windows may skip rows.
      if (o != Operand::I && !dbl)
        serial += transfer_cycles(transfer_bytes(c.w, o, c.w.adapted), tile_chunks(c.w, o, c.w.adapted, c.w.adapted),
                                  c.m.levels[c.chain[idx(o)][1]]);
      continue;
    }
    const DimArray& below = s.cut_loops[0];
    if (s.cut_count[0] < mcut) {
      mcut = s.cut_count[0];
      kernel = &below;
    }
    DimArray tile = mul(c.w.spatial, below);
    (dbl ? overlap : serial) += iters / dim_product(below) *
                                transfer_cycles(transfer_bytes(c.w, o, tile), tile_chunks(c.w, o, tile, c.w.adapted),
                                                c.m.levels[c.chain[idx(o)][1]]);
  }
  int64_t ops = ops_floor;
  if (kernel) {
    if (red_left) return kInf;
    ops = iters / dim_product(*kernel) * tile_compute_cycles(c.m.cost, mul(c.w.spatial, *kernel));
  }
  return (c.async ? std::max(ops, overlap) : ops + overlap) + serial;
}

// Minimum over the variants finalize may still select.
int64_t state_bound(const Ctx& c, const std::vector<Run>& runs, int64_t iters, bool red_left, int64_t ops_floor) {
  int64_t lb = variant_bound(c, runs[0], 0, iters, red_left, ops_floor);
  if (!c.async) return lb;
  int s = closed_mask(runs[0]);
  for (size_t m = 1; m < runs.size(); ++m)
    if ((static_cast<int>(m) & s) == s)
      lb = std::min(lb, variant_bound(c, runs[m], static_cast<int>(m), iters, red_left, ops_floor));
  return lb;
}

// Depth-first search over distinct orderings. Prefixes that leave every
// allocation variant in the same state have identical completions, so each
// state is solved once.
class PrefixSolver {
 public:
  PrefixSolver(const Ctx& c, const std::vector<LoopFactor>& types, std::atomic<uint64_t>& states, uint64_t cap,
               int64_t incumbent)
      : c_(c), types_(types), states_(states), cap_(cap), incumbent_(incumbent) {
    iters_ = 1;
    for (Dim d : kAllDims) iters_ *= c.w.temporal(d);
    // With non-negative constants the compute models never charge a tiled
    // layer less than the untiled kernel.
    bool nonneg = true;
    for (auto& [k, v] : c.m.cost.values) nonneg &= v >= 0;
    if (nonneg) ops_floor_ = tile_compute_cycles(c.m.cost, c.w.adapted);
  }

  Best solve(const std::vector<Run>& runs, const DimArray& consumed, std::vector<int>& rem, Ordering& prefix) {
    if (aborted_) return {};
    const int n_left = [&] {
      int s = 0;
      for (int r : rem) s += r;
      return s;
    }();
    if (n_left == 0) return {leaf(runs, prefix, {}), {}};
    bool red_left = false;
    for (size_t t = 0; t < types_.size(); ++t)
      if (rem[t] > 0 && is_reduction(c_.w.kind, types_[t].dim)) red_left = true;
    if (red_left)
      for (auto& s : runs[0].ops)
        if (s.pos != 0) return {};
    // Ties are kept: only strictly worse subtrees are cut.
    if (state_bound(c_, runs, iters_, red_left, ops_floor_) > incumbent_) return {};
    if (!red_left && settled(runs)) {
      Ordering comp;
      for (size_t t = 0; t < types_.size(); ++t)
        for (int k = 0; k < rem[t]; ++k) comp.push_back(types_[t]);
      return {leaf(runs, prefix, comp), comp};
    }
    std::string key = make_key(runs, rem);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (states_.fetch_add(1, std::memory_order_relaxed) >= cap_) {
      aborted_ = true;
      return {};
    }
    Best best;
    const int i = static_cast<int>(prefix.size());
    for (size_t t = 0; t < types_.size(); ++t) {
      if (rem[t] == 0) continue;
      std::vector<Run> child = runs;
      step_all(c_, child, types_[t], consumed, i);
      if (child[0].infeasible) continue;
      DimArray nc = consumed;
      nc[idx(types_[t].dim)] *= types_[t].factor;
      --rem[t];
      prefix.push_back(types_[t]);
      Best b = solve(child, nc, rem, prefix);
      prefix.pop_back();
      ++rem[t];
      if (aborted_) return {};
      if (b.cost < best.cost) {
        best.cost = b.cost;
        best.completion.clear();
        best.completion.push_back(types_[t]);
        best.completion.insert(best.completion.end(), b.completion.begin(), b.completion.end());
      }
    }
    memo_.emplace(std::move(key), best);
    return best;
  }

  bool aborted() const { return aborted_; }
  uint64_t leaves() const { return leaves_; }

 private:
  bool settled(const std::vector<Run>& runs) const {
    for (auto& r : runs) {
      if (r.infeasible) continue;
      for (Operand o : kAllOperands)
        if (r.ops[idx(o)].pos != c_.top_pos(o)) return false;
    }
    return true;
  }

  int64_t leaf(const std::vector<Run>& runs, const Ordering& prefix, const Ordering& comp) {
    Ordering ord = prefix;
    ord.insert(ord.end(), comp.begin(), comp.end());
    auto a = finalize(c_, runs, static_cast<int>(ord.size()));
    if (!a) return kInf;
    ++leaves_;
    int64_t t = evaluate_schedule(make_schedule(c_.w, ord, *a), c_.w, c_.m).total;
    incumbent_ = std::min(incumbent_, t);
    return t;
  }

  static std::string make_key(const std::vector<Run>& runs, const std::vector<int>& rem) {
    std::vector<int64_t> k;
    k.reserve(64);
    for (int r : rem) k.push_back(r);
    for (auto& r : runs) {
      k.push_back(r.infeasible ? -1 : -2);
      if (r.infeasible) continue;
      for (auto& s : r.ops) {
        k.push_back(s.pos);
        for (size_t b = 0; b < s.cut_count.size(); ++b) {
          k.push_back(s.cut_count[b]);
          k.insert(k.end(), s.cut_loops[b].begin(), s.cut_loops[b].end());
        }
      }
    }
    return std::string(reinterpret_cast<const char*>(k.data()), k.size() * sizeof(int64_t));
  }

  const Ctx& c_;
  const std::vector<LoopFactor>& types_;
  std::atomic<uint64_t>& states_;
  uint64_t cap_;
  int64_t incumbent_;
  int64_t iters_ = 1;
  int64_t ops_floor_ = 0;
  bool aborted_ = false;
  uint64_t leaves_ = 0;
  std::unordered_map<std::string, Best> memo_;
};

struct Task {
  Ordering prefix;
  std::vector<Run> runs;
  DimArray consumed = ones();
  std::vector<int> rem;
  Best best;
  bool aborted = false;
  uint64_t leaves = 0;
};

void expand(const Ctx& c, const std::vector<LoopFactor>& types, Task t, int depth, std::vector<Task>& out) {
  int left = 0;
  for (int r : t.rem) left += r;
  if (depth == 0 || left == 0) {
    out.push_back(std::move(t));
    return;
  }
  for (size_t k = 0; k < types.size(); ++k) {
    if (t.rem[k] == 0) continue;
    Task child = t;
    step_all(c, child.runs, types[k], t.consumed, static_cast<int>(t.prefix.size()));
    if (child.runs[0].infeasible) continue;
    child.consumed[idx(types[k].dim)] *= types[k].factor;
    --child.rem[k];
    child.prefix.push_back(types[k]);
    expand(c, types, std::move(child), depth - 1, out);
  }
}

struct DfsOutcome {
  bool aborted = false;
  std::optional<Ordering> best;
  uint64_t leaves = 0;
};

// `bound`: cost already achieved elsewhere; strictly worse subtrees are
// skipped, so the result is exact whenever it does not exceed the bound.
DfsOutcome search_prefix_merged(const Ctx& c, const Ordering& factors, uint64_t cap, int threads,
                                int64_t bound = kInf) {
  std::vector<LoopFactor> types;
  std::vector<int> rem;
  for (auto& f : factors) {
    if (types.empty() || !(types.back() == f)) {
      types.push_back(f);
      rem.push_back(0);
    }
    ++rem.back();
  }
  Task root;
  root.runs = initial_runs(c);
  root.rem = rem;
  DfsOutcome out;
  if (root.runs[0].infeasible) return out;
  // Prefix tasks split the memo, so a single worker solves the whole tree.
  const int workers = threads > 0 ? threads : omp_get_max_threads();
  std::vector<Task> tasks;
  expand(c, types, root, workers > 1 ? 2 : 0, tasks);
  std::atomic<uint64_t> states{0};
  const int nt = static_cast<int>(tasks.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int k = 0; k < nt; ++k) {
    Task& t = tasks[k];
    PrefixSolver s(c, types, states, cap, bound);
    Ordering prefix = t.prefix;
    t.best = s.solve(t.runs, t.consumed, t.rem, prefix);
    t.aborted = s.aborted();
    t.leaves = s.leaves();
  }
  int64_t best = kInf;
  for (auto& t : tasks) {
    out.leaves += t.leaves;
    if (t.aborted) out.aborted = true;
    if (t.best.cost < best) {
      best = t.best.cost;
      Ordering o = t.prefix;
      o.insert(o.end(), t.best.completion.begin(), t.best.completion.end());
      out.best = std::move(o);
    }
  }
  if (out.aborted) out.best.reset();
  return out;
}

}  // namespace

std::optional<SearchResult> search_enumerated(const Workload& w, const ExecModule& m, uint64_t cap, bool parallel,
                                              int threads) {
  auto cs = budget_contexts(w, m);
  if (cs.empty()) return std::nullopt;
  Ordering factors = workload_factors(w);
  auto set = enumerate_orderings(factors, cap);
  const int64_t n = static_cast<int64_t>(set.orderings.size());
  std::vector<int64_t> cost(n, kInf);
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads > 0 ? threads : omp_get_max_threads())
    for (int64_t i = 0; i < n; ++i) cost[i] = ordering_cost(cs, set.orderings[i]);
  } else {
    for (int64_t i = 0; i < n; ++i) cost[i] = ordering_cost(cs, set.orderings[i]);
  }
  int64_t bi = -1;
  for (int64_t i = 0; i < n; ++i)
    if (cost[i] < kInf && (bi < 0 || cost[i] < cost[bi])) bi = i;
  if (bi < 0) return std::nullopt;
  return make_result(cs, set.orderings[bi], SearchMode::exhaustive, count_orderings(factors),
                     static_cast<uint64_t>(n));
}

std::optional<SearchResult> search_genetic(const Workload& w, const ExecModule& m, const SearchLimits& limits) {
  auto cs = budget_contexts(w, m);
  if (cs.empty()) return std::nullopt;
  const Ordering factors = workload_factors(w);
  const int n = static_cast<int>(factors.size());
  const uint64_t space = count_orderings(factors);
  if (n < 2) return make_result(cs, factors, SearchMode::genetic, space, 1);
  std::mt19937_64 rng(limits.seed);
  std::map<Ordering, int64_t> cache;
  using Genome = std::vector<int>;
  auto decode = [&](const Genome& g) {
    Ordering o(n);
    for (int i = 0; i < n; ++i) o[i] = factors[g[i]];
    return o;
  };
  auto evaluate = [&](const std::vector<Genome>& pop) {
    std::vector<Ordering> todo;
    for (auto& g : pop) {
      Ordering o = decode(g);
      if (!cache.count(o)) {
        cache.emplace(o, kInf);
        todo.push_back(std::move(o));
      }
    }
    std::vector<int64_t> res(todo.size());
    const int nt = static_cast<int>(todo.size());
#pragma omp parallel for schedule(dynamic) num_threads(limits.threads > 0 ? limits.threads : omp_get_max_threads())
    for (int i = 0; i < nt; ++i) res[i] = ordering_cost(cs, todo[i]);
    for (int i = 0; i < nt; ++i) cache[todo[i]] = res[i];
  };
  auto fitness = [&](const Genome& g) { return cache.at(decode(g)); };

  const int pop_size = std::max(4, limits.population);
  std::vector<Genome> pop;
  Genome id(n);
  for (int i = 0; i < n; ++i) id[i] = i;
  pop.push_back(id);
  Genome red_first;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < n; ++i)
      if (is_reduction(w.kind, factors[i].dim) == (pass == 0)) red_first.push_back(i);
  pop.push_back(red_first);
  pop.push_back(Genome(id.rbegin(), id.rend()));
  while (static_cast<int>(pop.size()) < pop_size) {
    Genome g = id;
    std::shuffle(g.begin(), g.end(), rng);
    pop.push_back(std::move(g));
  }
  evaluate(pop);

  auto better = [&](const Genome& a, const Genome& b) {
    int64_t fa = fitness(a), fb = fitness(b);
    if (fa != fb) return fa < fb;
    return decode(a) < decode(b);
  };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int gen = 0; gen < limits.generations; ++gen) {
    std::sort(pop.begin(), pop.end(), better);
    std::vector<Genome> next(pop.begin(), pop.begin() + 2);
    auto tournament = [&]() -> const Genome& {
      const Genome* b = &pop[pick(0, pop_size - 1)];
      for (int k = 0; k < 2; ++k) {
        const Genome* x = &pop[pick(0, pop_size - 1)];
        if (better(*x, *b)) b = x;
      }
      return *b;
    };
    while (static_cast<int>(next.size()) < pop_size) {
      const Genome& p1 = tournament();
      const Genome& p2 = tournament();
      int a = pick(0, n - 1), b = pick(0, n - 1);
      if (a > b) std::swap(a, b);
      Genome child(n, -1);
      std::vector<bool> used(n, false);
      for (int i = a; i <= b; ++i) {
        child[i] = p1[i];
        used[p1[i]] = true;
      }
      int pos = 0;
      for (int v : p2) {
        if (used[v]) continue;
        while (child[pos] >= 0) ++pos;
        child[pos] = v;
      }
      if (pick(0, 9) < 4) std::swap(child[pick(0, n - 1)], child[pick(0, n - 1)]);
      if (pick(0, 9) < 2) {
        // Move one gene: helps reduction factors drift inwards.
        int from = pick(0, n - 1), to = pick(0, n - 1);
        int v = child[from];
        child.erase(child.begin() + from);
        child.insert(child.begin() + to, v);
      }
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    evaluate(pop);
  }
  const Ordering* best = nullptr;
  int64_t bc = kInf;
  for (auto& [o, cost] : cache)
    if (cost < bc) {
      bc = cost;
      best = &o;
    }
  if (!best) return std::nullopt;
  return make_result(cs, *best, SearchMode::genetic, space, cache.size());
}

std::optional<SearchResult> search_best(const Workload& w, const ExecModule& m, const SearchLimits& limits) {
  if (limits.mode == SearchMode::genetic) return search_genetic(w, m, limits);
  auto cs = budget_contexts(w, m);
  if (cs.empty()) return std::nullopt;
  Ordering factors = workload_factors(w);
  // One exact search per budget; the overall minimum with the smallest
  // ordering among ties is the minimum of the per-budget winners.
  std::optional<Ordering> best;
  int64_t best_cost = kInf;
  uint64_t leaves = 0;
  for (auto& c : cs) {
    auto out = search_prefix_merged(c, factors, limits.max_orderings, limits.threads, best_cost);
    if (out.aborted) return search_genetic(w, m, limits);
    leaves += out.leaves;
    if (!out.best) continue;
    auto a = allocate(c, *out.best);
    int64_t t = evaluate_schedule(make_schedule(w, *out.best, *a), w, m).total;
    if (t < best_cost || (t == best_cost && *out.best < *best)) {
      best_cost = t;
      best = out.best;
    }
  }
  if (!best) return std::nullopt;
  return make_result(cs, *best, SearchMode::exhaustive, count_orderings(factors), leaves);
}

}  // namespace hetcc
