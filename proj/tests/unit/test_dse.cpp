#include <doctest.h>

#include <random>
#include <set>

#include "hetcc/dse.hpp"
#include "support/workloads.hpp"

using namespace hetcc;
using namespace hetcc::testing;

namespace {

// Cluster-like module without unrolling or scratch, for hand traces.
ExecModule plain_module(int64_t l1, Composition comp = Composition::sync_sum) {
  ExecModule m = *builtin_target("gap9").find("cluster");
  m.spatial.unroll = ones();
  m.spatial_overrides.clear();
  m.cost.values["scratch_per_reduction"] = 0;
  m.cost.composition = comp;
  m.levels[0].size = l1;
  return m;
}

bool fits(const Schedule& s, const Workload& w, const ExecModule& m) {
  auto fp = schedule_footprint(s, w, m);
  for (size_t l = 0; l < fp.size(); ++l)
    if (fp[l] > m.levels[l].size) return false;
  return true;
}

}  // namespace

TEST_CASE("prime factorization") {
  CHECK(prime_factorize(16) == std::vector<int64_t>{2, 2, 2, 2});
  CHECK(prime_factorize(12) == std::vector<int64_t>{2, 2, 3});
  CHECK(prime_factorize(1).empty());
  CHECK(prime_factorize(97) == std::vector<int64_t>{97});
}

TEST_CASE("ordering enumeration") {
  Ordering f{{Dim::OY, 2}, {Dim::OY, 2}, {Dim::K, 3}};
  CHECK(count_orderings(f) == 3);
  auto s = enumerate_orderings(f, 100);
  CHECK(s.orderings.size() == 3);
  CHECK_FALSE(s.truncated);
  CHECK(enumerate_orderings({{Dim::K, 2}}, 10).orderings.size() == 1);
  auto e = enumerate_orderings({}, 10);
  REQUIRE(e.orderings.size() == 1);
  CHECK(e.orderings[0].empty());
  auto t = enumerate_orderings(f, 2);
  CHECK(t.orderings.size() == 2);
  CHECK(t.truncated);

  std::mt19937_64 rng(3);
  for (int it = 0; it < 40; ++it) {
    Ordering g;
    int n = 1 + static_cast<int>(rng() % 7);
    for (int i = 0; i < n; ++i) g.push_back({kAllDims[rng() % 3], rng() % 2 ? 2 : 3});
    auto all = enumerate_orderings(g, 1000000);
    CHECK(all.orderings.size() == count_orderings(g));
    CHECK(std::is_sorted(all.orderings.begin(), all.orderings.end()));
    CHECK(std::set<Ordering>(all.orderings.begin(), all.orderings.end()).size() == all.orderings.size());
  }
}

TEST_CASE("allocation: input overflow forces an input cut") {
  ExecModule m = plain_module(256);
  Workload w = make_workload(m, Layout::nhwc(), KernelKind::conv, {8, 8, 8, 8, 1, 1});
  CHECK(tile_bytes(w, Operand::I, w.adapted) == 512);
  auto r = search_best(w, m);
  REQUIRE(r);
  const int n = static_cast<int>(r->schedule.temporal.size());
  CHECK(r->schedule.cuts[idx(Operand::I)][0] < n);
  CHECK(fits(r->schedule, w, m));
  for (auto& ord : enumerate_orderings(workload_factors(w), 5000).orderings)
    if (auto a = allocate_levels(ord, w, m)) {
      Schedule s{w.spatial, ord, a->cuts, a->buffering};
      CHECK(fits(s, w, m));
    }

  CHECK_FALSE(search_best(w, plain_module(16)));
}

TEST_CASE("footprint arithmetic") {
  ExecModule m = plain_module(1 << 20);
  Workload w = make_workload(m, Layout::nhwc(), KernelKind::conv, {16, 1, 4, 8, 1, 1});
  Schedule s = untiled_schedule(w, m);
  CHECK(tile_bytes(w, Operand::O, operand_tile(s, Operand::O, 0)) == 512);
  auto fp = schedule_footprint(s, w, m);
  s.buffering[idx(Operand::O)][0] = Buffering::dbl;
  CHECK(schedule_footprint(s, w, m)[0] - fp[0] == 512);
}

TEST_CASE("untiled diana conv composes compute and three transfers") {
  const TargetModel d_target = builtin_target("diana");
  const ExecModule& d = d_target.modules[0];
  Workload w = make_workload(d, Layout::nchw(), KernelKind::conv, {64, 64, 32, 32, 3, 3, 1, 1});
  Schedule s = untiled_schedule(w, d);
  CostBreakdown c = evaluate_schedule(s, w, d);
  CHECK(c.l_ops == 448256);
  const MemoryLevel& l2 = d.levels.back();
  int64_t mem = transfer_cycles(64 * 32 * 32, 1, l2) + transfer_cycles(64 * 64 * 9, 1, l2) +
                transfer_cycles(64 * 32 * 32, 1, l2);
  CHECK(c.mem_cycles() == mem);
  CHECK(c.total == 448256 + mem);
  for (auto& v : c.l_mem) CHECK(v[0].transfers == 1);
}

TEST_CASE("async composition overlaps only double-buffered traffic") {
  ExecModule m = plain_module(1 << 20, Composition::async_max);
  Workload w = make_workload(m, Layout::nhwc(), KernelKind::conv, {4, 4, 4, 4, 1, 1});
  Schedule s = untiled_schedule(w, m);
  // K2 K2 C2 C2 OY2 OY2 OX2 OX2: keep reductions inside, tile I/W/O above.
  s.temporal = {{Dim::C, 2}, {Dim::C, 2}, {Dim::K, 2}, {Dim::K, 2}, {Dim::OY, 2}, {Dim::OY, 2}, {Dim::OX, 2}, {Dim::OX, 2}};
  s.cuts = {{{4}, {2}, {4}}};
  s.buffering = {{{Buffering::dbl}, {Buffering::single}, {Buffering::dbl}}};
  check_schedule(s, w, m);
  CostBreakdown c = evaluate_schedule(s, w, m);
  int64_t dbl = c.l_mem[0][0].cycles + c.l_mem[2][0].cycles;
  CHECK(c.l_mem[1][0].transfers == 64);
  CHECK(c.l_mem[0][0].transfers == 16);
  CHECK(c.total == std::max(c.l_ops, dbl) + c.l_mem[1][0].cycles);
}

TEST_CASE("exhaustive search equals the brute-force oracle") {
  std::mt19937_64 rng(2024);
  int tiled = 0;
  for (int it = 0; it < 60; ++it) {
    RandomWorkload r = random_workload(rng, 8);
    auto got = search_best(r.w, r.exec());
    auto want = brute_force_best(r.w, r.exec());
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    CHECK(got->cost.total == want->cost);
    CHECK(got->schedule.temporal == want->ordering);
    auto ref = search_enumerated(r.w, r.exec(), 1000000, false);
    REQUIRE(ref);
    CHECK(ref->cost.total == got->cost.total);
    CHECK(ref->schedule == got->schedule);
    const int n = static_cast<int>(got->schedule.temporal.size());
    for (auto& c : got->schedule.cuts) tiled += c[0] < n;
  }
  MESSAGE("operand tilings among optima: " << tiled);
  CHECK(tiled > 10);
}

TEST_CASE("parallel and serial enumeration agree") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 20; ++it) {
    RandomWorkload r = random_workload(rng, 9);
    auto a = search_enumerated(r.w, r.exec(), 1000000, false);
    auto b = search_enumerated(r.w, r.exec(), 1000000, true, 4);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(a->schedule == b->schedule);
    SearchLimits l1, l4;
    l1.threads = 1;
    l4.threads = 4;
    auto c = search_best(r.w, r.exec(), l1);
    auto d = search_best(r.w, r.exec(), l4);
    REQUIRE(c.has_value() == d.has_value());
    if (c) CHECK(c->schedule == d->schedule);
  }
}

TEST_CASE("every returned schedule is feasible and conserves factors") {
  std::mt19937_64 rng(7);
  int feasible = 0;
  for (int it = 0; it < 1000; ++it) {
    RandomWorkload r = random_workload(rng);
    auto got = search_best(r.w, r.exec());
    if (!got) continue;
    ++feasible;
    CHECK_NOTHROW(check_schedule(got->schedule, r.w, r.exec()));
    CHECK(fits(got->schedule, r.w, r.exec()));
  }
  MESSAGE("feasible " << feasible << " / 1000");
  CHECK(feasible > 500);
}

TEST_CASE("genetic search never beats and usually matches exhaustive") {
  std::mt19937_64 rng(31);
  int trials = 0, equal = 0;
  for (int it = 0; it < 40; ++it) {
    RandomWorkload r = random_workload(rng, 8);
    auto ex = search_best(r.w, r.exec());
    if (!ex) continue;
    SearchLimits l;
    l.mode = SearchMode::genetic;
    l.seed = static_cast<uint64_t>(it);
    auto ga = search_best(r.w, r.exec(), l);
    REQUIRE(ga);
    CHECK(ga->used == SearchMode::genetic);
    CHECK(ga->cost.total >= ex->cost.total);
    ++trials;
    equal += ga->cost.total == ex->cost.total;
    auto again = search_best(r.w, r.exec(), l);
    CHECK(again->schedule == ga->schedule);
  }
  MESSAGE("genetic matched " << equal << " / " << trials);
  CHECK(equal * 10 >= trials * 9);
}

TEST_CASE("state cap falls back to genetic search") {
  const TargetModel cl_target = builtin_target("gap9");
  const ExecModule& cl = *cl_target.find("cluster");
  Workload w = make_workload(cl, Layout::nhwc(), KernelKind::conv, {64, 64, 32, 32, 3, 3, 1, 1});
  SearchLimits l;
  l.max_orderings = 5;
  auto r = search_best(w, cl, l);
  REQUIRE(r);
  CHECK(r->used == SearchMode::genetic);
  auto full = search_best(w, cl);
  REQUIRE(full);
  CHECK(full->used == SearchMode::exhaustive);
  CHECK(full->orderings > 200000);
  CHECK(full->cost.total <= r->cost.total);
}

TEST_CASE("untiled optimum on a sync module") {
  const TargetModel d_target = builtin_target("diana");
  const ExecModule& d = d_target.modules[0];
  Workload w = make_workload(d, Layout::nchw(), KernelKind::conv, {32, 16, 16, 16, 3, 3, 1, 1});
  auto r = search_best(w, d);
  REQUIRE(r);
  CHECK(r->cost.total == evaluate_schedule(untiled_schedule(w, d), w, d).total);
}

TEST_CASE("operands get different cuts on an asymmetric layer") {
  ExecModule m = plain_module(4096);
  // Large weights, small activations.
  Workload w = make_workload(m, Layout::nhwc(), KernelKind::conv, {64, 16, 4, 4, 3, 3, 1, 1});
  auto r = search_best(w, m);
  REQUIRE(r);
  std::set<int> cuts;
  for (auto& c : r->schedule.cuts) cuts.insert(c[0]);
  CHECK(cuts.size() > 1);
  MESSAGE(schedule_digest(r->schedule, m));
}

TEST_CASE("more capacity or bandwidth never raises the best cost") {
  std::mt19937_64 rng(123);
  int violations = 0, checked = 0;
  for (int it = 0; it < 200; ++it) {
    RandomWorkload r = random_workload(rng);
    ExecModule m = r.exec();
    auto base = search_best(r.w, m);
    ExecModule big = m, fast = m;
    for (auto& l : big.levels) l.size *= 2;
    for (auto& l : fast.levels) l.bandwidth *= 2;
    auto b = search_best(r.w, big);
    auto f = search_best(r.w, fast);
    if (base) {
      REQUIRE(b);
      REQUIRE(f);
      ++checked;
      violations += b->cost.total > base->cost.total;
      violations += f->cost.total > base->cost.total;
    }
  }
  MESSAGE("monotonicity checked on " << checked << ", violations " << violations);
  CHECK(violations == 0);
}

TEST_CASE("schedule digest marks operand cuts") {
  ExecModule m = plain_module(1 << 20);
  Workload w = make_workload(m, Layout::nhwc(), KernelKind::conv, {2, 3, 1, 1, 1, 1});
  Schedule s = untiled_schedule(w, m);
  s.temporal = {{Dim::C, 3}, {Dim::K, 2}};
  s.cuts = {{{2}, {1}, {2}}};
  CHECK(schedule_digest(s, m) == "spatial=- loops=C3 |W K2 |IO dbl=-");
}
