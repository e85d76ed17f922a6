#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hetcc/builder.hpp"
#include "hetcc/cost_model.hpp"
#include "hetcc/match.hpp"
#include "hetcc/target.hpp"
#include "hetcc/workload.hpp"
#include "support/workloads.hpp"

using namespace hetcc;
using namespace hetcc::testing;

namespace {

DimArray tile(int64_t K, int64_t C, int64_t OY, int64_t OX, int64_t FY, int64_t FX) { return {K, C, OY, OX, FY, FX}; }

// Chunks by walking every element's linear offset.
int64_t walk_chunks(const std::vector<int64_t>& t, const std::vector<int64_t>& full) {
  std::vector<int64_t> offs;
  std::vector<int64_t> i(t.size(), 0);
  for (;;) {
    int64_t lin = 0;
    for (size_t d = 0; d < t.size(); ++d) lin = lin * full[d] + i[d];
    offs.push_back(lin);
    size_t d = t.size();
    while (d > 0) {
      --d;
      if (++i[d] < t[d]) break;
      i[d] = 0;
      if (d == 0) goto done;
    }
    if (t.empty()) break;
  }
done:
  std::sort(offs.begin(), offs.end());
  int64_t runs = offs.empty() ? 0 : 1;
  for (size_t k = 1; k < offs.size(); ++k) runs += offs[k] != offs[k - 1] + 1;
  return runs;
}

struct ConvGraph {
  Graph g;
  std::string anchor = "conv";
};

// conv [-> bias_add -> requant] in the given activation layout.
ConvGraph conv_graph(Layout act, int64_t C, int64_t K, int64_t H, int64_t W, int64_t FY, int64_t FX, int64_t stride = 1,
                     int64_t pad = 0, bool tail = true, int64_t groups = 1) {
  std::mt19937_64 rng(7);
  GraphBuilder b("conv", act);
  std::string x = b.input("x", {1, C, H, W}, DType::i8);
  b.random_constant("w", {K, C / groups, FY, FX}, DType::i8, -3, 3, rng);
  ConvAttrs a;
  a.sy = a.sx = stride;
  a.pad_top = a.pad_left = a.pad_bottom = a.pad_right = pad;
  a.groups = groups;
  std::string y = b.conv2d("conv", x, "w", a);
  if (tail) {
    b.random_constant("bias", {K}, DType::i32, -10, 10, rng);
    y = b.node("bias_add", OpKind::bias_add, {y, "bias"});
    y = b.requant("rq", y, {{1}, {0}, 4});
  }
  return {b.build({y})};
}

Graph dense_graph(int64_t C, int64_t K) {
  std::mt19937_64 rng(3);
  GraphBuilder b("dense", Layout::nhwc());
  b.input("x", {1, C}, DType::i8);
  b.random_constant("w", {K, C}, DType::i8, -3, 3, rng);
  b.node("fc", OpKind::dense, {"x", "w"});
  b.requant("rq", "fc", {{1}, {0}, 3});
  return b.build({"rq"});
}

}  // namespace

TEST_CASE("built-in targets: module structure and capacities") {
  TargetModel g = builtin_target("gap9");
  REQUIRE(g.modules.size() == 2);
  const ExecModule& cl = *g.find("cluster");
  const ExecModule& ne = *g.find("ne16");
  CHECK(cl.levels[0].size == 128 * 1024);
  CHECK(cl.levels[0].shared);
  CHECK(cl.top_size() == 1536 * 1024);
  CHECK(cl.levels.back().chunk_overhead == 27);
  CHECK(cl.spatial.unroll == tile(4, 1, 8, 2, 1, 1));
  for (auto& p : ne.patterns) {
    auto same = [&](const PatternSpec& q) { return q.name == p.name && q.steps.size() == p.steps.size(); };
    CHECK(std::any_of(cl.patterns.begin(), cl.patterns.end(), same));
  }
  CHECK(g.activation_layout == Layout::nhwc());

  TargetModel d = builtin_target("diana");
  REQUIRE(d.modules.size() == 1);
  const ExecModule& dg = d.modules[0];
  CHECK(dg.levels[0].size == 256 * 1024);
  CHECK(dg.levels[1].size == 64 * 1024);
  CHECK(dg.levels[1].serves_operand(Operand::W));
  CHECK_FALSE(dg.levels[1].serves_operand(Operand::I));
  CHECK(dg.top_size() == 512 * 1024);
  CHECK(dg.levels.back().chunk_overhead == 70);
  CHECK(dg.spatial.unroll == tile(16, 1, 1, 16, 1, 1));
  CHECK(dg.cost.get("c_elem") == 23);
  CHECK(d.activation_layout == Layout::nchw());
}

TEST_CASE("target description round trip and errors") {
  for (auto name : {"gap9", "diana"}) {
    TargetModel t = builtin_target(name);
    TargetModel r = parse_target(target_to_json(t));
    CHECK(target_to_json(r) == target_to_json(t));
  }
  CHECK_THROWS_AS(load_target("nope"), ConfigError);

  json doc = target_to_json(builtin_target("diana"));
  doc["modules"][0]["api"]["compute"].erase("match_kernel");
  try {
    parse_target(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lacks Computational API binding 'match_kernel'") != std::string::npos);
  }

  json bad = target_to_json(builtin_target("gap9"));
  bad["modules"][0]["cost"]["constants"]["bogus"] = 1;
  CHECK_THROWS_AS(parse_target(bad), ConfigError);

  TargetModel small = with_l1_size(builtin_target("diana"), 8192);
  CHECK(small.modules[0].levels[0].size == 8192);
  CHECK(small.modules[0].levels[1].size == 8192);
  CHECK(small.modules[0].top_size() == 512 * 1024);
}

TEST_CASE("constraint parsing and evaluation") {
  std::map<std::string, std::string> f{{"FX", "3"}, {"FY", "3"}, {"dtype", "i8"}, {"kind", "conv"}};
  CHECK(eval_constraint(parse_constraint("FX = FY"), f));
  CHECK(eval_constraint(parse_constraint("FX in {1, 3}"), f));
  CHECK_FALSE(eval_constraint(parse_constraint("FX in {1}"), f));
  CHECK(eval_constraint(parse_constraint("FX <= 3"), f));
  CHECK_FALSE(eval_constraint(parse_constraint("FX < 3"), f));
  CHECK(eval_constraint(parse_constraint("dtype != i16"), f));
  CHECK(eval_constraint(parse_constraint("kind in {conv, depthwise}"), f));
  CHECK_THROWS_AS(parse_constraint("FX ~ 3"), ConfigError);
}

TEST_CASE("contiguous chunks: examples") {
  std::vector<int64_t> full{32, 32, 64};
  CHECK(contiguous_chunks(std::vector<int64_t>{8, 32, 64}, full) == 1);
  CHECK(contiguous_chunks(std::vector<int64_t>{8, 8, 64}, full) == 8);
  CHECK(contiguous_chunks(full, full) == 1);
  // Canonical NCHW extents placed in an NHWC parent.
  CHECK(contiguous_chunks(std::vector<int64_t>{1, 64, 8, 8}, std::vector<int64_t>{1, 64, 32, 32}, Layout::nhwc()) == 8);
  CHECK(contiguous_chunks(std::vector<int64_t>{1, 64, 8, 32}, std::vector<int64_t>{1, 64, 32, 32}, Layout::nhwc()) == 1);
  CHECK(contiguous_chunks(std::vector<int64_t>{1, 64, 8, 8}, std::vector<int64_t>{1, 64, 32, 32}, Layout::nchw()) == 512);
  CHECK(walk_chunks({8, 8, 64}, full) == 8);
}

TEST_CASE("contiguous chunks: formula matches a linear walk") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 400; ++it) {
    size_t rank = 1 + rng() % 4;
    std::vector<int64_t> full(rank), t(rank);
    for (size_t d = 0; d < rank; ++d) {
      full[d] = 1 + static_cast<int64_t>(rng() % 6);
      t[d] = 1 + static_cast<int64_t>(rng() % full[d]);
    }
    CHECK(contiguous_chunks(t, full) == walk_chunks(t, full));
    CHECK(contiguous_chunks(full, full) == 1);
  }
}

TEST_CASE("transfer cycles") {
  MemoryLevel d;
  d.bandwidth = 8;
  d.chunk_overhead = 70;
  CHECK(transfer_cycles(1024, 1, d) == 198);
  MemoryLevel g;
  g.bandwidth = 8;
  g.chunk_overhead = 27;
  CHECK(transfer_cycles(1024, 16, g) == 560);
  CHECK(transfer_cycles(0, 3, g) == 81);
  CHECK(transfer_cycles(1025, 0, g) == 129);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    MemoryLevel a;
    a.bandwidth = 1 + static_cast<int64_t>(rng() % 16);
    a.chunk_overhead = static_cast<int64_t>(rng() % 100);
    int64_t bytes = static_cast<int64_t>(rng() % 5000), chunks = static_cast<int64_t>(rng() % 40);
    MemoryLevel faster = a, slower = a;
    faster.bandwidth *= 2;
    slower.chunk_overhead += 1;
    CHECK(transfer_cycles(bytes, chunks, faster) <= transfer_cycles(bytes, chunks, a));
    CHECK(transfer_cycles(bytes, chunks, slower) >= transfer_cycles(bytes, chunks, a));
  }
}

TEST_CASE("diana compute model") {
  auto c = builtin_target("diana").modules[0].cost;
  CHECK(diana_tile_cycles(tile(16, 1, 1, 16, 1, 1), c) == 26);
  CHECK(diana_tile_cycles(tile(64, 64, 32, 32, 3, 3), c) == 448256);
  CHECK(diana_tile_cycles(tile(128, 64, 32, 32, 3, 3), c) == 2 * 448256);
  std::vector<DimArray> trace{tile(16, 1, 1, 16, 1, 1), tile(64, 64, 32, 32, 3, 3)};
  CHECK(diana_layer_cycles(trace, c) == 26 + 448256);
}

TEST_CASE("gap9 cluster compute model") {
  auto c = builtin_target("gap9").find("cluster")->cost;
  CHECK(gap9_cluster_tile_cycles(tile(4, 1, 8, 2, 1, 1), c) == 202);
  int64_t setup = c.get("c_setup");
  int64_t one = gap9_cluster_tile_cycles(tile(8, 4, 8, 4, 1, 1), c) - setup;
  int64_t nine = gap9_cluster_tile_cycles(tile(8, 4, 8, 4, 3, 3), c) - setup;
  CHECK(nine == 9 * one);
  CHECK(gap9_cluster_tile_cycles(tile(3, 5, 8, 2, 1, 1), c) == gap9_cluster_tile_cycles(tile(4, 5, 8, 2, 1, 1), c));
}

TEST_CASE("ne16 compute model") {
  auto c = builtin_target("gap9").find("ne16")->cost;
  CHECK(ne16_tile_cycles(tile(32, 16, 3, 3, 3, 3), c) == 359);
  CHECK(ne16_tile_cycles(tile(32, 16, 6, 3, 3, 3), c) == 418);
  CHECK(ne16_tile_cycles(tile(32, 16, 6, 3, 1, 1), c) < ne16_tile_cycles(tile(32, 16, 6, 3, 3, 3), c));
  CHECK_THROWS(ne16_tile_cycles(tile(32, 16, 6, 3, 4, 10), c));
}

TEST_CASE("compute models are additive over unroll-aligned partitions") {
  std::mt19937_64 rng(17);
  for (auto [name, mod] : {std::pair{"diana", "digital"}, {"gap9", "cluster"}, {"gap9", "ne16"}}) {
    CostConstants c = builtin_target(name).find(mod)->cost;
    c.values["c_setup"] = 0;
    const DimArray u = c.model == CostModelId::diana         ? tile(16, 1, 1, 16, 1, 1)
                       : c.model == CostModelId::gap9_cluster ? tile(4, 1, 8, 2, 1, 1)
                                                              : tile(32, 16, 3, 3, 1, 1);
    for (int it = 0; it < 50; ++it) {
      int64_t f = c.model == CostModelId::ne16 ? (rng() % 2 ? 3 : 1) : 1 + static_cast<int64_t>(rng() % 3);
      DimArray a{u[0] * (1 + static_cast<int64_t>(rng() % 3)), u[1] * (1 + static_cast<int64_t>(rng() % 3)),
                 u[2] * (1 + static_cast<int64_t>(rng() % 3)), u[3] * (1 + static_cast<int64_t>(rng() % 3)), f, f};
      for (Dim d : {Dim::K, Dim::OY, Dim::OX}) {
        int64_t blocks = a[idx(d)] / u[idx(d)];
        if (blocks < 2) continue;
        int64_t split = u[idx(d)] * (1 + static_cast<int64_t>(rng() % (blocks - 1)));
        DimArray lo = a, hi = a;
        lo[idx(d)] = split;
        hi[idx(d)] = a[idx(d)] - split;
        CHECK(tile_compute_cycles(c, a) == tile_compute_cycles(c, lo) + tile_compute_cycles(c, hi));
      }
    }
  }
}

TEST_CASE("spatial adaptation") {
  using K = Adaptation::Kind;
  CHECK(choose_spatial_adaptation(8, 8) == Adaptation{K::keep_reduced, 8});
  CHECK(choose_spatial_adaptation(12, 8) == Adaptation{K::keep_reduced, 6});
  CHECK(choose_spatial_adaptation(9, 8) == Adaptation{K::pad_to, 16});
  for (int64_t n = 1; n <= 200; ++n)
    for (int64_t u = 1; u <= 32; ++u) {
      Adaptation a = choose_spatial_adaptation(n, u);
      if (a.kind == K::keep_reduced) {
        CHECK(a.value <= u);
        CHECK(n % a.value == 0);
      } else {
        CHECK(a.value % u == 0);
        CHECK(a.value >= n);
      }
    }
}

TEST_CASE("pattern constraints on gap9 modules") {
  TargetModel t = builtin_target("gap9");
  auto rect = conv_graph(Layout::nhwc(), 16, 16, 8, 13, 4, 10, 1, 0);
  auto sq = conv_graph(Layout::nhwc(), 16, 16, 8, 8, 3, 3, 1, 1);
  auto cands = [&](const Graph& g) {
    std::set<std::string> mods;
    for (auto& c : match_candidates(g, t)) mods.insert(c.module);
    return mods;
  };
  CHECK(cands(rect.g) == std::set<std::string>{"cluster"});
  CHECK(cands(sq.g) == std::set<std::string>{"cluster", "ne16"});
  MatchCandidate ne{"conv2d", "ne16", {"conv", "bias_add", "rq"}, "conv"};
  MatchCandidate cl{"conv2d", "cluster", {"conv", "bias_add", "rq"}, "conv"};
  CHECK_FALSE(check_constraints(ne, rect.g, t));
  CHECK(check_constraints(cl, rect.g, t));
  CHECK(check_constraints(ne, sq.g, t));
  CHECK(check_constraints(cl, sq.g, t));
  // NCHW activations are outside both gap9 tables.
  auto nchw = conv_graph(Layout::nchw(), 16, 16, 8, 8, 3, 3, 1, 1);
  CHECK(match_candidates(nchw.g, t).empty());
}

TEST_CASE("dense gets a cluster candidate only") {
  auto cs = match_candidates(dense_graph(640, 128), builtin_target("gap9"));
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].module == "cluster");
  CHECK(cs[0].node_ids == std::vector<std::string>{"fc", "rq"});
}

TEST_CASE("largest candidate survives") {
  json doc = target_to_json(builtin_target("diana"));
  auto& pats = doc["modules"][0]["patterns"];
  pats = json::array({
      {{"name", "conv_only"}, {"ops", {"conv2d"}}, {"constraints", json::array()}},
      {{"name", "conv_bias_rq"}, {"ops", {"conv2d", "bias_add", "requant"}}, {"constraints", json::array()}},
  });
  TargetModel t = parse_target(doc);
  auto g = conv_graph(Layout::nchw(), 4, 4, 6, 6, 3, 3);
  auto cs = match_candidates(g.g, t);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].pattern == "conv_bias_rq");
  CHECK(cs[0].node_ids.size() == 3);

  // Optional steps: the full chain is the only survivor too.
  auto full = match_candidates(g.g, builtin_target("diana"));
  REQUIRE(full.size() == 1);
  CHECK(full[0].node_ids == std::vector<std::string>{"conv", "bias_add", "rq"});
}

TEST_CASE("module with an empty pattern table yields no candidates") {
  TargetModel t = builtin_target("diana");
  t.modules[0].patterns.clear();
  auto g = conv_graph(Layout::nchw(), 4, 4, 6, 6, 3, 3);
  CHECK(match_candidates(g.g, t).empty());
}

TEST_CASE("depthwise conv is dispatchable on diana") {
  auto g = conv_graph(Layout::nchw(), 16, 16, 8, 8, 3, 3, 1, 1, true, 16);
  auto cs = match_candidates(g.g, builtin_target("diana"));
  REQUIRE(cs.size() == 1);
  CHECK(anchor_kind(g.g, *g.g.find_node("conv")) == KernelKind::depthwise);
}

TEST_CASE("workload extraction") {
  TargetModel t = builtin_target("gap9");
  const ExecModule& cl = *t.find("cluster");
  auto g = conv_graph(Layout::nhwc(), 16, 32, 12, 8, 3, 3, 1, 1);
  MatchCandidate c{"conv2d", "cluster", {"conv", "bias_add", "rq"}, "conv"};
  Workload w = extract_workload(c, g.g, cl);
  CHECK(w.dims == tile(32, 16, 12, 8, 3, 3));
  CHECK(w.spatial[idx(Dim::OY)] == 6);
  CHECK(w.temporal(Dim::OY) == 2);
  CHECK(w.has_bias);
  CHECK(w.has_requant);
  CHECK(w.dtype[idx(Operand::O)] == DType::i8);

  Workload d = extract_workload({"dense", "cluster", {"fc", "rq"}, "fc"}, dense_graph(640, 128), cl);
  CHECK(d.kind == KernelKind::dense);
  CHECK(d.dims == tile(128, 640, 1, 1, 1, 1));

  // diana pads K to the array width.
  TargetModel dt = builtin_target("diana");
  auto g24 = conv_graph(Layout::nchw(), 8, 24, 16, 16, 3, 3, 1, 1);
  Workload w24 = extract_workload({"conv2d", "digital", {"conv", "bias_add", "rq"}, "conv"}, g24.g, dt.modules[0]);
  CHECK(w24.adapted[idx(Dim::K)] == 32);
  CHECK(w24.spatial[idx(Dim::K)] == 16);
  CHECK(w24.adaptation[idx(Dim::K)].kind == Adaptation::Kind::pad_to);
}

TEST_CASE("tile bytes and windows") {
  const TargetModel cl_target = builtin_target("gap9");
  const ExecModule& cl = *cl_target.find("cluster");
  Workload w = make_workload(cl, Layout::nhwc(), KernelKind::conv, {16, 8, 8, 8, 3, 3, 1, 1});
  CHECK(tile_bytes(w, Operand::O, tile(16, 1, 4, 8, 1, 1)) == 512);
  // Input window: OX_t = 4, FX_t = 3 -> 6 columns.
  CHECK(tile_bytes(w, Operand::I, tile(1, 1, 1, 4, 1, 3)) == 6);
  CHECK(tile_bytes(w, Operand::W, tile(16, 8, 1, 1, 3, 3)) == 16 * 8 * 9);
}
