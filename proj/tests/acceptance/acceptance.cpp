// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.
// Usage: acceptance [criterion numbers...]

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "hetcc/builder.hpp"
#include "hetcc/codegen.hpp"
#include "hetcc/cost_model.hpp"
#include "hetcc/graph_io.hpp"
#include "hetcc/interpreter.hpp"
#include "hetcc/layout.hpp"
#include "hetcc/match.hpp"
#include "hetcc/passes.hpp"
#include "hetcc/pipeline.hpp"
#include "hetcc/validate.hpp"
#include "support/c_harness.hpp"
#include "support/layers.hpp"
#include "support/random_graphs.hpp"
#include "support/workloads.hpp"

namespace fs = std::filesystem;
using namespace hetcc;
using namespace hetcc::testing;

namespace {

// First failure wins; `note` collects the summary printed on success.
struct Verdict {
  bool ok = true;
  std::string failure;
  std::string note;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      failure = what;
    }
  }
};

DimArray tile(int64_t K, int64_t C, int64_t OY, int64_t OX, int64_t FY, int64_t FX) { return {K, C, OY, OX, FY, FX}; }

std::string fixture_path(const std::string& name) { return std::string(HETCC_FIXTURE_DIR) + "/" + name + ".json"; }

fs::path work(const std::string& name) {
  fs::path d = fs::path(HETCC_WORK_DIR) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  std::string cmd = std::string(HETCC_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

// Relative path -> contents for every file below `root`.
std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

bool fits_levels(const Schedule& s, const Workload& w, const ExecModule& m) {
  auto fp = schedule_footprint(s, w, m);
  for (size_t l = 0; l < fp.size(); ++l)
    if (fp[l] > m.levels[l].size) return false;
  return true;
}

// ---------------------------------------------------------------------------

Verdict dse_optimality() {
  Verdict v;
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::map<std::string, int> per_target;
  int compared = 0;
  for (int it = 0; it < 60; ++it) {
    RandomWorkload r = random_workload(rng, 8);
    auto got = search_best(r.w, r.exec());
    auto want = brute_force_best(r.w, r.exec());
    v.expect(got.has_value() == want.has_value(), "feasibility differs on workload " + std::to_string(it));
    if (!got || !want) continue;
    v.expect(got->cost.total == want->cost, "cost " + std::to_string(got->cost.total) + " vs oracle " +
                                                std::to_string(want->cost) + " on workload " + std::to_string(it));
    ++compared;
    ++per_target[r.target.name];
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.expect(compared >= 50, "only " + std::to_string(compared) + " feasible workloads");
  v.expect(per_target.size() == 2, "workloads cover one target only");
  v.expect(secs < 60, "took " + std::to_string(secs) + " s");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d workloads (diana %d, gap9 %d) equal to the brute-force oracle in %.1f s",
                compared, per_target["diana"], per_target["gap9"], secs);
  v.note = buf;
  return v;
}

Verdict feasibility() {
  Verdict v;
  std::mt19937_64 rng(7);
  int feasible = 0, violations = 0;
  for (int it = 0; it < 1000; ++it) {
    RandomWorkload r = random_workload(rng);
    auto got = search_best(r.w, r.exec());
    if (!got) continue;
    ++feasible;
    bool ok = fits_levels(got->schedule, r.w, r.exec());
    try {
      check_schedule(got->schedule, r.w, r.exec());
    } catch (const std::exception&) {
      ok = false;
    }
    violations += !ok;
  }
  v.expect(violations == 0, std::to_string(violations) + " violations");
  v.expect(feasible > 0, "no feasible pair");
  v.note = "1000 pairs, " + std::to_string(feasible) + " scheduled, 0 violations";
  return v;
}

Verdict cost_fixtures() {
  Verdict v;
  const TargetModel d = builtin_target("diana");
  const TargetModel g = builtin_target("gap9");
  const CostConstants& dc = d.modules[0].cost;
  const CostConstants& cc = g.find("cluster")->cost;
  const CostConstants& nc = g.find("ne16")->cost;

  v.expect(dc.get("c_elem") == 23, "diana c_elem");
  v.expect(diana_tile_cycles(tile(16, 1, 1, 16, 1, 1), dc) == 26, "diana 16x16 tile");
  v.expect(diana_tile_cycles(tile(64, 64, 32, 32, 3, 3), dc) == 448256, "diana 64x64x32x32x3x3 tile");
  const std::vector<DimArray> trace{tile(16, 1, 1, 16, 1, 1), tile(64, 64, 32, 32, 3, 3)};
  v.expect(diana_layer_cycles(trace, dc) == 26 + 448256,
           "diana layer sum");

  v.expect(gap9_cluster_tile_cycles(tile(4, 1, 8, 2, 1, 1), cc) == 202, "cluster unit tile");
  const int64_t setup = cc.get("c_setup");
  v.expect(gap9_cluster_tile_cycles(tile(8, 4, 8, 4, 3, 3), cc) - setup ==
               9 * (gap9_cluster_tile_cycles(tile(8, 4, 8, 4, 1, 1), cc) - setup),
           "cluster 3x3 is nine 1x1");
  v.expect(gap9_cluster_tile_cycles(tile(3, 5, 8, 2, 1, 1), cc) == gap9_cluster_tile_cycles(tile(4, 5, 8, 2, 1, 1), cc),
           "cluster ceiling on K");

  v.expect(ne16_tile_cycles(tile(32, 16, 3, 3, 3, 3), nc) == 359, "ne16 3x3 block");
  v.expect(ne16_tile_cycles(tile(32, 16, 6, 3, 3, 3), nc) == 418, "ne16 two spatial blocks");
  v.expect(ne16_tile_cycles(tile(32, 16, 6, 3, 1, 1), nc) < ne16_tile_cycles(tile(32, 16, 6, 3, 3, 3), nc),
           "ne16 1x1 cheaper than 3x3");

  v.expect(d.modules[0].levels.back().chunk_overhead == 70, "diana chunk overhead");
  v.expect(g.find("cluster")->levels.back().chunk_overhead == 27, "gap9 chunk overhead");
  MemoryLevel dl;
  dl.bandwidth = 8;
  dl.chunk_overhead = 70;
  v.expect(transfer_cycles(1024, 1, dl) == 198, "transfer 1024 B / 1 chunk at 70");
  MemoryLevel gl;
  gl.bandwidth = 8;
  gl.chunk_overhead = 27;
  v.expect(transfer_cycles(1024, 16, gl) == 560, "transfer 1024 B / 16 chunks at 27");

  const std::vector<int64_t> full{32, 32, 64};
  v.expect(contiguous_chunks(std::vector<int64_t>{8, 32, 64}, full) == 1, "chunks (8,32,64)");
  v.expect(contiguous_chunks(std::vector<int64_t>{8, 8, 64}, full) == 8, "chunks (8,8,64)");

  using K = Adaptation::Kind;
  v.expect(choose_spatial_adaptation(8, 8) == Adaptation{K::keep_reduced, 8}, "adaptation 8/8");
  v.expect(choose_spatial_adaptation(12, 8) == Adaptation{K::keep_reduced, 6}, "adaptation 12/8");
  v.expect(choose_spatial_adaptation(9, 8) == Adaptation{K::pad_to, 16}, "adaptation 9/8");

  v.expect(d.modules[0].spatial.unroll == tile(16, 1, 1, 16, 1, 1), "diana unroll K=16, OX=16");
  v.expect(g.find("cluster")->spatial.unroll == tile(4, 1, 8, 2, 1, 1), "cluster unroll OX=2, K=4, OY=8");
  v.note = "compute, transfer, chunk and adaptation examples exact";
  return v;
}

struct ConvInfo {
  int64_t K = 0, C = 0, FY = 0, FX = 0, groups = 1;
};

std::map<std::string, ConvInfo> conv_nodes(const Graph& g) {
  std::map<std::string, ConvInfo> out;
  for (auto& n : g.nodes) {
    if (n.op != OpKind::conv2d) continue;
    const Constant& w = g.constants.at(n.inputs[1]);
    const auto& s = w.spec.shape;
    ConvInfo c;
    c.groups = conv_attrs(n).groups;
    if (w.spec.layout == Layout::ohwi())
      c = {s[0], s[3], s[1], s[2], c.groups};
    else
      c = {s[0], s[1], s[2], s[3], c.groups};
    c.C *= c.groups;
    out[n.id] = c;
  }
  return out;
}

// node id -> module in the dispatch report ("fallback" for host code).
std::map<std::string, std::string> report_modules(const json& rep) {
  std::map<std::string, std::string> m;
  for (auto& d : rep)
    for (auto& id : d["nodes"]) m[id.get<std::string>()] = d["module"].get<std::string>();
  return m;
}

Verdict dispatch_structure() {
  Verdict v;
  const TargetModel g9 = builtin_target("gap9");
  int dense = 0, rect = 0, deep = 0, dw = 0;
  for (const char* fx : {"resnet8", "dscnn", "mobilenet", "dae"}) {
    Graph raw = load_graph(fixture_path(fx));
    auto rep = dispatch_report(dispatch(prepare_graph(raw, g9), g9), g9);
    auto mods = report_modules(rep);
    auto convs = conv_nodes(raw);
    for (auto& n : raw.nodes) {
      if (n.op == OpKind::dense) {
        ++dense;
        v.expect(mods[n.id] != "ne16", std::string(fx) + ": dense " + n.id + " on ne16");
      }
    }
    for (auto& [id, c] : convs) {
      if ((c.FY == 10 && c.FX == 4) || (c.FY == 4 && c.FX == 10)) {
        ++rect;
        v.expect(mods[id] == "cluster", std::string(fx) + ": " + id + " not on the cluster");
      }
      if (c.FY == 3 && c.FX == 3 && c.groups == 1 && c.C >= 16 && c.K >= 16) {
        ++deep;
        v.expect(mods[id] == "ne16", std::string(fx) + ": 3x3 conv " + id + " on " + mods[id]);
      }
    }
  }
  const TargetModel di = builtin_target("diana");
  for (const char* fx : {"dscnn", "mobilenet"}) {
    Graph raw = load_graph(fixture_path(fx));
    auto mods = report_modules(dispatch_report(dispatch(prepare_graph(raw, di), di), di));
    for (auto& [id, c] : conv_nodes(raw)) {
      if (c.groups == 1 || c.groups != c.C) continue;
      ++dw;
      v.expect(mods[id] == "digital", std::string(fx) + ": depthwise " + id + " on " + mods[id]);
    }
  }
  v.expect(dense > 0 && rect > 0 && deep > 0 && dw > 0, "fixtures lack a checked layer kind");
  v.note = std::to_string(dense) + " dense, " + std::to_string(rect) + " 4x10, " + std::to_string(deep) +
           " deep 3x3 on gap9; " + std::to_string(dw) + " depthwise on diana";
  return v;
}

Verdict l1_scaling() {
  Verdict v;
  const std::vector<int64_t> sizes{128 << 10, 64 << 10, 32 << 10, 16 << 10, 12 << 10, 8 << 10};
  std::string note;
  for (const char* tn : {"gap9", "diana"}) {
    fs::path d = work(std::string("acc_estimate_") + tn);
    auto r = cli("estimate --graph " + fixture_path("resnet8") + " --target " + tn +
                 " --l1-sizes 128k,64k,32k,16k,12k,8k --report " + (d / "e.json").string());
    v.expect(r.code == 0, std::string(tn) + ": estimate exited " + std::to_string(r.code));
    if (r.code != 0) continue;
    json rep = read_json(d / "e.json");
    v.expect(rep["l1_sizes"] == json(sizes), std::string(tn) + ": l1 sizes");
    int fallbacks = 0;
    for (auto& l : rep["layers"]) {
      auto& cols = l["columns"];
      double prev = 0;
      for (size_t k = 0; k < cols.size(); ++k) {
        const bool fb = cols[k]["module"] == "fallback";
        double mpc = fb ? 0.0 : cols[k]["macs_per_cycle"].get<double>();
        if (k > 0)
          v.expect(mpc <= prev, std::string(tn) + ": " + l["node"].get<std::string>() + " rises at column " +
                                    std::to_string(k));
        prev = mpc;
        if (k + 1 == cols.size()) fallbacks += fb;
      }
    }
    v.expect(fallbacks > 0, std::string(tn) + ": no fallback at 8k");
    note += std::string(note.empty() ? "" : "; ") + tn + " " + std::to_string(fallbacks) + " layers fall back at 8k";
  }
  v.note = "non-increasing MACs/cycle; " + note;
  return v;
}

// x -> mul(M) -> add(B) -> div(D) -> clip(lo, 127) -> cast(i8)
Graph chain_graph(int64_t D, int64_t clip_lo) {
  GraphBuilder b("chain");
  std::string x = b.input("x", {1, 4}, DType::i8);
  b.constant("M", {1}, DType::i32, {1});
  b.constant("B", {1}, DType::i32, {0});
  b.constant("D", {1}, DType::i32, {D});
  b.node("mul", OpKind::mul, {x, "M"});
  b.node("add", OpKind::add, {"mul", "B"});
  b.node("div", OpKind::div, {"add", "D"});
  b.node("clip", OpKind::clip, {"div"}, {{"min", clip_lo}, {"max", 127}});
  b.node("cast", OpKind::cast, {"clip"}, {{"dtype", "i8"}});
  return b.build({"cast"});
}

int count_op(const Graph& g, OpKind op) {
  int n = 0;
  for (auto& node : g.nodes) n += node.op == op;
  return n;
}

TensorMap filled(const Graph& g, int64_t x) {
  TensorMap m;
  for (auto& t : g.inputs) m[t.name] = std::vector<int64_t>(static_cast<size_t>(t.numel()), x);
  return m;
}

bool equivalent(const Graph& before, const Graph& after, std::mt19937_64& rng) {
  if (!validate_graph(after).empty()) return false;
  auto canon = random_inputs(before, rng);
  TensorMap cin;
  for (auto& t : before.inputs) cin[t.name] = to_canonical(t, canon.at(t.name));
  auto ref = canonical_outputs(before, interpret_graph(before, canon));
  auto got = canonical_outputs(after, interpret_graph(after, physical_inputs(after, cin)));
  return got == ref;
}

Verdict transformation_semantics() {
  Verdict v;
  std::mt19937_64 rng(2024);
  const TargetModel targets[] = {builtin_target("gap9"), builtin_target("diana")};
  int fired = 0;
  for (int i = 0; i < 100; ++i) {
    const std::string tag = "graph " + std::to_string(i);
    Graph g = random_graph(rng);
    auto in = random_inputs(g, rng);
    auto ref = interpret_graph(g, in);
    Graph f = fold_constants_and_dce(g);
    v.expect(validate_graph(f).empty() && interpret_graph(f, in) == ref, tag + ": fold/dce");
    v.expect(fold_constants_and_dce(f) == f, tag + ": fold/dce not idempotent");
    Graph r = rewrite_requant(f, true);
    v.expect(validate_graph(r).empty() && interpret_graph(r, in) == ref, tag + ": requant rewrite");
    if (count_op(r, OpKind::div) < count_op(f, OpKind::div)) {
      ++fired;
      for (int64_t x = -128; x <= 127; ++x)
        v.expect(interpret_graph(r, filled(r, x)) == interpret_graph(f, filled(f, x)),
                 tag + ": strict rewrite differs at x=" + std::to_string(x));
    }
    Graph l = transform_layout(r, Layout::nhwc());
    v.expect(canonical_outputs(l, interpret_graph(l, physical_inputs(l, in))) == canonical_outputs(r, ref),
             tag + ": layout");
    for (auto& t : targets) {
      Graph p = prepare_graph(g, t);
      for (auto& m : t.modules)
        v.expect(equivalent(g, apply_module_transforms(p, m), rng), tag + ": module transforms for " + m.name);
    }
  }
  v.expect(fired > 0, "strict rewrite never fired");

  // A truncating div a flooring shift cannot replace: x = -15, D = 8.
  Graph ce = chain_graph(8, -128);
  v.expect(count_op(rewrite_requant(ce, true), OpKind::requant) == 0, "strict rewrite fired on the counterexample");
  Graph loose = rewrite_requant(ce, false);
  v.expect(interpret_graph(ce, filled(ce, -15)) != interpret_graph(loose, filled(loose, -15)),
           "counterexample does not separate the semantics");
  Graph safe = chain_graph(8, 0);
  Graph sr = rewrite_requant(safe, true);
  v.expect(count_op(sr, OpKind::requant) == 1, "strict rewrite missed a non-negative clip");
  for (int64_t x = -128; x <= 127; ++x)
    v.expect(interpret_graph(sr, filled(sr, x)) == interpret_graph(safe, filled(safe, x)),
             "non-negative clip rewrite differs at x=" + std::to_string(x));

  std::mt19937_64 q(7);
  std::uniform_int_distribution<int64_t> dm(-(1 << 15), 1 << 15), db(-(1 << 20), 1 << 20), ds(0, 31);
  int64_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t M = dm(q), B = db(q), S = ds(q);
    for (int64_t x = -128; x <= 127; ++x) {
      __int128 val = static_cast<__int128>(x) * M + B;
      __int128 d = static_cast<__int128>(1) << S;
      __int128 fl = val / d;
      if (val % d != 0 && val < 0) --fl;
      int64_t want = fl < -128 ? -128 : fl > 127 ? 127 : static_cast<int64_t>(fl);
      v.expect(requant_value(x, M, B, S) == want, "requant oracle mismatch");
      ++checked;
    }
  }
  v.note = "100 graphs preserved, " + std::to_string(fired) + " strict rewrites exact on all x, " +
           std::to_string(checked) + " requant values exact";
  return v;
}

Verdict transfer_consistency() {
  Verdict v;
  std::mt19937_64 rng(22);
  const LayerFamily fams[] = {LayerFamily::conv, LayerFamily::depthwise, LayerFamily::dense, LayerFamily::add};
  int checked = 0, tiled = 0;
  for (int trial = 0; checked < 20 && trial < 200; ++trial) {
    auto t = with_l1_size(builtin_target(trial % 2 ? "gap9" : "diana"), 4096 << (trial % 3));
    auto fam = fams[trial % 4];
    // Layers larger than the cap so that most schedules tile.
    LayerShape s = random_layer_shape(fam, rng);
    s.C *= 4;
    s.K *= 4;
    s.H += 8;
    s.W += 8;
    auto pg = dispatch(prepare_graph(layer_graph(fam, s, rng), t), t);
    for (auto& d : pg.decisions) {
      if (!d.assigned || checked >= 20) continue;
      auto& m = t.modules[d.module_index];
      auto plan = plan_layer(d.schedule, d.workload, m);
      auto ev = execute_plan(plan);
      for (Operand o : kAllOperands)
        v.expect(ev.transfers[idx(o)] == d.cost.l_mem[idx(o)][0].transfers,
                 "layer " + std::to_string(checked) + " operand " + std::to_string(idx(o)));
      v.expect(ev.kernel_calls == d.cost.kernel_calls, "layer " + std::to_string(checked) + " kernel calls");
      tiled += plan.kernel_cut < static_cast<int>(plan.temporal.size());
      ++checked;
    }
  }
  v.expect(checked == 20, "only " + std::to_string(checked) + " dispatched layers");
  v.expect(tiled >= 10, "only " + std::to_string(tiled) + " tiled layers");
  v.note = std::to_string(checked) + " layers (" + std::to_string(tiled) + " tiled) match the cost model";
  return v;
}

Verdict generated_code() {
  Verdict v;
  constexpr LayerFamily fams[] = {LayerFamily::conv, LayerFamily::depthwise, LayerFamily::dense,
                                  LayerFamily::add,  LayerFamily::pool,      LayerFamily::elementwise};
  auto t0 = std::chrono::steady_clock::now();
  int runs = 0;
  for (const char* name : {"diana", "gap9"}) {
    TargetModel t = builtin_target(name);
    std::mt19937_64 rng(31);
    auto check = [&](const GeneratedRun& r, const std::string& what) {
      v.expect(r.built && r.ran && r.outputs_match && r.counters_match, what + ": " + r.detail);
      ++runs;
    };
    for (int i = 0; i < 20; ++i) {
      LayerFamily f = fams[i % 6];
      Graph g = layer_graph(f, random_layer_shape(f, rng), rng);
      auto in = random_inputs(g, rng);
      check(run_generated(g, t, in, fs::path(HETCC_WORK_DIR) / (std::string("acc_") + name + std::to_string(i))),
            std::string(name) + " layer " + std::to_string(i));
    }
    for (const char* fx : {"resnet8", "dscnn", "mobilenet", "dae"}) {
      Graph g = load_graph(fixture_path(fx));
      check(run_generated(g, t, random_inputs(g, rng), fs::path(HETCC_WORK_DIR) / (std::string("acc_") + name + fx)),
            std::string(name) + " " + fx);
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.expect(secs < 300, "took " + std::to_string(secs) + " s");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d programs bit-exact with matching copy counters in %.1f s", runs, secs);
  v.note = buf;
  return v;
}

Verdict determinism() {
  Verdict v;
  struct Case {
    std::string graph, target, flags;
  };
  const Case cases[] = {
      {"resnet8", "gap9", ""},
      {"dscnn", "diana", ""},
      {"mobilenet", "gap9", "--emit-test-backend"},
      {"resnet8", "gap9", "--search genetic --seed 42"},
      {"dscnn", "diana", "--search genetic --seed 7"},
  };
  int k = 0;
  for (auto& c : cases) {
    std::string base = "compile --graph " + fixture_path(c.graph) + " --target " + c.target + " " + c.flags;
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* th : {"1", "1", "3"}) {
      fs::path d = work("acc_det_" + std::to_string(k++));
      auto r = cli(base + " --threads " + th + " --out " + d.string());
      v.expect(r.code == 0, c.graph + " " + c.flags + ": exit " + std::to_string(r.code));
      trees.push_back(read_tree(d));
    }
    v.expect(!trees[0].empty(), c.graph + ": empty output");
    v.expect(trees[0].count("report.json") == 1, c.graph + ": no report");
    v.expect(trees[0] == trees[1], c.graph + " " + c.flags + ": repeated runs differ");
    v.expect(trees[0] == trees[2], c.graph + " " + c.flags + ": thread count changes the output");
  }
  v.note = std::to_string(std::size(cases)) + " configurations byte-identical across runs and thread counts";
  return v;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const std::vector<Criterion> all = {
      {1, "DSE optimality", dse_optimality},
      {2, "schedule feasibility", feasibility},
      {3, "cost-model fixtures", cost_fixtures},
      {4, "dispatch structure", dispatch_structure},
      {5, "L1 scaling", l1_scaling},
      {6, "transformation semantics", transformation_semantics},
      {7, "transfer-count consistency", transfer_consistency},
      {8, "generated-code equivalence (secondary)", generated_code},
      {9, "determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %-40s %s  (%.1fs) %s\n", c.id, c.name, v.ok ? "PASS" : "FAIL", secs,
                v.ok ? v.note.c_str() : v.failure.c_str());
    failed += !v.ok;
  }
  return failed ? 1 : 0;
}
