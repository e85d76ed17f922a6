#include "support/random_graphs.hpp"

#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc::testing {

namespace {

int64_t pick(std::mt19937_64& rng, int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); }

struct Gen {
  std::mt19937_64& rng;
  GraphBuilder b{"random"};
  int counter = 0;
  std::string fresh(const char* p) { return std::string(p) + std::to_string(counter++); }

  // i32 -> i8 tail: a requant node, or the unfused mul/add/div/clip/cast form.
  std::string tail(const std::string& x, int64_t channels, bool chains) {
    std::string v = x;
    if (pick(rng, 0, 2) == 0) v = b.node(fresh("relu"), OpKind::relu, {v});
    if (chains && pick(rng, 0, 1) == 0) {
      int64_t per = pick(rng, 0, 1) ? channels : 1;
      auto m = b.random_constant(fresh("M"), {per}, DType::i32, -64, 256, rng);
      auto bb = b.random_constant(fresh("B"), {per}, DType::i32, -4096, 4096, rng);
      int64_t d = pick(rng, 0, 4) == 0 ? pick(rng, 3, 300) : (int64_t{1} << pick(rng, 0, 12));
      auto dc = b.constant(fresh("D"), {1}, DType::i32, {d});
      v = b.node(fresh("mul"), OpKind::mul, {v, m});
      v = b.node(fresh("add"), OpKind::add, {v, bb});
      v = b.node(fresh("div"), OpKind::div, {v, dc});
      int64_t lo = pick(rng, 0, 1) ? 0 : -128;
      v = b.node(fresh("clip"), OpKind::clip, {v}, {{"min", lo}, {"max", 127}});
      return b.node(fresh("cast"), OpKind::cast, {v}, {{"dtype", "i8"}});
    }
    RequantAttrs q;
    int64_t per = pick(rng, 0, 1) ? channels : 1;
    for (int64_t i = 0; i < per; ++i) {
      q.M.push_back(pick(rng, 1, 255));
      q.B.push_back(pick(rng, -2048, 2048));
    }
    q.S = pick(rng, 4, 12);
    if (pick(rng, 0, 3) == 0) q.min = 0;
    return b.requant(fresh("rq"), v, q);
  }
};

}  // namespace

Graph random_graph(std::mt19937_64& rng, const RandomGraphOptions& opt) {
  Gen g{rng};
  int64_t C = pick(rng, 1, 6), H = pick(rng, 3, 9), W = pick(rng, 3, 9);
  std::string x = g.b.input("x", {1, C, H, W});
  std::vector<std::string> outputs;
  int layers = static_cast<int>(pick(rng, 1, 3));
  for (int l = 0; l < layers; ++l) {
    bool dw = C > 1 && pick(rng, 0, 3) == 0;
    int64_t K = dw ? C : pick(rng, 1, 8);
    int64_t F = pick(rng, 0, 1) ? 3 : 1;
    ConvAttrs a;
    a.sy = a.sx = (H >= 5 && pick(rng, 0, 3) == 0) ? 2 : 1;
    a.pad_top = a.pad_left = a.pad_bottom = a.pad_right = (F == 3 && pick(rng, 0, 1)) ? 1 : 0;
    if (F > H + a.pad_top + a.pad_bottom || F > W + a.pad_left + a.pad_right) F = 1;
    a.groups = dw ? C : 1;
    std::string w;
    std::vector<int64_t> wshape{K, dw ? 1 : C, F, F};
    if (pick(rng, 0, 4) == 0) {
      // Constant-foldable weight chain.
      auto raw = g.b.random_constant(g.fresh("wraw"), wshape, DType::i32, -100, 100, rng);
      w = g.b.node(g.fresh("wcast"), OpKind::cast, {raw}, {{"dtype", "i8"}});
    } else {
      w = g.b.random_constant(g.fresh("w"), wshape, DType::i8, -128, 127, rng);
    }
    std::string y = g.b.conv2d(g.fresh("conv"), x, w, a);
    if (pick(rng, 0, 1)) y = g.b.node(g.fresh("bias"), OpKind::bias_add,
                                      {y, g.b.random_constant(g.fresh("b"), {K}, DType::i32, -500, 500, rng)});
    std::string z = g.tail(y, K, opt.allow_requant_chains);
    H = window_out(H, a.pad_top, a.pad_bottom, F, 1, a.sy);
    W = window_out(W, a.pad_left, a.pad_right, F, 1, a.sx);
    if (K == C && pick(rng, 0, 2) == 0) {
      // Residual add over equal shapes: only when spatial dims are kept.
      if (a.sy == 1 && F == 1) {
        std::string s = g.b.node(g.fresh("res"), OpKind::add, {z, x});
        z = g.tail(s, K, opt.allow_requant_chains);
      }
    }
    if (opt.allow_dead_nodes && pick(rng, 0, 5) == 0) g.b.node(g.fresh("dead"), OpKind::relu, {z});
    x = z;
    C = K;
  }
  if (opt.allow_pooling && H >= 2 && W >= 2 && pick(rng, 0, 1)) {
    bool avg = pick(rng, 0, 1);
    x = g.b.node(g.fresh(avg ? "avg" : "max"), avg ? OpKind::avgpool2d : OpKind::maxpool2d, {x},
                 {{"kernel", {2, 2}}, {"strides", {2, 2}}});
    H /= 2;
    W /= 2;
  }
  if (opt.allow_dense_head && pick(rng, 0, 1)) {
    std::string f = g.b.node(g.fresh("flat"), OpKind::flatten, {x});
    int64_t N = pick(rng, 1, 10);
    auto w = g.b.random_constant(g.fresh("fcw"), {N, C * H * W}, DType::i8, -128, 127, rng);
    std::string d = g.b.node(g.fresh("fc"), OpKind::dense, {f, w});
    x = g.tail(d, N, opt.allow_requant_chains);
  }
  outputs.push_back(x);
  return g.b.build(outputs);
}

TensorMap random_inputs(const Graph& g, std::mt19937_64& rng) {
  TensorMap m;
  for (auto& t : g.inputs) {
    std::uniform_int_distribution<int64_t> d(dtype_min(t.dtype), dtype_max(t.dtype));
    auto& v = m[t.name];
    v.resize(t.numel());
    for (auto& e : v) e = d(rng);
  }
  return m;
}

TensorMap canonical_outputs(const Graph& g, const TensorMap& physical) {
  auto specs = infer_specs(g);
  TensorMap out;
  for (auto& [name, v] : physical) out[name] = to_canonical(specs.at(name), v);
  return out;
}

TensorMap physical_inputs(const Graph& g, const TensorMap& canonical) {
  TensorMap out;
  for (auto& t : g.inputs) out[t.name] = from_canonical(t, canonical.at(t.name));
  return out;
}

}  // namespace hetcc::testing
