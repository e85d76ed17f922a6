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

#include "hetcc/codegen.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "c_sources.hpp"
#include "hetcc/layout.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

namespace {

std::string c_ident(std::string_view s) {
  std::string out;
  for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "_" + out;
  return out;
}

std::string ctype(DType t) { return t == DType::i8 ? "int8_t" : "int32_t"; }

// C symbols for constants and arena values, unique per graph.
struct Symbols {
  std::map<std::string, std::string> constant, value;

  explicit Symbols(const Graph& g) {
    std::set<std::string> used;
    auto unique = [&](std::string base) {
      std::string s = base;
      for (int k = 2; used.count(s); ++k) s = base + "_" + std::to_string(k);
      used.insert(s);
      return s;
    };
    for (auto& [name, c] : g.constants) constant[name] = unique("c_" + c_ident(name));
    for (auto& in : g.inputs) value[in.name] = unique("HETCC_OFF_" + c_ident(in.name));
    for (auto& n : g.nodes) value[n.id] = unique("HETCC_OFF_" + c_ident(n.id));
  }
};

struct ApiSig {
  const char* generic;
  const char* ret;
  const char* params;
  const char* args;
};

constexpr ApiSig kSigs[] = {
    {"match_platform_init", "void", "void", ""},
    {"match_platform_close", "void", "void", ""},
    {"match_mem_alloc_l1", "void*", "unsigned bytes", "bytes"},
    {"match_mem_free_l1", "void", "void* p", "p"},
    {"match_mem_copy", "void",
     "void* dst, const void* src, unsigned bytes, unsigned chunks, unsigned src_stride, unsigned dst_stride",
     "dst, src, bytes, chunks, src_stride, dst_stride"},
    {"match_mem_transfer_begin", "void", "const char* layer, int operand", "layer, operand"},
    {"match_mem_transfer_end", "void", "void", ""},
    {"match_sync_transfers", "void", "void", ""},
    {"match_sync_compute", "void", "void", ""},
};

bool is_generic_api(std::string_view s) {
  for (auto& a : kSigs)
    if (s == a.generic) return true;
  return false;
}

// Replaces generic API identifiers (outside string literals) with the
// module's bound names.
std::string bind_api(const std::string& text, const ExecModule& m) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    char ch = text[i];
    if (ch == '"') {
      size_t j = i + 1;
      while (j < text.size() && text[j] != '"') j += text[j] == '\\' ? 2 : 1;
      out.append(text, i, j + 1 - i);
      i = j + 1;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      std::string id = text.substr(i, j - i);
      if (is_generic_api(id))
        out += m.api.resolve(id);
      else if (id.rfind("match_kernel_", 0) == 0)
        out += m.api.resolve("match_kernel") + id.substr(12);
      else
        out += id;
      i = j;
      continue;
    }
    out += ch;
    ++i;
  }
  return out;
}

struct CWriter {
  std::ostringstream os;
  int depth = 0;
  void line(const std::string& s) {
    for (int i = 0; i < depth; ++i) os << "  ";
    os << s << "\n";
  }
  void open(const std::string& s) {
    line(s + " {");
    ++depth;
  }
  void close(const std::string& tail = "") {
    --depth;
    line("}" + tail);
  }
  std::string str() const { return os.str(); }
};

void append_numbers(std::string& out, const std::vector<int64_t>& v) {
  char buf[32];
  for (size_t i = 0; i < v.size(); ++i) {
    if (i % 24 == 0) out += "\n  ";
    auto r = std::to_chars(buf, buf + sizeof buf, v[i]);
    out.append(buf, r.ptr);
    if (i + 1 < v.size()) out += i % 24 == 23 ? "," : ", ";
  }
  out += "\n";
}

std::string array_def(const std::string& qual, const std::string& type, const std::string& sym,
                      const std::vector<int64_t>& v) {
  std::string out = qual + type + " " + sym + "[" + std::to_string(std::max<size_t>(v.size(), 1)) + "] = {";
  if (v.empty())
    out += "0";
  else
    append_numbers(out, v);
  out += "};\n";
  return out;
}

std::string dims_list(const DimArray& a) {
  std::string s;
  for (int d = 0; d < kNumDims; ++d) s += (d ? ", " : "") + std::to_string(a[d]);
  return s;
}

// Non-constant values a decision reads, in argument order.
std::vector<std::string> layer_inputs(const Graph& g, const DispatchDecision& d) {
  std::vector<std::string> v;
  const Node* a = g.find_node(d.node_ids[0]);
  if (d.assigned) {
    for (size_t k = 1; k < d.node_ids.size(); ++k)
      for (size_t j = 1; j < g.find_node(d.node_ids[k])->inputs.size(); ++j)
        HETCC_CHECK(g.is_constant(g.find_node(d.node_ids[k])->inputs[j]),
                    "fused tail operand of '" + d.node_ids[k] + "' is not a constant");
  }
  for (auto& in : a->inputs)
    if (!g.is_constant(in)) v.push_back(in);
  return v;
}

int weight_layout_code(const TensorSpec& w, KernelKind kind) {
  if (kind == KernelKind::dense) return 4;
  switch (w.layout.kind) {
    case Layout::Kind::OHWI: return 1;
    case Layout::Kind::Custom:
      if (w.layout.custom == "diana_kblock16") return 2;
      if (w.layout.custom == "ne16_cblock16") return 3;
      throw ConfigError("unknown custom weight layout '" + w.layout.custom + "'");
    default: return 0;
  }
}

const char* kind_code(KernelKind k) {
  switch (k) {
    case KernelKind::conv: return "0";
    case KernelKind::depthwise: return "1";
    case KernelKind::dense: return "2";
    default: return "3";
  }
}

// ---------------------------------------------------------------------------
// Assigned layers.

struct LayerEmitter {
  const Graph& g;
  const DispatchDecision& d;
  const ExecModule& m;
  const Symbols& sym;
  const std::map<std::string, TensorSpec>& specs;
  std::string name;
  LayerPlan lp;
  CWriter w;
  std::string statics;

  const char* buf(Operand o) const { return o == Operand::I ? "I" : o == Operand::W ? "W" : "O"; }
  std::string src(Operand o) const {
    if (o == Operand::I) return "x0";
    if (o == Operand::W) return d.workload.kind == KernelKind::add ? "x1" : sym.constant.at(g.find_node(d.anchor)->inputs[1]);
    return "y";
  }
  int64_t buf_bytes(Operand o) const { return tile_bytes(d.workload, o, operand_tile(d.schedule, o, 0)); }
  bool dbl(Operand o) const { return lp.buffering[idx(o)] == Buffering::dbl; }
  std::string cut(Operand o) const { return std::to_string(lp.cut[idx(o)]); }
  std::string cur(Operand o) const {
    return dbl(o) ? "(int)(hetcc_linear(&L, it, " + cut(o) + ") & 1)" : "0";
  }
  std::string count(Operand o) const {
    int64_t c = 1;
    for (size_t q = lp.cut[idx(o)]; q < lp.temporal.size(); ++q) c *= lp.temporal[q].factor;
    return std::to_string(c);
  }
  std::string op_id(Operand o) const { return std::to_string(idx(o)); }

  void fetch(Operand o, const std::string& slot, const std::string& iters) {
    const std::string b = buf(o);
    w.line("match_mem_transfer_begin(\"" + name + "\", " + op_id(o) + ");");
    w.line("hetcc_fetch(match_mem_copy, &k, " + op_id(o) + ", " + b + "_buf + " + slot + " * " + b + "_SZ, " + src(o) +
           ", &L, " + iters + ", " + cut(o) + ", T_" + b + ", " + b + "_bo[" + slot + "], " + b + "_be[" + slot +
           "]);");
    w.line("match_mem_transfer_end();");
  }

  void stmt(const PlanNode& s) {
    using K = PlanNode::Kind;
    switch (s.kind) {
      case K::loop: {
        std::string p = std::to_string(s.pos);
        w.open("for (it[" + p + "] = 0; it[" + p + "] < " + std::to_string(lp.temporal[s.pos].factor) + "; ++it[" +
               p + "])");
        for (auto& c : s.body) stmt(c);
        w.close();
        break;
      }
      case K::load: fetch(s.operand, "0", "it"); break;
      case K::prologue:
        w.open("if (hetcc_linear(&L, it, " + cut(s.operand) + ") == 0)");
        fetch(s.operand, "0", "it");
        w.close();
        break;
      case K::prefetch:
        w.open("");
        w.line("int64_t t = hetcc_linear(&L, it, " + cut(s.operand) + ");");
        w.open("if (t + 1 < " + count(s.operand) + ")");
        w.line("int64_t nx[NLOOPS];");
        w.line("int b = (int)((t + 1) & 1);");
        w.line("hetcc_next(&L, it, " + cut(s.operand) + ", nx);");
        fetch(s.operand, "b", "nx");
        w.close();
        w.close();
        break;
      case K::wait: w.line("match_sync_transfers();"); break;
      case K::kernel:
        w.open("");
        w.line("int64_t org[6];");
        w.line("int b;");
        for (Operand o : {Operand::I, Operand::W}) {
          std::string b = buf(o), lo(1, static_cast<char>(std::tolower(b[0])));
          w.line("b = " + cur(o) + ";");
          w.line("k." + b + " = " + b + "_buf + b * " + b + "_SZ;");
          w.line("memcpy(k." + lo + "_org, " + b + "_bo[b], sizeof k." + lo + "_org);");
          w.line("memcpy(k." + lo + "_ext, " + b + "_be[b], sizeof k." + lo + "_ext);");
        }
        w.line("b = " + cur(Operand::O) + ";");
        w.line("k.O = O_buf + b * O_SZ;");
        w.line("hetcc_origin(&L, it, " + cut(Operand::O) + ", org);");
        w.line("hetcc_box(&k, 2, org, T_O, k.o_org, k.o_ext);");
        w.line("hetcc_origin(&L, it, " + std::to_string(lp.kernel_cut) + ", k.t_org);");
        w.line("match_kernel_" + c_ident(d.pattern) + "(&k);");
        w.close();
        break;
      case K::sync_compute: w.line("match_sync_compute();"); break;
      case K::store:
        w.open("");
        w.line("int64_t org[6], bo[3], be[3];");
        w.line("int b = " + cur(Operand::O) + ";");
        w.line("hetcc_origin(&L, it, " + cut(Operand::O) + ", org);");
        w.line("hetcc_box(&k, 2, org, T_O, bo, be);");
        w.line("match_mem_transfer_begin(\"" + name + "\", 2);");
        w.line("hetcc_store(match_mem_copy, &k, O_buf + b * O_SZ, y, bo, be);");
        w.line("match_mem_transfer_end();");
        w.close();
        break;
    }
  }

  std::string run() {
    const Workload& wl = d.workload;
    const Schedule& s = d.schedule;
    lp = plan_layer(s, wl, m);
    const Node& a = *g.find_node(d.anchor);
    const TensorSpec& in = specs.at(a.inputs[0]);
    const TensorSpec& wt = specs.at(a.inputs[1]);
    const TensorSpec& out = specs.at(d.node_ids.back());
    const int n = static_cast<int>(lp.temporal.size());
    const int nl = std::max(n, 1);

    std::ostringstream head;
    head << "/* " << name << ": " << d.pattern << " on " << m.name << " (";
    for (size_t i = 0; i < d.node_ids.size(); ++i) head << (i ? ", " : "") << d.node_ids[i];
    head << ")\n * " << schedule_digest(s, m) << " */\n";
    head << "#include \"match_api.h\"\n#include \"hetcc_runtime.h\"\n#include \"weights.h\"\n\n";
    head << "#define NLOOPS " << nl << "\n\n";

    std::vector<int64_t> radix, stride, dimv;
    DimArray step = s.spatial;
    for (auto& f : lp.temporal) {
      radix.push_back(f.factor);
      dimv.push_back(idx(f.dim));
      stride.push_back(step[idx(f.dim)]);
      step[idx(f.dim)] *= f.factor;
    }
    statics += array_def("static const ", "int64_t", "radix", radix);
    statics += array_def("static const ", "int", "dimv", dimv);
    statics += array_def("static const ", "int64_t", "stride", stride);
    statics += "static const hetcc_nest L = {" + std::to_string(n) + ", radix, dimv, stride};\n";
    for (Operand o : kAllOperands)
      statics += std::string("static const int64_t T_") + buf(o) + "[6] = {" + dims_list(operand_tile(s, o, 0)) +
                 "};\n";
    statics += "static const int64_t T_K[6] = {" + dims_list(lp.kernel_tile) + "};\n";
    for (Operand o : kAllOperands)
      statics += std::string("#define ") + buf(o) + "_SZ " + std::to_string(buf_bytes(o)) + "\n";

    std::vector<std::string> params;
    auto inputs = layer_inputs(g, d);
    for (size_t i = 0; i < inputs.size(); ++i) params.push_back("const void* x" + std::to_string(i));
    params.push_back("void* y");
    std::string sig;
    for (size_t i = 0; i < params.size(); ++i) sig += (i ? ", " : "") + params[i];

    w.open("void " + name + "(" + sig + ")");
    w.line("match_layer_ctx k;");
    w.line("int64_t it[NLOOPS] = {0};");
    w.line("int64_t I_bo[2][3], I_be[2][3], W_bo[2][3], W_be[2][3];");
    w.line("char *I_buf, *W_buf, *O_buf, *S_buf = 0;");
    w.line("(void)it;");
    w.line("memset(&k, 0, sizeof k);");
    w.line(std::string("k.kind = ") + kind_code(wl.kind) + ";");
    w.line(std::string("k.act_nhwc = ") + (in.layout.kind == Layout::Kind::NHWC ? "1" : "0") + ";");
    w.line("k.w_layout = " + std::to_string(weight_layout_code(wt, wl.kind)) + ";");
    w.line("k.i_es = " + std::to_string(dtype_bytes(in.dtype)) + ", k.w_es = " + std::to_string(dtype_bytes(wt.dtype)) +
           ", k.o_es = " + std::to_string(dtype_bytes(out.dtype)) + ";");
    for (int dd = 0; dd < kNumDims; ++dd) w.line("k.dims[" + std::to_string(dd) + "] = " + std::to_string(wl.adapted[dd]) + ";");
    w.line("k.IY = " + std::to_string(wl.IY) + ", k.IX = " + std::to_string(wl.IX) + ";");
    w.line("k.sy = " + std::to_string(wl.sy) + ", k.sx = " + std::to_string(wl.sx) + ", k.dy = " +
           std::to_string(wl.dy) + ", k.dx = " + std::to_string(wl.dx) + ";");
    w.line("k.pad_top = " + std::to_string(wl.pad_top) + ", k.pad_left = " + std::to_string(wl.pad_left) + ";");
    w.line("memcpy(k.t_ext, T_K, sizeof k.t_ext);");
    int nt = 0;
    for (size_t i = 1; i < d.node_ids.size(); ++i) {
      const Node& t = *g.find_node(d.node_ids[i]);
      std::string slot = "k.tail[" + std::to_string(nt++) + "] = ";
      if (t.op == OpKind::bias_add) {
        w.line(slot + "1;");
        w.line("k.bias = " + sym.constant.at(t.inputs[1]) + ", k.bias_es = " +
               std::to_string(dtype_bytes(specs.at(t.inputs[1]).dtype)) + ";");
      } else if (t.op == OpKind::requant) {
        auto r = requant_attrs(t);
        statics += array_def("static const ", "int64_t", "rq_M", r.M);
        statics += array_def("static const ", "int64_t", "rq_B", r.B);
        w.line(slot + "2;");
        w.line("k.M = rq_M, k.B = rq_B, k.m_n = " + std::to_string(r.M.size()) + ", k.b_n = " +
               std::to_string(r.B.size()) + ";");
        w.line("k.S = " + std::to_string(r.S) + ", k.lo = " + std::to_string(r.min) + ", k.hi = " +
               std::to_string(r.max) + ";");
      } else if (t.op == OpKind::relu) {
        w.line(slot + "3;");
      } else {
        throw InternalError("unsupported fused op '" + std::string(op_name(t.op)) + "'");
      }
    }
    w.line("k.n_tail = " + std::to_string(nt) + ";");
    w.line("match_platform_init();");
    for (Operand o : kAllOperands) {
      std::string b = buf(o);
      w.line(b + "_buf = (char*)match_mem_alloc_l1(" + (dbl(o) ? "2 * " : "") + b + "_SZ);");
    }
    int64_t scratch = scratch_bytes(wl, m);
    if (scratch > 0) {
      w.line("S_buf = (char*)match_mem_alloc_l1(" + std::to_string(scratch) + ");");
      w.line("k.scratch = S_buf;");
    }
    for (auto& st : lp.body) stmt(st);
    if (scratch > 0) w.line("match_mem_free_l1(S_buf);");
    w.line("match_mem_free_l1(O_buf);");
    w.line("match_mem_free_l1(W_buf);");
    w.line("match_mem_free_l1(I_buf);");
    w.line("(void)S_buf;");
    w.line("match_platform_close();");
    w.close();
    return bind_api(head.str() + statics + "\n" + w.str(), m);
  }
};

// ---------------------------------------------------------------------------
// Fallback layers.

std::string idx_var(size_t d) { return "i" + std::to_string(d); }

// Physical offset of a canonical index.
std::string phys(const TensorSpec& s, const std::vector<std::string>& ci) {
  auto cs = canonical_shape(s);
  HETCC_CHECK(cs.size() == ci.size(), "index rank mismatch for '" + s.name + "'");
  if (s.layout.kind == Layout::Kind::Custom)
    throw InternalError("fallback code cannot address custom layout of '" + s.name + "'");
  std::vector<size_t> order(cs.size());
  for (size_t d = 0; d < cs.size(); ++d) order[d] = d;
  if (cs.size() == 4 && (s.layout.kind == Layout::Kind::NHWC || s.layout.kind == Layout::Kind::OHWI))
    order = {0, 2, 3, 1};
  std::string e = ci[order[0]];
  for (size_t j = 1; j < order.size(); ++j)
    e = "(" + e + ") * " + std::to_string(cs[order[j]]) + " + " + ci[order[j]];
  return e;
}

std::vector<std::string> vars(size_t r) {
  std::vector<std::string> v;
  for (size_t d = 0; d < r; ++d) v.push_back(idx_var(d));
  return v;
}

void open_loops(CWriter& w, const std::vector<int64_t>& shape) {
  for (size_t d = 0; d < shape.size(); ++d)
    w.open("for (int64_t " + idx_var(d) + " = 0; " + idx_var(d) + " < " + std::to_string(shape[d]) + "; ++" +
           idx_var(d) + ")");
}

void close_loops(CWriter& w, size_t r) {
  for (size_t d = 0; d < r; ++d) w.close();
}

std::string fallback_layer(const Graph& g, const DispatchDecision& d, const Symbols& sym,
                           const std::map<std::string, TensorSpec>& specs, const std::string& name) {
  const Node& n = *g.find_node(d.node_ids[0]);
  const TensorSpec& os = specs.at(n.id);
  CWriter w;
  std::string statics;
  std::vector<std::string> ptr;
  std::vector<std::string> params;
  for (size_t j = 0; j < n.inputs.size(); ++j) {
    const std::string& v = n.inputs[j];
    std::string t = "const " + ctype(specs.at(v).dtype) + "*";
    if (g.is_constant(v)) {
      ptr.push_back("(" + t + ")" + sym.constant.at(v));
    } else {
      ptr.push_back("(" + t + ")x" + std::to_string(params.size()));
      params.push_back("const void* x" + std::to_string(params.size()));
    }
  }
  params.push_back("void* y");
  std::string sig;
  for (size_t i = 0; i < params.size(); ++i) sig += (i ? ", " : "") + params[i];

  w.open("void " + name + "(" + sig + ")");
  const TensorSpec& xs = specs.at(n.inputs[0]);
  w.line("const " + ctype(xs.dtype) + "* X = " + ptr[0] + ";");
  if (n.inputs.size() > 1) w.line("const " + ctype(specs.at(n.inputs[1]).dtype) + "* R = " + ptr[1] + ";");
  w.line(ctype(os.dtype) + "* Y = (" + ctype(os.dtype) + "*)y;");
  const auto xc = canonical_shape(xs);
  const auto oc = canonical_shape(os);
  const std::string store = "Y[" + phys(os, vars(oc.size())) + "] = (" + ctype(os.dtype) + ")v;";
  auto channel = [&](size_t rank) { return rank == 1 ? std::string("i0") : std::string("i1"); };

  switch (n.op) {
    case OpKind::conv2d: {
      auto a = conv_attrs(n);
      const TensorSpec& ws = specs.at(n.inputs[1]);
      auto wc = canonical_shape(ws);
      const int64_t Kg = wc[0] / a.groups;
      open_loops(w, oc);
      w.line("int64_t acc = 0, v;");
      w.line("int64_t g = i1 / " + std::to_string(Kg) + ";");
      w.open("for (int64_t c = 0; c < " + std::to_string(wc[1]) + "; ++c)");
      w.open("for (int64_t fy = 0; fy < " + std::to_string(wc[2]) + "; ++fy)");
      w.line("int64_t iy = i2 * " + std::to_string(a.sy) + " - " + std::to_string(a.pad_top) + " + fy * " +
             std::to_string(a.dy) + ";");
      w.line("if (iy < 0 || iy >= " + std::to_string(xc[2]) + ") continue;");
      w.open("for (int64_t fx = 0; fx < " + std::to_string(wc[3]) + "; ++fx)");
      w.line("int64_t ix = i3 * " + std::to_string(a.sx) + " - " + std::to_string(a.pad_left) + " + fx * " +
             std::to_string(a.dx) + ";");
      w.line("if (ix < 0 || ix >= " + std::to_string(xc[3]) + ") continue;");
      w.line("acc += (int64_t)X[" + phys(xs, {"i0", "g * " + std::to_string(wc[1]) + " + c", "iy", "ix"}) +
             "] * R[" + phys(ws, {"i1", "c", "fy", "fx"}) + "];");
      w.close();
      w.close();
      w.close();
      w.line("v = hetcc_wrap32(acc);");
      w.line(store);
      close_loops(w, oc.size());
      break;
    }
    case OpKind::dense: {
      const int64_t C = xc[1];
      open_loops(w, oc);
      w.line("int64_t acc = 0, v;");
      w.line("for (int64_t c = 0; c < " + std::to_string(C) + "; ++c) acc += (int64_t)X[i0 * " + std::to_string(C) +
             " + c] * R[i1 * " + std::to_string(C) + " + c];");
      w.line("v = hetcc_wrap32(acc);");
      w.line(store);
      close_loops(w, oc.size());
      break;
    }
    case OpKind::add:
    case OpKind::mul:
    case OpKind::div:
    case OpKind::right_shift:
    case OpKind::bias_add: {
      const TensorSpec& bs = specs.at(n.inputs[1]);
      auto bc = canonical_shape(bs);
      std::string rhs = bc == xc ? "R[" + phys(bs, vars(xc.size())) + "]"
                        : bs.numel() == 1 ? std::string("R[0]")
                                          : "R[" + channel(xc.size()) + "]";
      open_loops(w, oc);
      w.line("int64_t l = X[" + phys(xs, vars(xc.size())) + "], r = " + rhs + ", v;");
      switch (n.op) {
        case OpKind::mul: w.line("v = hetcc_wrap32(l * r);"); break;
        case OpKind::div: w.line("v = r == 0 ? 0 : hetcc_wrap32(l / r);"); break;
        case OpKind::right_shift: w.line("v = hetcc_wrap32(hetcc_fshr(l, r));"); break;
        default: w.line("v = hetcc_wrap32(l + r);"); break;
      }
      w.line(store);
      close_loops(w, oc.size());
      break;
    }
    case OpKind::relu:
    case OpKind::clip:
    case OpKind::cast:
    case OpKind::requant: {
      if (n.op == OpKind::requant) {
        auto r = requant_attrs(n);
        statics += array_def("static const ", "int64_t", "rq_M", r.M);
        statics += array_def("static const ", "int64_t", "rq_B", r.B);
      }
      open_loops(w, oc);
      w.line("int64_t v = X[" + phys(xs, vars(xc.size())) + "];");
      if (n.op == OpKind::relu) {
        w.line("if (v < 0) v = 0;");
      } else if (n.op == OpKind::clip) {
        auto c = clip_attrs(n);
        w.line("if (v < " + std::to_string(c.min) + ") v = " + std::to_string(c.min) + ";");
        w.line("if (v > " + std::to_string(c.max) + ") v = " + std::to_string(c.max) + ";");
      } else if (n.op == OpKind::cast) {
        w.line(os.dtype == DType::i8 ? "v = hetcc_wrap8(v);" : "v = hetcc_wrap32(v);");
      } else {
        auto r = requant_attrs(n);
        std::string c = channel(xc.size());
        w.line("v = hetcc_fshr(v * rq_M[" + (r.M.size() == 1 ? std::string("0") : c) + "] + rq_B[" +
               (r.B.size() == 1 ? std::string("0") : c) + "], " + std::to_string(r.S) + ");");
        w.line("if (v < " + std::to_string(r.min) + ") v = " + std::to_string(r.min) + ";");
        w.line("if (v > " + std::to_string(r.max) + ") v = " + std::to_string(r.max) + ";");
      }
      w.line(store);
      close_loops(w, oc.size());
      break;
    }
    case OpKind::avgpool2d:
    case OpKind::maxpool2d: {
      auto p = pool_attrs(n);
      bool avg = n.op == OpKind::avgpool2d;
      open_loops(w, oc);
      w.line(std::string("int64_t acc = ") + (avg ? "0" : "INT64_MIN") + ", v;");
      w.open("for (int64_t ky = 0; ky < " + std::to_string(p.ky) + "; ++ky)");
      w.line("int64_t iy = i2 * " + std::to_string(p.sy) + " - " + std::to_string(p.pad_top) + " + ky;");
      w.line("if (iy < 0 || iy >= " + std::to_string(xc[2]) + ") continue;");
      w.open("for (int64_t kx = 0; kx < " + std::to_string(p.kx) + "; ++kx)");
      w.line("int64_t ix = i3 * " + std::to_string(p.sx) + " - " + std::to_string(p.pad_left) + " + kx;");
      w.line("int64_t e;");
      w.line("if (ix < 0 || ix >= " + std::to_string(xc[3]) + ") continue;");
      w.line("e = X[" + phys(xs, {"i0", "i1", "iy", "ix"}) + "];");
      w.line(avg ? "acc += e;" : "if (e > acc) acc = e;");
      w.close();
      w.close();
      w.line(avg ? "v = hetcc_wrap32(acc) / " + std::to_string(p.ky * p.kx) + ";" : "v = acc;");
      w.line(store);
      close_loops(w, oc.size());
      break;
    }
    case OpKind::reshape:
    case OpKind::flatten: {
      // Reinterprets the canonical element order.
      auto trivial = [](const TensorSpec& t) {
        return t.shape.size() != 4 || (t.layout.kind != Layout::Kind::NHWC && t.layout.kind != Layout::Kind::OHWI);
      };
      if (trivial(xs) && trivial(os)) {
        w.line("memcpy(Y, X, " + std::to_string(os.bytes()) + ");");
        break;
      }
      w.line("int64_t q = 0;");
      open_loops(w, xc);
      std::vector<std::string> oi;
      int64_t inner = 1;
      for (size_t dd = oc.size(); dd-- > 0;) {
        std::string e = "(q / " + std::to_string(inner) + ") % " + std::to_string(oc[dd]);
        oi.insert(oi.begin(), "(" + e + ")");
        inner *= oc[dd];
      }
      w.line("Y[" + phys(os, oi) + "] = X[" + phys(xs, vars(xc.size())) + "];");
      w.line("++q;");
      close_loops(w, xc.size());
      break;
    }
    case OpKind::pad:
    case OpKind::slice: {
      open_loops(w, oc);
      std::string inside;
      for (size_t dd = 0; dd < oc.size(); ++dd)
        inside += (dd ? " && " : "") + idx_var(dd) + " < " + std::to_string(xc[dd]);
      w.line("int64_t v = (" + inside + ") ? X[" + phys(xs, vars(xc.size())) + "] : 0;");
      w.line(store);
      close_loops(w, oc.size());
      break;
    }
  }
  w.close();
  std::string head = "/* " + name + ": " + std::string(op_name(n.op)) + " " + n.id + " on the host */\n" +
                     "#include <stdint.h>\n#include <string.h>\n\n#include \"match_api.h\"\n#include "
                     "\"hetcc_runtime.h\"\n#include \"weights.h\"\n\n";
  return head + statics + (statics.empty() ? "" : "\n") + w.str();
}

std::vector<std::string> pattern_idents(const TargetModel& t) {
  std::set<std::string> s;
  for (auto& m : t.modules)
    for (auto& p : m.patterns) s.insert(c_ident(p.name));
  return {s.begin(), s.end()};
}

}  // namespace

std::string layer_symbol(const PartitionedGraph& pg, size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "layer_%03zu_", i);
  return buf + c_ident(pg.decisions.at(i).node_ids[0]);
}

std::string emit_layer(const PartitionedGraph& pg, size_t i, const TargetModel& t) {
  const auto& d = pg.decisions.at(i);
  HETCC_CHECK(d.assigned, "decision " + std::to_string(i) + " is not assigned to a module");
  const ExecModule* m = t.find(d.module);
  HETCC_CHECK(m != nullptr, "unknown module '" + d.module + "'");
  Symbols sym(pg.graph);
  auto specs = infer_specs(pg.graph);
  LayerEmitter e{pg.graph, d, *m, sym, specs, layer_symbol(pg, i), {}, {}, {}};
  return e.run();
}

std::string emit_fallback_layer(const PartitionedGraph& pg, size_t i) {
  const auto& d = pg.decisions.at(i);
  HETCC_CHECK(!d.assigned && d.node_ids.size() == 1, "decision " + std::to_string(i) + " is not a fallback node");
  Symbols sym(pg.graph);
  auto specs = infer_specs(pg.graph);
  return fallback_layer(pg.graph, d, sym, specs, layer_symbol(pg, i));
}

std::string emit_api_header(const TargetModel& t) {
  std::ostringstream os;
  os << csrc::kApiPrelude;
  auto pats = pattern_idents(t);
  for (auto& p : pats) os << "typedef match_layer_ctx match_ctx_" << p << ";\n";
  os << "\n";
  for (auto& a : kSigs) os << a.ret << " " << a.generic << "(" << a.params << ");\n";
  for (auto& p : pats) os << "void match_kernel_" << p << "(const match_ctx_" << p << "* ctx);\n";
  os << "\n/* " << t.name << " bindings */\n";
  std::set<std::string> seen;
  for (auto& m : t.modules) {
    for (auto& a : kSigs) {
      const std::string& b = m.api.resolve(a.generic);
      if (b != a.generic && seen.insert(b).second) os << a.ret << " " << b << "(" << a.params << ");\n";
    }
    for (auto& p : m.patterns) {
      std::string b = m.api.resolve("match_kernel") + "_" + c_ident(p.name);
      if (seen.insert(b).second) os << "void " << b << "(const match_ctx_" << c_ident(p.name) << "* ctx);\n";
    }
  }
  os << "\n#endif\n";
  return os.str();
}

std::string emit_test_backend(const TargetModel& t) {
  std::ostringstream os;
  os << csrc::kBackendSource << "\n";
  for (auto& p : pattern_idents(t))
    os << "void match_kernel_" << p << "(const match_ctx_" << p << "* ctx) { hetcc_ref_kernel(ctx); }\n";
  os << "\n/* " << t.name << " bindings */\n";
  std::set<std::string> seen;
  for (auto& a : kSigs) seen.insert(a.generic);
  for (auto& m : t.modules) {
    for (auto& a : kSigs) {
      const std::string& b = m.api.resolve(a.generic);
      if (!seen.insert(b).second) continue;
      os << a.ret << " " << b << "(" << a.params << ") { " << (std::string(a.ret) == "void" ? "" : "return ")
         << a.generic << "(" << a.args << "); }\n";
    }
    for (auto& p : m.patterns) {
      std::string b = m.api.resolve("match_kernel") + "_" + c_ident(p.name);
      if (seen.insert(b).second)
        os << "void " << b << "(const match_ctx_" << c_ident(p.name) << "* ctx) { hetcc_ref_kernel(ctx); }\n";
    }
  }
  return os.str();
}

json network_report(const PartitionedGraph& pg, const MemoryPlan& plan, const TargetModel& t) {
  json r;
  r["schema_version"] = 1;
  r["target"] = t.name;
  r["graph"] = pg.graph.name;
  json layers = json::array();
  int64_t cycles = 0, macs = 0;
  for (size_t i = 0; i < pg.decisions.size(); ++i) {
    auto& d = pg.decisions[i];
    json j;
    j["symbol"] = layer_symbol(pg, i);
    j["nodes"] = d.node_ids;
    if (d.assigned) {
      const ExecModule& m = *t.find(d.module);
      j["module"] = d.module;
      j["pattern"] = d.pattern;
      j["schedule"] = schedule_digest(d.schedule, m);
      j["schedule_detail"] = schedule_to_json(d.schedule);
      j["cost"] = cost_to_json(d.cost);
      j["workload"] = workload_to_json(d.workload);
      j["predicted_cycles"] = d.cost.total;
      j["macs"] = d.cost.macs;
      j["macs_per_cycle"] = d.cost.macs_per_cycle();
      j["search"] = d.search_used == SearchMode::exhaustive ? "exhaustive" : "genetic";
      json tr;
      for (Operand o : kAllOperands) tr[std::string(1, operand_char(o))] = d.cost.l_mem[idx(o)].at(0).transfers;
      j["transfers"] = tr;
      j["unmodeled"] = false;
      cycles += d.cost.total;
      macs += d.cost.macs;
    } else {
      j["module"] = "fallback";
      j["op"] = std::string(op_name(pg.graph.find_node(d.node_ids[0])->op));
      j["predicted_cycles"] = 0;
      j["unmodeled"] = true;
    }
    layers.push_back(j);
  }
  r["layers"] = layers;
  r["network"] = {{"predicted_cycles", cycles},
                  {"macs", macs},
                  {"macs_per_cycle", cycles > 0 ? static_cast<double>(macs) / static_cast<double>(cycles) : 0.0}};
  json bufs = json::array();
  for (auto& s : plan.slots)
    bufs.push_back({{"value", s.value}, {"offset", s.offset}, {"size", s.size}, {"first", s.first}, {"last", s.last}});
  r["memory"] = {{"arena_bytes", plan.arena},
                 {"l2_bytes", t.l2_size()},
                 {"out_of_memory", plan.arena > t.l2_size()},
                 {"buffers", bufs}};
  r["dispatch"] = dispatch_report(pg, t);
  return r;
}

EmittedProgram emit_network(const PartitionedGraph& pg, const MemoryPlan& plan, const TargetModel& t,
                            const EmitOptions& opt) {
  const Graph& g = pg.graph;
  Symbols sym(g);
  auto specs = infer_specs(g);
  EmittedProgram prog;
  auto& f = prog.files;
  f["match_api.h"] = emit_api_header(t);
  f["hetcc_runtime.h"] = csrc::kRuntimeHeader;

  std::string wh = "/* Constant tensors. */\n#ifndef HETCC_WEIGHTS_H\n#define HETCC_WEIGHTS_H\n\n#include <stdint.h>\n\n";
  std::string wc = "#include \"match_api.h\"\n#include \"weights.h\"\n\n";
  for (auto& [name, c] : g.constants) {
    const std::string& s = sym.constant.at(name);
    const std::string n = std::to_string(std::max<int64_t>(c.spec.numel(), 1));
    wh += "extern const " + ctype(c.spec.dtype) + " " + s + "[" + n + "];\n";
    wc += "/* " + name + " " + c.spec.layout.str() + " */\n" + array_def("const ", ctype(c.spec.dtype), s, c.data);
  }
  wh += "\n#endif\n";
  f["weights.h"] = wh;
  f["weights.c"] = wc;

  std::ostringstream mp;
  mp << "/* Static activation arena. */\n#ifndef HETCC_MEMORY_PLAN_H\n#define HETCC_MEMORY_PLAN_H\n\n";
  mp << "#define HETCC_ARENA_BYTES " << plan.arena << "\n\n";
  for (auto& s : plan.slots)
    mp << "#define " << sym.value.at(s.value) << " " << s.offset << " /* " << s.value << ": " << s.size
       << " bytes, steps " << s.first << ".." << s.last << " */\n";
  mp << "\n#endif\n";
  f["memory_plan.h"] = mp.str();

  std::string nh = "#ifndef HETCC_NETWORK_H\n#define HETCC_NETWORK_H\n\n#include <stdint.h>\n\n";
  std::ostringstream run;
  run << "void network_run(uint8_t* arena) {\n";
  for (size_t i = 0; i < pg.decisions.size(); ++i) {
    auto& d = pg.decisions[i];
    std::string name = layer_symbol(pg, i);
    auto ins = layer_inputs(g, d);
    std::string sig, args;
    for (size_t k = 0; k < ins.size(); ++k) {
      sig += "const void* x" + std::to_string(k) + ", ";
      args += "arena + " + sym.value.at(ins[k]) + ", ";
    }
    nh += "void " + name + "(" + sig + "void* y);\n";
    run << "  " << name << "(" << args << "arena + " << sym.value.at(d.node_ids.back()) << ");\n";
    f[name + ".c"] = d.assigned ? emit_layer(pg, i, t) : fallback_layer(g, d, sym, specs, name);
  }
  run << "  (void)arena;\n}\n";
  nh += "void network_run(uint8_t* arena);\n\n#endif\n";
  f["network.h"] = nh;

  std::ostringstream mc;
  mc << "/* " << g.name << " for " << t.name << ". Reads whitespace-separated integers for each input\n"
     << " * (physical order, graph input order) and prints the outputs as JSON. */\n";
  mc << "#include <stdio.h>\n#include <stdint.h>\n\n#include \"match_api.h\"\n#include \"memory_plan.h\"\n#include \"network.h\"\n#include "
        "\"weights.h\"\n";
  if (opt.test_backend) mc << "#include \"match_test_backend.h\"\n";
  mc << "\nstatic uint64_t arena_words[HETCC_ARENA_BYTES / 8 + 1];\n\n";
  mc << R"C(static int read_tensor(FILE* f, uint8_t* dst, int es, long n, long lo, long hi) {
  long i, v;
  for (i = 0; i < n; ++i) {
    if (fscanf(f, "%ld", &v) != 1 || v < lo || v > hi) return 1;
    if (es == 1)
      ((int8_t*)dst)[i] = (int8_t)v;
    else
      ((int32_t*)dst)[i] = (int32_t)v;
  }
  return 0;
}

static void print_tensor(const char* name, const void* p, int es, long n, int first) {
  long i;
  printf("%s\"%s\": [", first ? "" : ", ", name);
  for (i = 0; i < n; ++i)
    printf("%s%ld", i ? ", " : "", es == 1 ? (long)((const int8_t*)p)[i] : (long)((const int32_t*)p)[i]);
  printf("]");
}

)C";
  mc << run.str() << "\n";
  std::ostringstream mb;
  mb << "int main(int argc, char** argv) {\n";
  mb << "  uint8_t* arena = (uint8_t*)arena_words;\n";
  mb << "  FILE* in = argc > 1 ? fopen(argv[1], \"r\") : stdin;\n";
  mb << "  if (!in) {\n    fprintf(stderr, \"cannot open %s\\n\", argv[1]);\n    return 1;\n  }\n";
  // Tensors exchanged in a different layout go through a staging buffer.
  auto host = [&](const std::string& v) -> const TensorSpec* {
    auto it = opt.host_specs.find(v);
    if (it == opt.host_specs.end() || it->second.layout == specs.at(v).layout) return nullptr;
    return &it->second;
  };
  std::string stage_defs, reads;
  int nstage = 0;
  auto convert = [&](const TensorSpec& from, const TensorSpec& to, const std::string& src, const std::string& dst) {
    CWriter cw;
    cw.depth = 1;
    cw.open("");
    cw.line("const " + ctype(from.dtype) + "* s = (const " + ctype(from.dtype) + "*)(" + src + ");");
    cw.line(ctype(to.dtype) + "* d = (" + ctype(to.dtype) + "*)(" + dst + ");");
    auto cs = canonical_shape(from);
    open_loops(cw, cs);
    cw.line("d[" + phys(to, vars(cs.size())) + "] = s[" + phys(from, vars(cs.size())) + "];");
    close_loops(cw, cs.size());
    cw.close();
    return cw.str();
  };
  for (auto& i : g.inputs) {
    const TensorSpec* h = host(i.name);
    std::string dst = "arena + " + sym.value.at(i.name);
    if (h) {
      std::string st = "stage" + std::to_string(nstage++);
      stage_defs += "static " + ctype(i.dtype) + " " + st + "[" + std::to_string(std::max<int64_t>(i.numel(), 1)) + "];\n";
      dst = "(uint8_t*)" + st;
    }
    reads += "  if (read_tensor(in, " + dst + ", " + std::to_string(dtype_bytes(i.dtype)) + ", " +
             std::to_string(i.numel()) + "L, " + std::to_string(dtype_min(i.dtype)) + "L, " +
             std::to_string(dtype_max(i.dtype)) + "L)) {\n";
    reads += "    fprintf(stderr, \"input " + i.name + ": expected " + std::to_string(i.numel()) +
             " values\\n\");\n    return 1;\n  }\n";
    if (h) reads += convert(*h, i, dst, "arena + " + sym.value.at(i.name));
  }
  mb << reads;
  mb << "  network_run(arena);\n  printf(\"{\");\n";
  std::set<std::string> printed;
  bool first = true;
  for (auto& o : g.outputs) {
    if (!printed.insert(o).second) continue;
    const TensorSpec& s = specs.at(o);
    std::string p = g.is_constant(o) ? sym.constant.at(o) : "arena + " + sym.value.at(o);
    if (const TensorSpec* h = host(o)) {
      std::string st = "stage" + std::to_string(nstage++);
      stage_defs += "static " + ctype(s.dtype) + " " + st + "[" + std::to_string(std::max<int64_t>(s.numel(), 1)) + "];\n";
      mb << convert(s, *h, p, st);
      p = st;
    }
    mb << "  print_tensor(\"" << o << "\", " << p << ", " << dtype_bytes(s.dtype) << ", " << s.numel() << "L, "
       << (first ? 1 : 0) << ");\n";
    first = false;
  }
  mb << "  printf(\"}\\n\");\n";
  if (opt.test_backend) mb << "  match_test_backend_dump();\n";
  mb << "  if (in != stdin) fclose(in);\n  return 0;\n}\n";
  f["main.c"] = mc.str() + stage_defs + (stage_defs.empty() ? "" : "\n") + mb.str();

  if (opt.test_backend) {
    f["match_test_backend.h"] = csrc::kBackendHeader;
    f["match_test_backend.c"] = emit_test_backend(t);
  }
  f["Makefile"] =
      "CC ?= cc\nCFLAGS ?= -O2 -std=c99\n\nnetwork: $(wildcard *.c)\n\t$(CC) $(CFLAGS) -o $@ $^\n";
  prog.report = network_report(pg, plan, t);
  return prog;
}

}  // namespace hetcc
