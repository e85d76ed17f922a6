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

#include "hetcc/target.hpp"

#include <algorithm>
#include <filesystem>

#include "hetcc/cost_model.hpp"
#include "hetcc/graph_io.hpp"
#include "hetcc/layout.hpp"

namespace hetcc {

namespace {

// Built-in descriptions are ordinary target documents.
constexpr const char* kDiana = R"({
  "name": "diana",
  "activation_layout": "NCHW",
  "modules": [{
    "name": "digital",
    "patterns": [
      {"name": "conv2d", "ops": ["conv2d", "bias_add?", "requant?", "relu?"],
       "constraints": ["kind in {conv, depthwise}", "dtype = i8", "layout = NCHW"]},
      {"name": "dense", "ops": ["dense", "bias_add?", "requant?", "relu?"],
       "constraints": ["kind = dense", "dtype = i8"]}
    ],
    "memory": [
      {"name": "L1_act", "size_bytes": 262144, "operands": ["I", "O"], "shared": true,
       "bandwidth_bytes_per_cycle": 1, "chunk_overhead_cycles": 0},
      {"name": "L1_w", "size_bytes": 65536, "operands": ["W"], "shared": true,
       "bandwidth_bytes_per_cycle": 1, "chunk_overhead_cycles": 0},
      {"name": "L2", "size_bytes": 524288, "operands": ["I", "W", "O"], "shared": true,
       "bandwidth_bytes_per_cycle": 8, "chunk_overhead_cycles": 70}
    ],
    "spatial": {"unroll": {"K": 16, "OX": 16}, "policy": "pad_only", "overrides": {"dense": {"K": 16}}},
    "cost": {"model": "diana", "composition": "sync_sum",
             "constants": {"c_read": 1, "c_mac": 1, "c_write": 1, "c_elem": 23, "array_k": 16, "array_ox": 16}},
    "transforms": {"padding": ["K", "OX"], "weight_layout": "diana_kblock16"},
    "api": {
      "platform": {"match_platform_init": "diana_init", "match_platform_close": "diana_close"},
      "memory": {"match_mem_alloc_l1": "diana_l1_alloc", "match_mem_free_l1": "diana_l1_free",
                 "match_mem_copy": "diana_dma_copy", "match_mem_transfer_begin": "diana_transfer_begin",
                 "match_mem_transfer_end": "diana_transfer_end"},
      "sync": {"match_sync_transfers": "diana_dma_wait", "match_sync_compute": "diana_digital_wait"},
      "compute": {"match_kernel": "diana_digital_kernel"}
    }
  }]
})";

constexpr const char* kGap9 = R"({
  "name": "gap9",
  "activation_layout": "NHWC",
  "modules": [{
    "name": "cluster",
    "patterns": [
      {"name": "conv2d", "ops": ["conv2d", "bias_add?", "requant?", "relu?"],
       "constraints": ["kind in {conv, depthwise}", "dtype = i8", "layout = NHWC"]},
      {"name": "dense", "ops": ["dense", "bias_add?", "requant?", "relu?"],
       "constraints": ["kind = dense", "dtype = i8"]},
      {"name": "add", "ops": ["add", "requant?", "relu?"],
       "constraints": ["kind = add", "dtype = i8"]}
    ],
    "memory": [
      {"name": "L1", "size_bytes": 131072, "operands": ["I", "W", "O"], "shared": true,
       "bandwidth_bytes_per_cycle": 1, "chunk_overhead_cycles": 0},
      {"name": "L2", "size_bytes": 1572864, "operands": ["I", "W", "O"], "shared": true,
       "bandwidth_bytes_per_cycle": 8, "chunk_overhead_cycles": 27}
    ],
    "spatial": {"unroll": {"OX": 2, "K": 4, "OY": 8}, "policy": "pad_or_reduce", "overrides": {"add": {}}},
    "cost": {"model": "gap9_cluster", "composition": "async_max",
             "constants": {"c_inner": 2, "c_setup": 200, "par_k": 4, "par_oy": 8, "par_ox": 2,
                           "scratch_per_reduction": 16}},
    "transforms": {"padding": ["K", "OY", "OX"], "weight_layout": ""},
    "api": {
      "platform": {"match_platform_init": "gap9_cluster_open", "match_platform_close": "gap9_cluster_close"},
      "memory": {"match_mem_alloc_l1": "gap9_l1_malloc", "match_mem_free_l1": "gap9_l1_free",
                 "match_mem_copy": "gap9_dma_memcpy_2d", "match_mem_transfer_begin": "gap9_transfer_begin",
                 "match_mem_transfer_end": "gap9_transfer_end"},
      "sync": {"match_sync_transfers": "gap9_dma_wait", "match_sync_compute": "gap9_cluster_wait"},
      "compute": {"match_kernel": "gap9_cluster_kernel"}
    }
  }, {
    "name": "ne16",
    "patterns": [
      {"name": "conv2d", "ops": ["conv2d", "bias_add?", "requant?", "relu?"],
       "constraints": ["kind in {conv, depthwise}", "FX = FY", "FX in {1, 3}", "SX = SY", "SX in {1, 2}",
                       "DX = 1", "DY = 1", "dtype = i8", "layout = NHWC"]}
    ],
    "memory": [
      {"name": "L1", "size_bytes": 131072, "operands": ["I", "W", "O"], "shared": true,
       "bandwidth_bytes_per_cycle": 1, "chunk_overhead_cycles": 0},
      {"name": "L2", "size_bytes": 1572864, "operands": ["I", "W", "O"], "shared": true,
       "bandwidth_bytes_per_cycle": 8, "chunk_overhead_cycles": 27}
    ],
    "spatial": {"unroll": {"K": 32}, "policy": "pad_or_reduce"},
    "cost": {"model": "ne16", "composition": "async_max",
             "constants": {"c_block_3x3": 59, "c_block_1x1": 27, "c_setup": 300, "block_k": 32, "block_c": 16,
                           "block_oy": 3, "block_ox": 3}},
    "transforms": {"padding": ["K"], "weight_layout": "ne16_cblock16"},
    "api": {
      "platform": {"match_platform_init": "ne16_open", "match_platform_close": "ne16_close"},
      "memory": {"match_mem_alloc_l1": "gap9_l1_malloc", "match_mem_free_l1": "gap9_l1_free",
                 "match_mem_copy": "gap9_dma_memcpy_2d", "match_mem_transfer_begin": "gap9_transfer_begin",
                 "match_mem_transfer_end": "gap9_transfer_end"},
      "sync": {"match_sync_transfers": "gap9_dma_wait", "match_sync_compute": "ne16_job_wait"},
      "compute": {"match_kernel": "ne16_kernel"}
    }
  }]
})";

struct ApiName {
  const char* family;
  const char* label;
  const char* generic;
};

constexpr ApiName kApis[] = {
    {"platform", "Platform", "match_platform_init"},
    {"platform", "Platform", "match_platform_close"},
    {"memory", "Memory", "match_mem_alloc_l1"},
    {"memory", "Memory", "match_mem_free_l1"},
    {"memory", "Memory", "match_mem_copy"},
    {"memory", "Memory", "match_mem_transfer_begin"},
    {"memory", "Memory", "match_mem_transfer_end"},
    {"sync", "Synchronization", "match_sync_transfers"},
    {"sync", "Synchronization", "match_sync_compute"},
    {"compute", "Computational", "match_kernel"},
};

const std::set<std::string> kConstraintVars = {"op", "kind", "FX", "FY", "SX", "SY", "DX", "DY",
                                               "groups", "C", "K", "dtype", "layout"};

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
  return b == std::string_view::npos ? std::string() : std::string(s.substr(b, e - b + 1));
}

const json& req(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(ctx + ": missing field '" + key + "'");
  return *it;
}

int64_t req_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = req(j, key, ctx);
  if (!v.is_number_integer()) throw ConfigError(ctx + ": field '" + key + "' must be an integer");
  return v.get<int64_t>();
}

std::string req_str(const json& j, const char* key, const std::string& ctx) {
  const json& v = req(j, key, ctx);
  if (!v.is_string()) throw ConfigError(ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

DimArray parse_unroll(const json& j, const std::string& ctx) {
  DimArray u = ones();
  if (!j.is_object()) throw ConfigError(ctx + ": unroll must be an object");
  for (auto& [k, v] : j.items()) {
    auto d = parse_dim(k);
    if (!d) throw ConfigError(ctx + ": unknown dimension '" + k + "'");
    if (!v.is_number_integer() || v.get<int64_t>() < 1) throw ConfigError(ctx + ": unroll factors must be >= 1");
    u[idx(*d)] = v.get<int64_t>();
  }
  return u;
}

json unroll_json(const DimArray& u) {
  json j = json::object();
  for (Dim d : kAllDims)
    if (u[idx(d)] != 1) j[std::string(dim_name(d))] = u[idx(d)];
  return j;
}

}  // namespace

std::string_view kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::conv: return "conv";
    case KernelKind::depthwise: return "depthwise";
    case KernelKind::dense: return "dense";
    case KernelKind::add: return "add";
  }
  return "?";
}

std::optional<KernelKind> parse_kernel_kind(std::string_view s) {
  for (auto k : {KernelKind::conv, KernelKind::depthwise, KernelKind::dense, KernelKind::add})
    if (kernel_kind_name(k) == s) return k;
  return std::nullopt;
}

std::string_view cost_model_name(CostModelId id) {
  switch (id) {
    case CostModelId::diana: return "diana";
    case CostModelId::gap9_cluster: return "gap9_cluster";
    case CostModelId::ne16: return "ne16";
  }
  return "?";
}

Constraint parse_constraint(std::string_view text) {
  static const std::pair<std::string_view, Constraint::Op> ops[] = {
      {"∈", Constraint::Op::in}, {"≠", Constraint::Op::ne}, {"≤", Constraint::Op::le},
      {"≥", Constraint::Op::ge}, {"!=", Constraint::Op::ne},     {"<=", Constraint::Op::le},
      {">=", Constraint::Op::ge},     {"==", Constraint::Op::eq},     {" in ", Constraint::Op::in},
      {"=", Constraint::Op::eq},      {"<", Constraint::Op::lt},      {">", Constraint::Op::gt},
  };
  Constraint c;
  c.text = std::string(text);
  size_t pos = std::string_view::npos, len = 0;
  for (auto& [tok, op] : ops) {
    size_t p = text.find(tok);
    if (p != std::string_view::npos && p < pos) {
      pos = p;
      len = tok.size();
      c.op = op;
    }
  }
  if (pos == std::string_view::npos) throw ConfigError("constraint '" + c.text + "' has no operator");
  c.var = trim(text.substr(0, pos));
  if (!kConstraintVars.count(c.var)) throw ConfigError("constraint '" + c.text + "' uses unknown variable '" + c.var + "'");
  std::string rhs = trim(text.substr(pos + len));
  if (c.op == Constraint::Op::in) {
    if (rhs.size() < 2 || rhs.front() != '{' || rhs.back() != '}')
      throw ConfigError("constraint '" + c.text + "' needs a set like {1, 3}");
    std::string body = rhs.substr(1, rhs.size() - 2);
    size_t start = 0;
    while (start <= body.size()) {
      size_t comma = body.find(',', start);
      std::string item = trim(body.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!item.empty()) c.values.push_back(item);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (c.values.empty()) throw ConfigError("constraint '" + c.text + "' has an empty set");
  } else {
    if (rhs.empty()) throw ConfigError("constraint '" + c.text + "' has no right-hand side");
    c.values.push_back(rhs);
  }
  return c;
}

int64_t CostConstants::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("cost constant '" + key + "' is not defined");
  return it->second;
}

const std::string& ApiBindings::resolve(const std::string& generic) const {
  for (auto* fam : {&platform, &memory, &sync, &compute}) {
    auto it = fam->find(generic);
    if (it != fam->end()) return it->second;
  }
  throw ConfigError("no binding for generic API '" + generic + "'");
}

const DimArray& ExecModule::unroll_for(KernelKind k) const {
  auto it = spatial_overrides.find(k);
  return it != spatial_overrides.end() ? it->second : spatial.unroll;
}

std::vector<int> ExecModule::chain(Operand o) const {
  std::vector<int> c;
  for (size_t i = 0; i < levels.size(); ++i)
    if (levels[i].serves_operand(o)) c.push_back(static_cast<int>(i));
  return c;
}

const ExecModule* TargetModel::find(std::string_view module) const {
  for (auto& m : modules)
    if (m.name == module) return &m;
  return nullptr;
}

int TargetModel::module_index(std::string_view module) const {
  for (size_t i = 0; i < modules.size(); ++i)
    if (modules[i].name == module) return static_cast<int>(i);
  return -1;
}

int64_t TargetModel::l2_size() const {
  int64_t s = 0;
  for (auto& m : modules) s = std::max(s, m.top_size());
  return s;
}

std::vector<std::string> required_apis() {
  std::vector<std::string> v;
  for (auto& a : kApis) v.push_back(a.generic);
  return v;
}

void validate_target(const TargetModel& t) {
  if (t.modules.empty()) throw ConfigError("target '" + t.name + "' has no modules");
  if (!t.activation_layout.is_activation()) throw ConfigError("target activation layout must be NCHW or NHWC");
  std::set<std::string> names;
  for (auto& m : t.modules) {
    std::string ctx = "module '" + m.name + "'";
    if (!names.insert(m.name).second) throw ConfigError("duplicate module name '" + m.name + "'");
    if (m.patterns.empty()) throw ConfigError(ctx + ": empty pattern table");
    for (auto& p : m.patterns) {
      if (p.steps.empty() || p.steps[0].optional) throw ConfigError(ctx + ": pattern '" + p.name + "' needs an anchor");
      OpKind a = p.steps[0].op;
      if (a != OpKind::conv2d && a != OpKind::dense && a != OpKind::add && a != OpKind::avgpool2d &&
          a != OpKind::maxpool2d)
        throw ConfigError(ctx + ": pattern '" + p.name + "' anchor must be conv2d, dense, add or a pool");
    }
    if (m.levels.size() < 2) throw ConfigError(ctx + ": needs at least two memory levels");
    for (auto& l : m.levels) {
      if (l.size <= 0) throw ConfigError(ctx + ": level '" + l.name + "' size must be positive");
      if (l.bandwidth <= 0) throw ConfigError(ctx + ": level '" + l.name + "' bandwidth must be positive");
      if (l.chunk_overhead < 0) throw ConfigError(ctx + ": level '" + l.name + "' chunk overhead must be >= 0");
    }
    for (Operand o : kAllOperands) {
      auto c = m.chain(o);
      if (c.size() < 2 || c.back() != static_cast<int>(m.levels.size()) - 1)
        throw ConfigError(ctx + ": operand " + std::string(1, operand_char(o)) +
                          " must be served by an inner level and the top level");
    }
    for (auto& [k, v] : m.cost.values)
      if (v < 0) throw ConfigError(ctx + ": cost constant '" + k + "' must be >= 0");
    for (auto& a : kApis) {
      const auto& fam = std::string(a.family) == "platform" ? m.api.platform
                        : std::string(a.family) == "memory" ? m.api.memory
                        : std::string(a.family) == "sync"   ? m.api.sync
                                                            : m.api.compute;
      auto it = fam.find(a.generic);
      if (it == fam.end() || it->second.empty())
        throw ConfigError(ctx + " lacks " + a.label + " API binding '" + a.generic + "'");
    }
    if (!m.transforms.weight_layout.empty() && !is_known_custom_layout(m.transforms.weight_layout))
      throw ConfigError(ctx + ": unknown custom weight layout '" + m.transforms.weight_layout + "'");
  }
}

namespace {

TargetModel parse_target_impl(const json& doc) {
  if (!doc.is_object()) throw ConfigError("target description must be a JSON object");
  TargetModel t;
  t.name = req_str(doc, "name", "target");
  if (auto it = doc.find("activation_layout"); it != doc.end()) t.activation_layout = parse_layout(it->get<std::string>());
  const json& mods = req(doc, "modules", "target");
  if (!mods.is_array()) throw ConfigError("target: 'modules' must be an array");
  for (auto& mj : mods) {
    ExecModule m;
    m.name = req_str(mj, "name", "module");
    std::string ctx = "module '" + m.name + "'";

    for (auto& pj : req(mj, "patterns", ctx)) {
      PatternSpec p;
      p.name = req_str(pj, "name", ctx + " pattern");
      for (auto& s : req(pj, "ops", ctx + " pattern '" + p.name + "'")) {
        std::string op = s.get<std::string>();
        PatternStep st{};
        if (!op.empty() && op.back() == '?') {
          st.optional = true;
          op.pop_back();
        }
        auto k = parse_op(op);
        if (!k) throw ConfigError(ctx + ": pattern '" + p.name + "' uses unknown op '" + op + "'");
        st.op = *k;
        p.steps.push_back(st);
      }
      if (auto c = pj.find("constraints"); c != pj.end())
        for (auto& e : *c) p.constraints.push_back(parse_constraint(e.get<std::string>()));
      m.patterns.push_back(std::move(p));
    }

    for (auto& lj : req(mj, "memory", ctx)) {
      MemoryLevel l;
      l.name = req_str(lj, "name", ctx + " memory");
      std::string lctx = ctx + " level '" + l.name + "'";
      l.size = req_int(lj, "size_bytes", lctx);
      l.bandwidth = req_int(lj, "bandwidth_bytes_per_cycle", lctx);
      l.chunk_overhead = req_int(lj, "chunk_overhead_cycles", lctx);
      l.shared = lj.value("shared", true);
      for (auto& o : req(lj, "operands", lctx)) {
        std::string s = o.get<std::string>();
        auto op = s.size() == 1 ? parse_operand(s[0]) : std::nullopt;
        if (!op) throw ConfigError(lctx + ": unknown operand '" + s + "'");
        l.serves[idx(*op)] = true;
      }
      m.levels.push_back(std::move(l));
    }

    const json& sj = req(mj, "spatial", ctx);
    m.spatial.unroll = parse_unroll(req(sj, "unroll", ctx + " spatial"), ctx);
    std::string pol = sj.value("policy", std::string("pad_only"));
    if (pol == "pad_only")
      m.spatial.policy = AdaptPolicy::pad_only;
    else if (pol == "pad_or_reduce")
      m.spatial.policy = AdaptPolicy::pad_or_reduce;
    else
      throw ConfigError(ctx + ": unknown adaptation policy '" + pol + "'");
    if (auto ov = sj.find("overrides"); ov != sj.end())
      for (auto& [k, v] : ov->items()) {
        auto kind = parse_kernel_kind(k);
        if (!kind) throw ConfigError(ctx + ": unknown kernel kind '" + k + "' in spatial overrides");
        m.spatial_overrides[*kind] = parse_unroll(v, ctx);
      }

    const json& cj = req(mj, "cost", ctx);
    std::string model = req_str(cj, "model", ctx + " cost");
    if (model == "diana")
      m.cost.model = CostModelId::diana;
    else if (model == "gap9_cluster")
      m.cost.model = CostModelId::gap9_cluster;
    else if (model == "ne16")
      m.cost.model = CostModelId::ne16;
    else
      throw ConfigError(ctx + ": unknown cost model '" + model + "'");
    std::string comp = cj.value("composition", std::string("sync_sum"));
    if (comp == "sync_sum")
      m.cost.composition = Composition::sync_sum;
    else if (comp == "async_max")
      m.cost.composition = Composition::async_max;
    else
      throw ConfigError(ctx + ": unknown composition '" + comp + "'");
    m.cost.values = default_cost_constants(m.cost.model);
    if (auto k = cj.find("constants"); k != cj.end())
      for (auto& [name, v] : k->items()) {
        if (!m.cost.values.count(name))
          throw ConfigError(ctx + ": unknown cost constant '" + name + "' for model " + model);
        if (!v.is_number_integer()) throw ConfigError(ctx + ": cost constant '" + name + "' must be an integer");
        m.cost.values[name] = v.get<int64_t>();
      }

    if (auto tj = mj.find("transforms"); tj != mj.end()) {
      if (auto p = tj->find("padding"); p != tj->end())
        for (auto& d : *p) {
          auto dim = parse_dim(d.get<std::string>());
          if (!dim) throw ConfigError(ctx + ": unknown padding dimension '" + d.get<std::string>() + "'");
          m.transforms.paddable.insert(*dim);
        }
      m.transforms.weight_layout = tj->value("weight_layout", std::string());
    }

    const json& aj = req(mj, "api", ctx);
    auto family = [&](const char* key, std::map<std::string, std::string>& out) {
      if (auto f = aj.find(key); f != aj.end())
        for (auto& [g, n] : f->items()) out[g] = n.get<std::string>();
    };
    family("platform", m.api.platform);
    family("memory", m.api.memory);
    family("sync", m.api.sync);
    family("compute", m.api.compute);

    t.modules.push_back(std::move(m));
  }
  validate_target(t);
  return t;
}

}  // namespace

TargetModel parse_target(const json& doc) {
  try {
    return parse_target_impl(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("target description has a field of the wrong type: ") + e.what());
  }
}

json target_to_json(const TargetModel& t) {
  json doc;
  doc["name"] = t.name;
  doc["activation_layout"] = t.activation_layout.str();
  doc["modules"] = json::array();
  for (auto& m : t.modules) {
    json mj;
    mj["name"] = m.name;
    mj["patterns"] = json::array();
    for (auto& p : m.patterns) {
      json pj;
      pj["name"] = p.name;
      pj["ops"] = json::array();
      for (auto& s : p.steps) pj["ops"].push_back(std::string(op_name(s.op)) + (s.optional ? "?" : ""));
      pj["constraints"] = json::array();
      for (auto& c : p.constraints) pj["constraints"].push_back(c.text);
      mj["patterns"].push_back(pj);
    }
    mj["memory"] = json::array();
    for (auto& l : m.levels) {
      json lj;
      lj["name"] = l.name;
      lj["size_bytes"] = l.size;
      lj["bandwidth_bytes_per_cycle"] = l.bandwidth;
      lj["chunk_overhead_cycles"] = l.chunk_overhead;
      lj["shared"] = l.shared;
      lj["operands"] = json::array();
      for (Operand o : kAllOperands)
        if (l.serves_operand(o)) lj["operands"].push_back(std::string(1, operand_char(o)));
      mj["memory"].push_back(lj);
    }
    mj["spatial"]["unroll"] = unroll_json(m.spatial.unroll);
    mj["spatial"]["policy"] = m.spatial.policy == AdaptPolicy::pad_only ? "pad_only" : "pad_or_reduce";
    for (auto& [k, u] : m.spatial_overrides) mj["spatial"]["overrides"][std::string(kernel_kind_name(k))] = unroll_json(u);
    mj["cost"]["model"] = std::string(cost_model_name(m.cost.model));
    mj["cost"]["composition"] = m.cost.composition == Composition::sync_sum ? "sync_sum" : "async_max";
    mj["cost"]["constants"] = m.cost.values;
    mj["transforms"]["padding"] = json::array();
    for (Dim d : m.transforms.paddable) mj["transforms"]["padding"].push_back(std::string(dim_name(d)));
    mj["transforms"]["weight_layout"] = m.transforms.weight_layout;
    mj["api"]["platform"] = m.api.platform;
    mj["api"]["memory"] = m.api.memory;
    mj["api"]["sync"] = m.api.sync;
    mj["api"]["compute"] = m.api.compute;
    doc["modules"].push_back(mj);
  }
  return doc;
}

TargetModel builtin_target(const std::string& name) {
  if (name == "diana") return parse_target(json::parse(kDiana));
  if (name == "gap9") return parse_target(json::parse(kGap9));
  throw ConfigError("unknown target '" + name + "' (built-ins: diana, gap9)");
}

TargetModel load_target(const std::string& source) {
  if (source == "diana" || source == "gap9") return builtin_target(source);
  if (!std::filesystem::exists(source)) throw ConfigError("unknown target '" + source + "' (built-ins: diana, gap9)");
  std::string text = read_file(source);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("target '" + source + "': malformed JSON: " + e.what());
  }
  return parse_target(doc);
}

TargetModel with_l1_size(const TargetModel& t, int64_t bytes) {
  TargetModel r = t;
  for (auto& m : r.modules)
    for (size_t i = 0; i + 1 < m.levels.size(); ++i) m.levels[i].size = std::min(m.levels[i].size, bytes);
  return r;
}

}  // namespace hetcc
