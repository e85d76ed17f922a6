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

#include "hetcc/graph_io.hpp"

#include <algorithm>

#include <fstream>
#include <sstream>

#include "hetcc/validate.hpp"

namespace hetcc {

namespace {

std::string position_of(std::string_view text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at " + position_of(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
}

const json& field(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(ctx + ": missing field '" + key + "'");
  return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& ctx) {
  const json& v = field(obj, key, ctx);
  if (!v.is_string()) throw ParseError(ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<int64_t> int_list(const json& v, const std::string& ctx, const char* key) {
  if (!v.is_array()) throw ParseError(ctx + ": field '" + key + "' must be an integer array");
  std::vector<int64_t> out;
  out.reserve(v.size());
  for (auto& e : v) {
    if (!e.is_number_integer()) throw ParseError(ctx + ": field '" + key + "' must be an integer array");
    out.push_back(e.get<int64_t>());
  }
  return out;
}

std::string strip_ref(const std::string& ref, const std::string& ctx) {
  auto colon = ref.rfind(':');
  if (colon == std::string::npos) return ref;
  std::string idx = ref.substr(colon + 1);
  if (idx != "0") throw ParseError(ctx + ": reference '" + ref + "' names output " + idx + " of a single-output value");
  return ref.substr(0, colon);
}

TensorSpec spec_from(const json& j, const std::string& name, const std::string& ctx) {
  if (!j.is_object()) throw ParseError(ctx + ": tensor description must be an object");
  TensorSpec s;
  s.name = name;
  s.shape = int_list(field(j, "shape", ctx), ctx, "shape");
  s.dtype = parse_dtype(string_field(j, "dtype", ctx));
  if (auto it = j.find("layout"); it != j.end()) {
    if (!it->is_string()) throw ParseError(ctx + ": field 'layout' must be a string");
    s.layout = parse_layout(it->get<std::string>());
  }
  return s;
}

json spec_json(const TensorSpec& s) {
  json j;
  j["shape"] = s.shape;
  j["dtype"] = std::string(dtype_name(s.dtype));
  if (s.layout.kind != Layout::Kind::None) j["layout"] = s.layout.str();
  return j;
}

}  // namespace

Graph parse_graph(std::string_view text) {
  json doc = parse_json(text);
  if (!doc.is_object()) throw ParseError("graph document must be a JSON object");
  Graph g;
  g.name = string_field(doc, "name", "graph");

  const json& inputs = field(doc, "inputs", "graph");
  if (!inputs.is_array()) throw ParseError("graph: field 'inputs' must be an array");
  for (size_t i = 0; i < inputs.size(); ++i) {
    std::string ctx = "inputs[" + std::to_string(i) + "]";
    g.inputs.push_back(spec_from(inputs[i], string_field(inputs[i], "name", ctx), ctx));
  }

  if (auto it = doc.find("constants"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("graph: field 'constants' must be an object");
    for (auto& [name, c] : it->items()) {
      std::string ctx = "constants." + name;
      Constant k;
      k.spec = spec_from(c, name, ctx);
      k.data = int_list(field(c, "data", ctx), ctx, "data");
      g.constants.emplace(name, std::move(k));
    }
  }

  const json& nodes = field(doc, "nodes", "graph");
  if (!nodes.is_array()) throw ParseError("graph: field 'nodes' must be an array");
  for (size_t i = 0; i < nodes.size(); ++i) {
    std::string ctx = "nodes[" + std::to_string(i) + "]";
    const json& nj = nodes[i];
    if (!nj.is_object()) throw ParseError(ctx + ": node must be an object");
    Node n;
    n.id = string_field(nj, "id", ctx);
    ctx += " (" + n.id + ")";
    std::string op = string_field(nj, "op", ctx);
    auto kind = parse_op(op);
    if (!kind) throw ParseError(ctx + ": field 'op' has unknown operator '" + op + "'");
    n.op = *kind;
    if (auto a = nj.find("attrs"); a != nj.end()) {
      if (!a->is_object()) throw ParseError(ctx + ": field 'attrs' must be an object");
      n.attrs = *a;
    }
    const json& ins = field(nj, "inputs", ctx);
    if (!ins.is_array()) throw ParseError(ctx + ": field 'inputs' must be an array");
    for (auto& r : ins) {
      if (!r.is_string()) throw ParseError(ctx + ": field 'inputs' must hold strings");
      n.inputs.push_back(strip_ref(r.get<std::string>(), ctx));
    }
    g.nodes.push_back(std::move(n));
  }

  const json& outs = field(doc, "outputs", "graph");
  if (!outs.is_array()) throw ParseError("graph: field 'outputs' must be an array");
  for (auto& r : outs) {
    if (!r.is_string()) throw ParseError("graph: field 'outputs' must hold strings");
    g.outputs.push_back(strip_ref(r.get<std::string>(), "outputs"));
  }

  auto diags = validate_graph(g);
  if (!diags.empty()) throw GraphError(diags.front().str());
  return g;
}

Graph load_graph(const std::filesystem::path& path) { return parse_graph(read_file(path)); }

json graph_to_json(const Graph& g) {
  json doc;
  doc["name"] = g.name;
  doc["inputs"] = json::array();
  for (auto& t : g.inputs) {
    json j = spec_json(t);
    j["name"] = t.name;
    doc["inputs"].push_back(j);
  }
  doc["constants"] = json::object();
  for (auto& [name, c] : g.constants) {
    json j = spec_json(c.spec);
    j["data"] = c.data;
    doc["constants"][name] = j;
  }
  doc["nodes"] = json::array();
  for (auto& n : g.nodes) {
    json j;
    j["id"] = n.id;
    j["op"] = std::string(op_name(n.op));
    j["attrs"] = n.attrs;
    j["inputs"] = n.inputs;
    doc["nodes"].push_back(j);
  }
  doc["outputs"] = g.outputs;
  return doc;
}

namespace {

// Indented objects, with scalar-only arrays kept on one line.
void write_json(std::string& out, const json& j, int depth) {
  auto flat = [](const json& a) {
    return std::all_of(a.begin(), a.end(), [](const json& e) { return e.is_primitive(); });
  };
  std::string pad(depth + 1, ' ');
  if (j.is_object() && !j.empty()) {
    out += "{\n";
    size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
      out += pad + json(it.key()).dump() + ": ";
      write_json(out, it.value(), depth + 1);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += std::string(depth, ' ') + "}";
  } else if (j.is_array() && !j.empty() && !flat(j)) {
    out += "[\n";
    for (size_t i = 0; i < j.size(); ++i) {
      out += pad;
      write_json(out, j[i], depth + 1);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += std::string(depth, ' ') + "]";
  } else {
    out += j.dump();
  }
}

}  // namespace

std::string serialize_graph(const Graph& g) {
  std::string out;
  write_json(out, graph_to_json(g), 0);
  return out + "\n";
}

TensorMap parse_tensor_map(std::string_view text) {
  json doc = parse_json(text);
  if (!doc.is_object()) throw ParseError("tensor map must be a JSON object");
  TensorMap m;
  for (auto& [name, v] : doc.items()) m[name] = int_list(v, "tensor '" + name + "'", "data");
  return m;
}

std::string serialize_tensor_map(const TensorMap& m) {
  json doc = json::object();
  for (auto& [name, v] : m) doc[name] = v;
  return doc.dump() + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hetcc
