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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hetcc/graph_io.hpp"
#include "hetcc/interpreter.hpp"
#include "hetcc/pipeline.hpp"
#include "hetcc/validate.hpp"

namespace fs = std::filesystem;
using namespace hetcc;

namespace {

struct Common {
  std::string graph, target = "gap9", search = "exhaustive", strict = "true";
  uint64_t seed = 0, max_orderings = 200000;
  int threads = 0;
};

bool parse_bool(const std::string& s, const char* flag) {
  // A bare flag arrives as an empty value.
  if (s.empty() || s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw Error(std::string(flag) + " expects true or false, got '" + s + "'");
}

int64_t parse_size(std::string s) {
  int64_t mult = 1;
  if (!s.empty() && (s.back() == 'k' || s.back() == 'K')) mult = 1024, s.pop_back();
  else if (!s.empty() && (s.back() == 'm' || s.back() == 'M')) mult = 1024 * 1024, s.pop_back();
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || v <= 0) throw Error("bad L1 size '" + s + "'");
  return v * mult;
}

std::vector<int64_t> parse_sizes(const std::string& list) {
  std::vector<int64_t> v;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) v.push_back(parse_size(item));
  if (v.empty()) throw Error("--l1-sizes is empty");
  return v;
}

std::string size_label(int64_t b) {
  if (b % (1024 * 1024) == 0) return std::to_string(b / (1024 * 1024)) + "M";
  if (b % 1024 == 0) return std::to_string(b / 1024) + "k";
  return std::to_string(b);
}

CompileOptions options(const Common& c) {
  CompileOptions o;
  if (c.search == "exhaustive")
    o.limits.mode = SearchMode::exhaustive;
  else if (c.search == "genetic")
    o.limits.mode = SearchMode::genetic;
  else
    throw Error("--search must be exhaustive or genetic, got '" + c.search + "'");
  o.limits.seed = c.seed;
  o.limits.max_orderings = c.max_orderings;
  o.limits.threads = c.threads;
  o.strict_requant = parse_bool(c.strict, "--strict-requant");
  return o;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << text;
}

int cmd_compile(const Common& c, const std::string& out, std::string report, const std::string& backend) {
  auto opt = options(c);
  opt.emit.test_backend = parse_bool(backend, "--emit-test-backend");
  Graph g = load_graph(c.graph);
  TargetModel t = load_target(c.target);
  auto r = compile_graph(g, t, opt);
  for (auto& [path, text] : r.program.files) write_text(fs::path(out) / path, text);
  if (report.empty()) report = (fs::path(out) / "report.json").string();
  write_text(report, r.program.report.dump(2) + "\n");

  const json& rep = r.program.report;
  std::printf("%-28s %-9s %-8s %12s %10s  %s\n", "layer", "module", "pattern", "cycles", "MACs/cyc", "schedule");
  for (auto& l : rep["layers"]) {
    bool fb = l["unmodeled"].get<bool>();
    std::printf("%-28s %-9s %-8s %12s %10s  %s\n", l["symbol"].get<std::string>().c_str(),
                l["module"].get<std::string>().c_str(), fb ? "-" : l["pattern"].get<std::string>().c_str(),
                fb ? "-" : std::to_string(l["predicted_cycles"].get<int64_t>()).c_str(),
                fb ? "-" : (std::to_string(l["macs_per_cycle"].get<double>()).substr(0, 6)).c_str(),
                fb ? l["op"].get<std::string>().c_str() : l["schedule"].get<std::string>().c_str());
  }
  const json& mem = rep["memory"];
  std::printf("network: %lld cycles, arena %lld bytes (L2 %lld)\n",
              static_cast<long long>(rep["network"]["predicted_cycles"].get<int64_t>()),
              static_cast<long long>(mem["arena_bytes"].get<int64_t>()),
              static_cast<long long>(mem["l2_bytes"].get<int64_t>()));
  if (mem["out_of_memory"].get<bool>()) std::fprintf(stderr, "warning: activation arena exceeds the target L2\n");
  if (!r.accelerated) {
    std::fprintf(stderr, "warning: no layer is feasible on any module; emitted a host-only program\n");
    return 2;
  }
  return 0;
}

int cmd_estimate(const Common& c, const std::string& sizes, const std::string& report) {
  auto opt = options(c);
  Graph g = load_graph(c.graph);
  TargetModel t = load_target(c.target);
  std::vector<int64_t> l1 = sizes.empty() ? std::vector<int64_t>{} : parse_sizes(sizes);
  const bool base = l1.empty();
  if (base) l1.push_back(0);

  Graph prepared = prepare_graph(g, t, opt.strict_requant);
  std::vector<std::string> rows;
  for (auto& n : prepared.nodes)
    if (anchor_kind(prepared, n)) rows.push_back(n.id);

  json rep;
  rep["schema_version"] = 1;
  rep["mode"] = "estimate";
  rep["target"] = t.name;
  rep["graph"] = g.name;
  rep["l1_sizes"] = json::array();
  std::map<std::string, json> cols;
  bool any = false;
  json totals = json::array();
  for (int64_t s : l1) {
    TargetModel ts = base ? t : with_l1_size(t, s);
    auto pg = dispatch(prepared, ts, opt.limits);
    rep["l1_sizes"].push_back(s);
    int64_t total = 0;
    for (auto& id : rows) {
      json cell = {{"l1", s}, {"module", "fallback"}, {"predicted_cycles", 0}, {"macs_per_cycle", 0.0}};
      for (auto& d : pg.decisions)
        if (d.assigned && d.node_ids[0] == id) {
          cell = {{"l1", s},
                  {"module", d.module},
                  {"predicted_cycles", d.cost.total},
                  {"macs", d.cost.macs},
                  {"macs_per_cycle", d.cost.macs_per_cycle()}};
          total += d.cost.total;
          any = true;
        }
      cols[id].push_back(cell);
    }
    totals.push_back(total);
  }
  json layers = json::array();
  for (auto& id : rows) layers.push_back({{"node", id}, {"columns", cols[id]}});
  rep["layers"] = layers;
  rep["network_cycles"] = totals;
  if (!report.empty()) write_text(report, rep.dump(2) + "\n");

  std::printf("%-20s", "MACs/cycle");
  for (int64_t s : l1) std::printf(" %12s", base ? "default" : size_label(s).c_str());
  std::printf("\n");
  for (auto& id : rows) {
    std::printf("%-20s", id.c_str());
    for (auto& cell : cols[id]) {
      if (cell["module"] == "fallback")
        std::printf(" %12s", "fallback");
      else
        std::printf(" %12.4f", cell["macs_per_cycle"].get<double>());
    }
    std::printf("\n");
  }
  if (!any) {
    std::fprintf(stderr, "warning: no layer is feasible on any module\n");
    return 2;
  }
  return 0;
}

int cmd_run_oracle(const std::string& graph, const std::string& input) {
  Graph g = load_graph(graph);
  TensorMap in = input.empty() ? TensorMap{} : parse_tensor_map(read_file(input));
  std::cout << serialize_tensor_map(interpret_graph(g, in));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hetcc: tiling compiler for heterogeneous MCU targets"};
  app.require_subcommand(1);
  Common c;
  std::string out = "out", report, backend = "false", sizes, input;

  auto common = [&](CLI::App* s) {
    s->add_option("--graph", c.graph, "graph JSON")->required();
    s->add_option("--target", c.target, "built-in target name or target JSON path");
    s->add_option("--search", c.search, "exhaustive or genetic");
    s->add_option("--seed", c.seed, "genetic search seed");
    s->add_option("--max-orderings", c.max_orderings, "exhaustive search budget");
    s->add_option("--strict-requant", c.strict, "only exact requant rewrites (true/false)")
        ->expected(0, 1);
    s->add_option("--threads", c.threads, "DSE threads (0: OpenMP default)");
  };
  auto* compile = app.add_subcommand("compile", "emit C for a graph");
  common(compile);
  compile->add_option("--out", out, "output directory");
  compile->add_option("--report", report, "report path (default OUT/report.json)");
  compile->add_option("--emit-test-backend", backend, "also emit the host test backend (true/false)")
      ->expected(0, 1);

  auto* estimate = app.add_subcommand("estimate", "predicted MACs/cycle per layer, no emission");
  common(estimate);
  estimate->add_option("--l1-sizes", sizes, "comma-separated L1 capacities, e.g. 128k,64k");
  estimate->add_option("--report", report, "write the table as JSON");

  auto* oracle = app.add_subcommand("run-oracle", "evaluate a graph with the reference interpreter");
  oracle->add_option("--graph", c.graph, "graph JSON")->required();
  oracle->add_option("--input", input, "input tensors JSON {name: [values]}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (*compile) return cmd_compile(c, out, report, backend);
    if (*estimate) return cmd_estimate(c, sizes, report);
    return cmd_run_oracle(c.graph, input);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
