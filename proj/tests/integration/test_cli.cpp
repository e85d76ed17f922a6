#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hetcc/graph_io.hpp"
#include "hetcc/target.hpp"

namespace fs = std::filesystem;
using namespace hetcc;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr
};

Run cli(const std::string& args) {
  std::string cmd = std::string(HETCC_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string fixture(const std::string& name) { return std::string(HETCC_FIXTURE_DIR) + "/" + name + ".json"; }

fs::path work(const std::string& name) {
  fs::path d = fs::path(HETCC_WORK_DIR) / "cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

}  // namespace

TEST_CASE("cli: a missing graph file fails with its path") {
  auto r = cli("compile --graph /nonexistent/g.json --out " + work("missing").string());
  CHECK(r.code == 1);
  CHECK(r.out.find("/nonexistent/g.json") != std::string::npos);
}

TEST_CASE("cli: an unknown target is an error") {
  auto r = cli("estimate --graph " + fixture("dscnn") + " --target nowhere");
  CHECK(r.code == 1);
  CHECK(r.out.find("nowhere") != std::string::npos);
}

TEST_CASE("cli: compile writes the program and a report") {
  auto d = work("compile");
  auto r = cli("compile --graph " + fixture("dscnn") + " --target gap9 --out " + d.string());
  REQUIRE_MESSAGE(r.code == 0, r.out);
  for (const char* f : {"match_api.h", "hetcc_runtime.h", "network.h", "main.c", "weights.c", "Makefile"})
    CHECK_MESSAGE(fs::exists(d / f), f);
  CHECK(!fs::exists(d / "match_test_backend.c"));
  json rep = read_json(d / "report.json");
  CHECK(rep["schema_version"] == 1);
  CHECK(rep["target"] == "gap9");
  CHECK(r.out.find("network:") != std::string::npos);
}

TEST_CASE("cli: the test backend is emitted on request") {
  auto d = work("backend");
  auto r = cli("compile --graph " + fixture("dscnn") + " --target diana --emit-test-backend true --out " +
               d.string() + " --report " + (d / "r.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.out);
  CHECK(fs::exists(d / "match_test_backend.c"));
  CHECK(fs::exists(d / "r.json"));
}

TEST_CASE("cli: boolean options work as bare flags") {
  auto on = work("flag_on"), off = work("flag_off");
  std::string base = "compile --graph " + fixture("dae") + " --target gap9 ";
  REQUIRE(cli(base + "--emit-test-backend --threads 1 --out " + on.string()).code == 0);
  REQUIRE(cli(base + "--emit-test-backend=false --out " + off.string()).code == 0);
  CHECK(fs::exists(on / "match_test_backend.c"));
  CHECK_FALSE(fs::exists(off / "match_test_backend.c"));
  CHECK(cli(base + "--emit-test-backend maybe --out " + off.string()).code == 1);
}

TEST_CASE("cli: a target too small for every layer exits with 2") {
  auto d = work("tiny");
  {
    std::ofstream f(d / "tiny.json");
    f << target_to_json(with_l1_size(builtin_target("diana"), 64)).dump(2);
  }
  auto r = cli("compile --graph " + fixture("resnet8") + " --target " + (d / "tiny.json").string() + " --out " +
               (d / "out").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("warning") != std::string::npos);
  CHECK(fs::exists(d / "out" / "main.c"));
}

TEST_CASE("cli: estimate prints one row per anchor and one column per L1 size") {
  auto d = work("estimate");
  auto r = cli("estimate --graph " + fixture("resnet8") + " --target gap9 --l1-sizes 128k,32k,8k --report " +
               (d / "e.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.out);
  json rep = read_json(d / "e.json");
  CHECK(rep["mode"] == "estimate");
  CHECK(rep["l1_sizes"] == json({131072, 32768, 8192}));
  REQUIRE(rep["layers"].size() > 0);
  for (auto& l : rep["layers"]) {
    CHECK(l["columns"].size() == 3);
    CHECK(r.out.find(l["node"].get<std::string>()) != std::string::npos);
  }
}

TEST_CASE("cli: genetic search is reproducible from the seed") {
  auto a = work("gen_a"), b = work("gen_b");
  std::string flags = " --graph " + fixture("dscnn") + " --target gap9 --search genetic --seed 9 --out ";
  REQUIRE(cli("compile" + flags + a.string() + " --threads 1").code == 0);
  REQUIRE(cli("compile" + flags + b.string() + " --threads 4").code == 0);
  CHECK(read_json(a / "report.json") == read_json(b / "report.json"));
}

TEST_CASE("cli: run-oracle evaluates a graph") {
  auto d = work("oracle");
  auto g = load_graph(fixture("dscnn"));
  json in = json::object();
  for (auto& t : g.inputs) {
    in[t.name] = std::vector<int64_t>(static_cast<size_t>(t.numel()), 1);
  }
  {
    std::ofstream f(d / "in.json");
    f << in.dump();
  }
  auto r = cli("run-oracle --graph " + fixture("dscnn") + " --input " + (d / "in.json").string());
  REQUIRE_MESSAGE(r.code == 0, r.out);
  json out = json::parse(r.out);
  for (auto& o : g.outputs) CHECK(out.contains(o));
}
