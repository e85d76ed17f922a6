#include <doctest.h>

#include <filesystem>

#include "hetcc/graph_io.hpp"
#include "support/c_harness.hpp"
#include "support/layers.hpp"
#include "support/random_graphs.hpp"

using namespace hetcc;
using namespace hetcc::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = HETCC_WORK_DIR;

constexpr LayerFamily kFamilies[] = {LayerFamily::conv, LayerFamily::depthwise, LayerFamily::dense,
                                     LayerFamily::add,  LayerFamily::pool,      LayerFamily::elementwise};

void check_run(const GeneratedRun& r, const std::string& what) {
  INFO(what << ": " << r.detail);
  CHECK(r.built);
  CHECK(r.ran);
  CHECK(r.outputs_match);
  CHECK(r.counters_match);
}

}  // namespace

TEST_CASE("generated C matches the interpreter on random single layers") {
  for (const char* name : {"diana", "gap9"}) {
    TargetModel t = builtin_target(name);
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 20; ++i) {
      LayerFamily f = kFamilies[i % 6];
      Graph g = layer_graph(f, random_layer_shape(f, rng), rng);
      auto in = random_inputs(g, rng);
      auto r = run_generated(g, t, in, kWork / (std::string(name) + "_layer" + std::to_string(i)));
      check_run(r, std::string(name) + " layer " + std::to_string(i));
    }
  }
}

TEST_CASE("generated C matches the interpreter on the network fixtures") {
  for (const char* name : {"diana", "gap9"}) {
    TargetModel t = builtin_target(name);
    for (const char* fx : {"resnet8", "dscnn", "mobilenet", "dae"}) {
      Graph g = load_graph(fs::path(HETCC_FIXTURE_DIR) / (std::string(fx) + ".json"));
      std::mt19937_64 rng(7);
      auto r = run_generated(g, t, random_inputs(g, rng), kWork / (std::string(name) + "_" + fx));
      check_run(r, std::string(name) + " " + fx);
    }
  }
}

TEST_CASE("generated C stays exact when small L1 forces tiling") {
  int tiled = 0, dbl = 0;
  for (const char* name : {"diana", "gap9"}) {
    for (int64_t l1 : {4096, 12288}) {
      TargetModel t = with_l1_size(builtin_target(name), l1);
      std::mt19937_64 rng(99 + l1);
      for (int i = 0; i < 8; ++i) {
        LayerFamily f = kFamilies[i % 4];
        LayerShape s = random_layer_shape(f, rng);
        s.H = s.W = 16;
        s.C = std::max<int64_t>(s.C, 16);
        Graph g = layer_graph(f, s, rng);
        auto r = run_generated(g, t, random_inputs(g, rng),
                               kWork / (std::string(name) + "_l1_" + std::to_string(l1) + "_" + std::to_string(i)));
        check_run(r, std::string(name) + " L1 " + std::to_string(l1) + " case " + std::to_string(i));
        for (auto& l : r.report["layers"]) {
          if (l["unmodeled"].get<bool>()) continue;
          auto& tr = l["transfers"];
          if (tr["I"].get<int64_t>() > 1 || tr["W"].get<int64_t>() > 1 || tr["O"].get<int64_t>() > 1) ++tiled;
          if (l["schedule"].get<std::string>().find("dbl=-") == std::string::npos) ++dbl;
        }
      }
    }
  }
  CHECK(tiled >= 10);
  CHECK(dbl >= 3);
}

TEST_CASE("a network without layers runs and writes an empty counter file") {
  Graph g;
  g.name = "identity";
  g.inputs.push_back({"x", {4}, DType::i8, Layout::none()});
  g.outputs = {"x"};
  auto r = run_generated(g, builtin_target("gap9"), {{"x", {1, -2, 3, -4}}}, kWork / "empty");
  CHECK(r.ran);
  CHECK(r.outputs_match);
  CHECK(r.counters_match);
  CHECK(r.report["layers"].empty());
}
