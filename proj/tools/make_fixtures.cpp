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

// Writes the bundled network fixtures. Weights are random with a fixed
// seed; only the topologies follow the MLPerf Tiny reference models.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hetcc/builder.hpp"
#include "hetcc/graph_io.hpp"

using namespace hetcc;

namespace {

class Net {
 public:
  Net(const std::string& name, uint64_t seed) : b_(name), rng_(seed) {}

  std::string input(std::vector<int64_t> shape) {
    shape_[ "x" ] = shape;
    return b_.input("x", shape);
  }

  // conv2d [-> bias_add] -> requant; relu folds into the requant lower bound.
  std::string conv(const std::string& id, const std::string& x, int64_t cout, int64_t fy, int64_t fx, int64_t stride,
                   std::array<int64_t, 4> pad, bool depthwise, bool bias, bool relu) {
    auto s = shape_.at(x);
    const int64_t cin = s[1];
    if (depthwise) cout = cin;
    const int64_t cg = depthwise ? 1 : cin;
    b_.random_constant(id + "_w", {cout, cg, fy, fx}, DType::i8, -16, 16, rng_);
    ConvAttrs a;
    a.sy = a.sx = stride;
    a.pad_top = pad[0], a.pad_left = pad[1], a.pad_bottom = pad[2], a.pad_right = pad[3];
    a.groups = depthwise ? cin : 1;
    std::string y = b_.conv2d(id, x, id + "_w", a);
    if (bias) {
      b_.random_constant(id + "_b", {cout}, DType::i32, -2000, 2000, rng_);
      y = b_.node(id + "_bias", OpKind::bias_add, {y, id + "_b"});
    }
    int64_t oy = window_out(s[2], pad[0], pad[2], fy, 1, stride);
    int64_t ox = window_out(s[3], pad[1], pad[3], fx, 1, stride);
    y = requant(id + "_rq", y, cout, cg * fy * fx, relu);
    shape_[y] = {1, cout, oy, ox};
    return y;
  }

  std::string add(const std::string& id, const std::string& a, const std::string& b) {
    std::string y = b_.node(id, OpKind::add, {a, b});
    RequantAttrs r;
    r.M = {1};
    r.B = {0};
    r.S = 1;
    r.min = 0;
    y = b_.requant(id + "_rq", y, r);
    shape_[y] = shape_.at(a);
    return y;
  }

  std::string avgpool(const std::string& id, const std::string& x) {
    auto s = shape_.at(x);
    json at = {{"kernel", {s[2], s[3]}}, {"strides", {1, 1}}, {"padding", {0, 0, 0, 0}}};
    std::string y = b_.node(id, OpKind::avgpool2d, {x}, at);
    shape_[y] = {1, s[1], 1, 1};
    return y;
  }

  std::string flatten(const std::string& id, const std::string& x) {
    auto s = shape_.at(x);
    std::string y = b_.node(id, OpKind::flatten, {x});
    shape_[y] = {1, s[1] * s[2] * s[3]};
    return y;
  }

  std::string dense(const std::string& id, const std::string& x, int64_t k, bool bias, bool relu) {
    const int64_t c = shape_.at(x)[1];
    b_.random_constant(id + "_w", {k, c}, DType::i8, -16, 16, rng_);
    std::string y = b_.node(id, OpKind::dense, {x, id + "_w"});
    if (bias) {
      b_.random_constant(id + "_b", {k}, DType::i32, -2000, 2000, rng_);
      y = b_.node(id + "_bias", OpKind::bias_add, {y, id + "_b"});
    }
    y = requant(id + "_rq", y, k, c, relu);
    shape_[y] = {1, k};
    return y;
  }

  Graph build(const std::string& out) { return b_.build({out}); }

 private:
  // Per-channel scale that keeps typical accumulators inside the i8 range.
  std::string requant(const std::string& id, const std::string& x, int64_t channels, int64_t fan_in, bool relu) {
    std::uniform_int_distribution<int64_t> m(24, 40), bb(-256, 256);
    RequantAttrs r;
    double spread = std::sqrt(static_cast<double>(fan_in)) * 16.0 * 60.0;
    r.S = std::clamp<int64_t>(std::lround(std::log2(32.0 * spread / 48.0)), 0, 31);
    for (int64_t c = 0; c < channels; ++c) {
      r.M.push_back(m(rng_));
      r.B.push_back(bb(rng_) << std::max<int64_t>(r.S - 4, 0));
    }
    if (relu) r.min = 0;
    return b_.requant(id, x, r);
  }

  GraphBuilder b_;
  std::mt19937_64 rng_;
  std::map<std::string, std::vector<int64_t>> shape_;
};

constexpr std::array<int64_t, 4> kSame3{1, 1, 1, 1};
constexpr std::array<int64_t, 4> kNone{0, 0, 0, 0};

// 8 convolutions in three residual stacks, global pooling and a classifier.
Graph resnet8() {
  Net n("resnet8", 1);
  auto x = n.input({1, 3, 32, 32});
  x = n.conv("stem", x, 16, 3, 3, 1, kSame3, false, false, true);
  auto y = n.conv("s1a", x, 16, 3, 3, 1, kSame3, false, false, true);
  y = n.conv("s1b", y, 16, 3, 3, 1, kSame3, false, false, false);
  x = n.add("s1_add", x, y);
  y = n.conv("s2a", x, 64, 3, 3, 2, {0, 0, 1, 1}, false, false, true);
  y = n.conv("s2b", y, 64, 3, 3, 1, kSame3, false, false, false);
  auto sc = n.conv("s2_short", x, 64, 1, 1, 2, kNone, false, false, false);
  x = n.add("s2_add", sc, y);
  y = n.conv("s3a", x, 64, 3, 3, 1, kSame3, false, false, true);
  y = n.conv("s3b", y, 64, 3, 3, 1, kSame3, false, false, false);
  x = n.add("s3_add", x, y);
  x = n.avgpool("pool", x);
  x = n.flatten("flat", x);
  x = n.dense("fc", x, 10, false, false);
  return n.build(x);
}

// Keyword spotting: a 10x4 time/frequency filter and four depthwise
// separable blocks.
Graph dscnn() {
  Net n("dscnn", 2);
  auto x = n.input({1, 1, 49, 10});
  x = n.conv("conv1", x, 64, 10, 4, 2, {4, 1, 5, 1}, false, true, true);
  for (int i = 1; i <= 4; ++i) {
    std::string s = std::to_string(i);
    x = n.conv("dw" + s, x, 64, 3, 3, 1, kSame3, true, true, true);
    x = n.conv("pw" + s, x, 64, 1, 1, 1, kNone, false, true, true);
  }
  x = n.avgpool("pool", x);
  x = n.flatten("flat", x);
  x = n.dense("fc", x, 12, true, false);
  return n.build(x);
}

// MobileNet-style stem at full 224x224 resolution followed by depthwise
// separable blocks; its activations do not fit a 512 kB main memory.
Graph mobilenet() {
  Net n("mobilenet", 3);
  auto x = n.input({1, 3, 224, 224});
  x = n.conv("conv1", x, 32, 3, 3, 2, {0, 0, 1, 1}, false, true, true);
  struct Block {
    int64_t cout, stride;
  };
  const Block blocks[] = {{64, 1}, {128, 2}, {128, 2}, {256, 2}};
  int i = 0;
  for (auto b : blocks) {
    std::string s = std::to_string(++i);
    auto pad = b.stride == 1 ? kSame3 : std::array<int64_t, 4>{0, 0, 1, 1};
    x = n.conv("dw" + s, x, 0, 3, 3, b.stride, pad, true, true, true);
    x = n.conv("pw" + s, x, b.cout, 1, 1, 1, kNone, false, true, true);
  }
  x = n.avgpool("pool", x);
  x = n.flatten("flat", x);
  x = n.dense("fc", x, 10, true, false);
  return n.build(x);
}

// Anomaly-detection autoencoder: fully connected only.
Graph dae() {
  Net n("dae", 4);
  auto x = n.input({1, 640});
  const int64_t widths[] = {128, 128, 128, 128, 8, 128, 128, 128, 128};
  int i = 0;
  for (auto k : widths) x = n.dense("fc" + std::to_string(++i), x, k, true, true);
  x = n.dense("fc_out", x, 640, true, false);
  return n.build(x);
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "fixtures";
  std::filesystem::create_directories(dir);
  for (auto& [name, g] : {std::pair{"resnet8", resnet8()}, {"dscnn", dscnn()}, {"mobilenet", mobilenet()}, {"dae", dae()}}) {
    std::ofstream f(dir / (std::string(name) + ".json"));
    f << serialize_graph(g);
    std::cout << name << ": " << g.nodes.size() << " nodes\n";
  }
  return 0;
}
