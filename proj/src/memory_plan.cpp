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

#include <algorithm>
#include <map>

#include "hetcc/codegen.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

const BufferSlot* MemoryPlan::find(const std::string& value) const {
  for (auto& s : slots)
    if (s.value == value) return &s;
  return nullptr;
}

namespace {

bool live_together(const BufferSlot& a, const BufferSlot& b) { return a.first <= b.last && b.first <= a.last; }

int64_t align_up(int64_t v, int64_t a) { return (v + a - 1) / a * a; }

}  // namespace

MemoryPlan plan_static_memory(std::vector<BufferSlot> req, int64_t align) {
  HETCC_CHECK(align >= 1, "alignment must be positive");
  std::stable_sort(req.begin(), req.end(), [](const BufferSlot& a, const BufferSlot& b) {
    if (a.size != b.size) return a.size > b.size;
    if (a.first != b.first) return a.first < b.first;
    return a.value < b.value;
  });
  MemoryPlan plan;
  for (auto& r : req) {
    HETCC_CHECK(r.first <= r.last, "buffer '" + r.value + "' has an empty lifetime");
    std::vector<std::pair<int64_t, int64_t>> busy;
    for (auto& p : plan.slots)
      if (live_together(p, r) && p.size > 0) busy.emplace_back(p.offset, p.offset + p.size);
    std::sort(busy.begin(), busy.end());
    int64_t off = 0;
    for (auto& [lo, hi] : busy) {
      if (off + r.size <= lo) break;
      off = std::max(off, align_up(hi, align));
    }
    r.offset = off;
    plan.arena = std::max(plan.arena, off + r.size);
    plan.slots.push_back(r);
  }
  return plan;
}

bool plan_is_sound(const MemoryPlan& p) {
  for (size_t i = 0; i < p.slots.size(); ++i) {
    auto& a = p.slots[i];
    if (a.offset < 0 || a.offset + a.size > p.arena) return false;
    for (size_t j = i + 1; j < p.slots.size(); ++j) {
      auto& b = p.slots[j];
      if (!live_together(a, b) || a.size == 0 || b.size == 0) continue;
      if (a.offset < b.offset + b.size && b.offset < a.offset + a.size) return false;
    }
  }
  return true;
}

MemoryPlan plan_static_memory(const PartitionedGraph& pg, int64_t align) {
  const Graph& g = pg.graph;
  auto specs = infer_specs(g);
  const int end = static_cast<int>(pg.decisions.size());
  std::map<std::string, BufferSlot> slots;
  std::vector<std::string> order;
  auto define = [&](const std::string& v, int step) {
    BufferSlot s;
    s.value = v;
    s.size = specs.at(v).bytes();
    s.first = s.last = step;
    slots[v] = s;
    order.push_back(v);
  };
  for (auto& in : g.inputs) define(in.name, 0);
  for (int i = 0; i < end; ++i) {
    auto& d = pg.decisions[i];
    for (auto& id : d.node_ids)
      for (auto& v : g.find_node(id)->inputs) {
        auto it = slots.find(v);
        if (it != slots.end()) it->second.last = std::max(it->second.last, i);
      }
    define(d.node_ids.back(), i);
  }
  for (auto& o : g.outputs) {
    auto it = slots.find(o);
    if (it != slots.end()) it->second.last = std::max(it->second.last, end);
  }
  std::vector<BufferSlot> req;
  for (auto& v : order) req.push_back(slots.at(v));
  return plan_static_memory(std::move(req), align);
}

}  // namespace hetcc
