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

// Times the serial reference search, its OpenMP split and the merged
// exhaustive search on a few layers. Usage: hetcc_dse_bench [threads]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "support/workloads.hpp"

using namespace hetcc;
using hetcc::testing::ConvShape;

namespace {

struct Case {
  const char* target;
  const char* module;
  KernelKind kind;
  ConvShape shape;
};

template <class F>
double millis(F&& f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_max_threads();
  const Case cases[] = {
      {"gap9", "cluster", KernelKind::conv, {16, 8, 8, 8, 3, 3, 1, 1}},
      {"gap9", "cluster", KernelKind::conv, {32, 16, 16, 8, 1, 1, 1, 0}},
      {"gap9", "ne16", KernelKind::conv, {32, 32, 8, 8, 3, 3, 1, 1}},
      {"gap9", "cluster", KernelKind::depthwise, {32, 32, 16, 16, 3, 3, 1, 1}},
      {"diana", "digital", KernelKind::conv, {32, 32, 16, 8, 3, 3, 1, 1}},
      {"diana", "digital", KernelKind::conv, {64, 32, 8, 8, 1, 1, 1, 0}},
  };
  constexpr uint64_t kCap = 100000;
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  std::printf("threads %d\n", threads);
  std::printf("%-8s %-8s %-10s %9s %11s %11s %11s %8s %s\n", "target", "module", "kind", "orderings", "serial_ms",
              "parallel_ms", "merged_ms", "speedup", "agree");
  int bad = 0;
  for (const Case& c : cases) {
    TargetModel t = builtin_target(c.target);
    const ExecModule& m = *t.find(c.module);
    Workload w = hetcc::testing::make_workload(m, t.activation_layout, c.kind, c.shape);
    std::optional<SearchResult> s, p, b;
    double ts = millis([&] { s = search_enumerated(w, m, kCap, false); });
    double tp = millis([&] { p = search_enumerated(w, m, kCap, true, threads); });
    SearchLimits lim;
    lim.threads = threads;
    lim.max_orderings = kCap;
    double tb = millis([&] { b = search_best(w, m, lim); });
    bool agree = s && p && b && s->cost.total == p->cost.total && s->schedule == p->schedule;
    // The reference is exact only when it saw every ordering.
    if (agree && s->evaluated == s->orderings) agree = b->cost.total == s->cost.total;
    bad += !agree;
    std::printf("%-8s %-8s %-10s %9llu %11.1f %11.1f %11.1f %8.2f %s\n", c.target, c.module,
                std::string(kernel_kind_name(c.kind)).c_str(), static_cast<unsigned long long>(s ? s->orderings : 0), ts,
                tp, tb, tp > 0 ? ts / tp : 0.0, agree ? "yes" : "NO");
  }
  return bad ? 1 : 0;
}
