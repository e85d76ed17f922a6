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

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hetcc/workload.hpp"

namespace hetcc {

struct LoopFactor {
  Dim dim = Dim::K;
  int64_t factor = 1;
  auto operator<=>(const LoopFactor&) const = default;
};

using Ordering = std::vector<LoopFactor>;  // innermost first

std::vector<int64_t> prime_factorize(int64_t n);

/// Prime factors of every temporal extent, sorted by (dim, prime).
Ordering workload_factors(const Workload& w);

/// n! / prod(m_i!) over the distinct factors, saturating at UINT64_MAX.
uint64_t count_orderings(const Ordering& factors);

struct OrderingSet {
  std::vector<Ordering> orderings;
  bool truncated = false;
};

/// Distinct permutations in lexicographic order, at most `cap` of them.
OrderingSet enumerate_orderings(Ordering factors, uint64_t cap);

/// Visits distinct permutations in lexicographic order until `visit`
/// returns false or `cap` are produced. Returns true when truncated.
bool for_each_ordering(Ordering factors, uint64_t cap, const std::function<bool(const Ordering&)>& visit);

enum class Buffering { single, dbl };

struct Schedule {
  DimArray spatial = ones();
  Ordering temporal;
  /// cuts[o][b]: loops (innermost first) kept below level boundary b of the
  /// operand's level chain; boundary b separates chain levels b and b+1.
  std::array<std::vector<int>, kNumOperands> cuts;
  std::array<std::vector<Buffering>, kNumOperands> buffering;

  bool operator==(const Schedule&) const = default;
};

struct Allocation {
  std::array<std::vector<int>, kNumOperands> cuts;
  std::array<std::vector<Buffering>, kNumOperands> buffering;
};

/// Greedy innermost-out placement of an ordering's loops into the levels.
/// A positive `budget` caps the capacity of every non-top level.
std::optional<Allocation> allocate_levels(const Ordering& ordering, const Workload& w, const ExecModule& m,
                                          int64_t budget = 0);

constexpr int64_t kMinTilingBudget = 1024;

/// Budgets each ordering is allocated under: the largest non-top level
/// size, then every 2^k and 3 * 2^(k-1) below it down to kMinTilingBudget,
/// descending. The greedy rule alone never tiles a layer that fits, so it
/// would miss transfer/compute overlap that a tighter budget enables.
std::vector<int64_t> tiling_budgets(const ExecModule& m);

/// Tile extents (all dims) of operand `o` at its chain position `j`.
DimArray operand_tile(const Schedule& s, Operand o, int j);

/// Bytes resident per module level (top level excluded: it holds whole
/// tensors and is accounted by the network memory plan). Index = level.
std::vector<int64_t> schedule_footprint(const Schedule& s, const Workload& w, const ExecModule& m);

/// Extra L1 bytes a module reserves for a workload independent of tiling.
int64_t scratch_bytes(const Workload& w, const ExecModule& m);

struct TransferCost {
  int64_t transfers = 0;
  int64_t bytes = 0;   // per transfer
  int64_t chunks = 0;  // per transfer
  int64_t cycles = 0;  // all transfers
  Buffering buffering = Buffering::single;
};

struct CostBreakdown {
  int64_t total = 0;
  int64_t l_ops = 0;
  std::array<std::vector<TransferCost>, kNumOperands> l_mem;  // per boundary
  Composition composition = Composition::sync_sum;
  int64_t macs = 0;
  int64_t kernel_calls = 0;
  DimArray kernel_tile = ones();
  double macs_per_cycle() const { return total > 0 ? static_cast<double>(macs) / static_cast<double>(total) : 0.0; }
  int64_t mem_cycles() const;
};

CostBreakdown evaluate_schedule(const Schedule& s, const Workload& w, const ExecModule& m);

/// Checks factor conservation and monotone cuts; throws InternalError.
void check_schedule(const Schedule& s, const Workload& w, const ExecModule& m);

std::string schedule_digest(const Schedule& s, const ExecModule& m);
json schedule_to_json(const Schedule& s);
json cost_to_json(const CostBreakdown& c);

enum class SearchMode { exhaustive, genetic };

struct SearchLimits {
  SearchMode mode = SearchMode::exhaustive;
  uint64_t max_orderings = 200000;  // also caps merged search states
  uint64_t seed = 0;
  int threads = 0;  // 0: OpenMP default
  int population = 48;
  int generations = 40;
};

struct SearchResult {
  Schedule schedule;
  CostBreakdown cost;
  SearchMode used = SearchMode::exhaustive;
  uint64_t orderings = 0;   // size of the ordering space (saturating)
  uint64_t evaluated = 0;   // leaves / genomes actually costed
};

/// Best schedule. An ordering costs the minimum of its allocations over
/// tiling_budgets (ties keep the larger budget). Exhaustive mode returns the
/// exact minimum over every distinct ordering with ties broken by the
/// lexicographically smallest ordering; it merges prefixes reaching identical allocation states and
/// falls back to genetic search when more than max_orderings states would
/// be explored.
std::optional<SearchResult> search_best(const Workload& w, const ExecModule& m, const SearchLimits& limits = {});

/// Reference search: evaluates every enumerated ordering (up to the cap).
/// `parallel` splits evaluation over OpenMP threads; the reduction is the
/// same deterministic (cost, ordering index) minimum.
std::optional<SearchResult> search_enumerated(const Workload& w, const ExecModule& m, uint64_t cap, bool parallel,
                                              int threads = 0);

/// Genetic search over permutation genomes.
std::optional<SearchResult> search_genetic(const Workload& w, const ExecModule& m, const SearchLimits& limits);

/// Schedule whose loops all sit under every cut (nothing tiled).
Schedule untiled_schedule(const Workload& w, const ExecModule& m);

}  // namespace hetcc
