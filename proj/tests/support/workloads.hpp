#pragma once

#include <optional>
#include <random>

#include "hetcc/dse.hpp"
#include "hetcc/target.hpp"
#include "hetcc/workload.hpp"

namespace hetcc::testing {

struct ConvShape {
  int64_t K = 1, C = 1, OY = 1, OX = 1, FY = 1, FX = 1;
  int64_t stride = 1, pad = 0;
};

/// Workload built directly (no graph), spatially resolved for `m`.
Workload make_workload(const ExecModule& m, Layout act, KernelKind kind, const ConvShape& s);

struct RandomWorkload {
  TargetModel target;
  int module = 0;
  Workload w;
  const ExecModule& exec() const { return target.modules[module]; }
};

/// Random layer on a random built-in target with a random L1 cap. When
/// max_factors > 0 the temporal prime-factor count is at most that.
RandomWorkload random_workload(std::mt19937_64& rng, int max_factors = 0);

struct OracleResult {
  int64_t cost = 0;
  Ordering ordering;
};

/// Brute force over every distinct ordering with its own allocation and
/// cost composition; only the per-tile primitives are shared.
std::optional<OracleResult> brute_force_best(const Workload& w, const ExecModule& m);

}  // namespace hetcc::testing
