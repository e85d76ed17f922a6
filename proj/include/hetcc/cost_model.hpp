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

#include <span>
#include <vector>

#include "hetcc/target.hpp"

namespace hetcc {

/// Number of maximal contiguous runs a tile occupies in its parent tensor.
/// Extents are given in storage order, outermost first.
int64_t contiguous_chunks(std::span<const int64_t> tile, std::span<const int64_t> full);

/// Same, with canonical (NCHW / OIHW) 4-D extents and a storage layout.
/// Rank 1 and 2 extents are taken as already in storage order.
int64_t contiguous_chunks(std::span<const int64_t> tile, std::span<const int64_t> full, const Layout& layout);

/// ceil(bytes / bandwidth) + chunks * chunk_overhead of the source level.
int64_t transfer_cycles(int64_t bytes, int64_t chunks, const MemoryLevel& level);

/// Built-in constant sets (all overridable from a target description).
std::map<std::string, int64_t> default_cost_constants(CostModelId id);
CostConstants make_constants(CostModelId id, Composition comp = Composition::sync_sum);

// Compute cycles of one L1-resident tile; extents indexed by Dim.
int64_t diana_tile_cycles(const DimArray& t, const CostConstants& c);
int64_t gap9_cluster_tile_cycles(const DimArray& t, const CostConstants& c);
int64_t ne16_tile_cycles(const DimArray& t, const CostConstants& c);

// Sums over a tile trace.
int64_t diana_layer_cycles(std::span<const DimArray> tiles, const CostConstants& c);
int64_t gap9_cluster_layer_cycles(std::span<const DimArray> tiles, const CostConstants& c);
int64_t ne16_layer_cycles(std::span<const DimArray> tiles, const CostConstants& c);

int64_t tile_compute_cycles(const CostConstants& c, const DimArray& tile);

struct Adaptation {
  enum class Kind { keep_reduced, pad_to };
  Kind kind = Kind::keep_reduced;
  int64_t value = 1;  // the unroll kept, or the padded extent

  friend bool operator==(const Adaptation&, const Adaptation&) = default;
};

/// Keep the optimal unroll when it divides the extent; otherwise use the
/// largest smaller divisor if that costs no extra iterations, else pad.
Adaptation choose_spatial_adaptation(int64_t dim_size, int64_t optimal_unroll);

}  // namespace hetcc
