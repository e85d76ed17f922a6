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

#include "hetcc/cost_model.hpp"

#include "hetcc/layout.hpp"

namespace hetcc {

int64_t contiguous_chunks(std::span<const int64_t> tile, std::span<const int64_t> full) {
  HETCC_CHECK(tile.size() == full.size(), "tile/full rank mismatch");
  size_t s = tile.size();
  while (s > 0 && tile[s - 1] == full[s - 1]) --s;
  // Dimensions [s, n) are fully covered; dimension s-1 (if any) extends
  // the run; everything outside it multiplies the run count.
  int64_t chunks = 1;
  for (size_t i = 0; i + 1 < s; ++i) chunks *= tile[i];
  return chunks;
}

int64_t contiguous_chunks(std::span<const int64_t> tile, std::span<const int64_t> full, const Layout& layout) {
  if (tile.size() != 4) return contiguous_chunks(tile, full);
  auto pt = physical_shape(tile, layout);
  auto pf = physical_shape(full, layout);
  return contiguous_chunks(pt, pf);
}

int64_t transfer_cycles(int64_t bytes, int64_t chunks, const MemoryLevel& level) {
  return ceil_div(bytes, level.bandwidth) + chunks * level.chunk_overhead;
}

std::map<std::string, int64_t> default_cost_constants(CostModelId id) {
  switch (id) {
    case CostModelId::diana:
      return {{"c_read", 1}, {"c_mac", 1}, {"c_write", 1}, {"c_elem", 23}, {"array_k", 16}, {"array_ox", 16}};
    case CostModelId::gap9_cluster:
      return {{"c_inner", 2}, {"c_setup", 200}, {"par_k", 4}, {"par_oy", 8}, {"par_ox", 2},
              {"scratch_per_reduction", 0}};
    case CostModelId::ne16:
      return {{"c_block_3x3", 59}, {"c_block_1x1", 27}, {"c_setup", 300}, {"block_k", 32}, {"block_c", 16},
              {"block_oy", 3}, {"block_ox", 3}};
  }
  return {};
}

CostConstants make_constants(CostModelId id, Composition comp) {
  CostConstants c;
  c.model = id;
  c.composition = comp;
  c.values = default_cost_constants(id);
  return c;
}

namespace {
int64_t at(const DimArray& t, Dim d) { return t[idx(d)]; }
}  // namespace

int64_t diana_tile_cycles(const DimArray& t, const CostConstants& c) {
  int64_t kb = ceil_div(at(t, Dim::K), c.get("array_k"));
  int64_t xb = ceil_div(at(t, Dim::OX), c.get("array_ox"));
  int64_t T = kb * xb * at(t, Dim::OY) * at(t, Dim::C) * at(t, Dim::FY) * at(t, Dim::FX);
  int64_t Wr = kb * xb * at(t, Dim::OY);
  return (c.get("c_read") + c.get("c_mac") + c.get("c_write")) * T + c.get("c_elem") * Wr;
}

int64_t gap9_cluster_tile_cycles(const DimArray& t, const CostConstants& c) {
  int64_t it = ceil_div(at(t, Dim::K), c.get("par_k")) * ceil_div(at(t, Dim::OY), c.get("par_oy")) *
               ceil_div(at(t, Dim::OX), c.get("par_ox")) * at(t, Dim::C) * at(t, Dim::FY) * at(t, Dim::FX);
  return c.get("c_inner") * it + c.get("c_setup");
}

int64_t ne16_tile_cycles(const DimArray& t, const CostConstants& c) {
  int64_t fy = at(t, Dim::FY), fx = at(t, Dim::FX);
  HETCC_CHECK(fy == fx && (fy == 1 || fy == 3), "ne16 supports square 1x1 and 3x3 filters only");
  int64_t bl = ceil_div(at(t, Dim::K), c.get("block_k")) * ceil_div(at(t, Dim::C), c.get("block_c")) *
               ceil_div(at(t, Dim::OY), c.get("block_oy")) * ceil_div(at(t, Dim::OX), c.get("block_ox"));
  return (fy == 3 ? c.get("c_block_3x3") : c.get("c_block_1x1")) * bl + c.get("c_setup");
}

int64_t diana_layer_cycles(std::span<const DimArray> tiles, const CostConstants& c) {
  int64_t s = 0;
  for (auto& t : tiles) s += diana_tile_cycles(t, c);
  return s;
}

int64_t gap9_cluster_layer_cycles(std::span<const DimArray> tiles, const CostConstants& c) {
  int64_t s = 0;
  for (auto& t : tiles) s += gap9_cluster_tile_cycles(t, c);
  return s;
}

int64_t ne16_layer_cycles(std::span<const DimArray> tiles, const CostConstants& c) {
  int64_t s = 0;
  for (auto& t : tiles) s += ne16_tile_cycles(t, c);
  return s;
}

int64_t tile_compute_cycles(const CostConstants& c, const DimArray& tile) {
  switch (c.model) {
    case CostModelId::diana: return diana_tile_cycles(tile, c);
    case CostModelId::gap9_cluster: return gap9_cluster_tile_cycles(tile, c);
    case CostModelId::ne16: return ne16_tile_cycles(tile, c);
  }
  return 0;
}

Adaptation choose_spatial_adaptation(int64_t dim_size, int64_t optimal_unroll) {
  HETCC_CHECK(dim_size >= 1 && optimal_unroll >= 1, "adaptation needs positive sizes");
  if (dim_size % optimal_unroll == 0) return {Adaptation::Kind::keep_reduced, optimal_unroll};
  int64_t D = 1;
  for (int64_t d = optimal_unroll - 1; d >= 1; --d)
    if (dim_size % d == 0) {
      D = d;
      break;
    }
  int64_t reduced = dim_size / D;
  int64_t padded = ceil_div(dim_size, optimal_unroll);
  if (reduced == padded) return {Adaptation::Kind::keep_reduced, D};
  return {Adaptation::Kind::pad_to, optimal_unroll * padded};
}

}  // namespace hetcc
