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

#include "hetcc/cost_model.hpp"
#include "hetcc/match.hpp"

namespace hetcc {

/// Loop-nest view of a fused pattern. For depthwise layers C is the
/// per-group reduction extent (1) and the input channel follows K.
struct Workload {
  KernelKind kind = KernelKind::conv;
  DimArray dims = ones();     // as found in the graph
  DimArray adapted = ones();  // after padding decisions
  DimArray spatial = ones();  // resolved unroll per dim
  std::array<Adaptation, kNumDims> adaptation{};
  int64_t sy = 1, sx = 1, dy = 1, dx = 1;
  int64_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
  int64_t IY = 1, IX = 1;  // input spatial extents in the graph
  bool has_bias = false, has_requant = false, has_relu = false;
  std::array<DType, kNumOperands> dtype{DType::i8, DType::i8, DType::i8};
  Layout act_layout = Layout::nchw();
  Layout weight_layout = Layout::oihw();

  /// Temporal extent of d: adapted[d] / spatial[d].
  int64_t temporal(Dim d) const { return adapted[idx(d)] / spatial[idx(d)]; }
  int64_t macs() const;
  bool operator==(const Workload&) const = default;
};

/// Whether loops over `d` index operand `o` of a `kind` workload.
bool relevant(KernelKind kind, Operand o, Dim d);

/// Window extent of the input along one axis for an output tile extent.
inline int64_t window_extent(int64_t out_t, int64_t f_t, int64_t stride, int64_t dil) {
  return (out_t - 1) * stride + (f_t - 1) * dil + 1;
}

/// Bytes of operand `o`'s tile for tile extents `t` (input via windows).
int64_t tile_bytes(const Workload& w, Operand o, const DimArray& t);

/// Storage-order extents of the operand's tile and of its whole tensor,
/// for chunk counting; input tiles are clipped to the tensor.
void operand_extents(const Workload& w, Operand o, const DimArray& t, std::vector<int64_t>& tile,
                     std::vector<int64_t>& full);

/// Chunks of operand `o`'s tile inside its parent tensor.
int64_t tile_chunks(const Workload& w, Operand o, const DimArray& t);
/// Chunks of the tile inside an enclosing tile `parent`.
int64_t tile_chunks(const Workload& w, Operand o, const DimArray& t, const DimArray& parent);

/// Bytes actually moved per transfer of the operand tile (input windows are
/// clipped to the tensor extents).
int64_t transfer_bytes(const Workload& w, Operand o, const DimArray& t);

/// Resolves the unroll and padding decision for every dimension.
void resolve_spatial(Workload& w, const ExecModule& m);

Workload extract_workload(const MatchCandidate& c, const Graph& g, const ExecModule& m);

json workload_to_json(const Workload& w);

}  // namespace hetcc
