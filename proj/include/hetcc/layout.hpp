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

#include "hetcc/graph.hpp"

namespace hetcc {

// Canonical index spaces: NCHW for 4-D activations, OIHW for 4-D filters.
// Everything else (rank 1/2 tensors) is stored in its canonical order.

/// Built-in blocked filter layouts.
///   diana_kblock16: [K/16][C][FY][FX][16]          (K multiple of 16)
///   ne16_cblock16:  [K][ceil(C/16)][FY][FX][<=16]  (last C block may be short)
bool is_known_custom_layout(std::string_view name);

std::vector<int64_t> canonical_shape(const TensorSpec& s);
std::vector<int64_t> physical_shape(std::span<const int64_t> canonical, const Layout& layout);

/// Offset of filter element (k, c, fy, fx) in a filter of canonical shape
/// (K, C, FY, FX) stored in `layout`. Throws ConfigError for unknown or
/// inapplicable custom layouts.
int64_t filter_offset(const Layout& layout, int64_t K, int64_t C, int64_t FY, int64_t FX, int64_t k, int64_t c,
                      int64_t fy, int64_t fx);

/// Checks that `layout` can store a filter of the given canonical shape.
void check_filter_layout(const Layout& layout, int64_t K, int64_t C, int64_t FY, int64_t FX);

std::vector<int64_t> to_canonical(const TensorSpec& s, std::span<const int64_t> physical);
std::vector<int64_t> from_canonical(const TensorSpec& target, std::span<const int64_t> canonical);

/// Linear offset of canonical NCHW index in an activation of canonical shape.
inline int64_t activation_offset(bool nhwc, const std::vector<int64_t>& cs, int64_t n, int64_t c, int64_t h, int64_t w) {
  if (nhwc) return ((n * cs[2] + h) * cs[3] + w) * cs[1] + c;
  return ((n * cs[1] + c) * cs[2] + h) * cs[3] + w;
}

}  // namespace hetcc
