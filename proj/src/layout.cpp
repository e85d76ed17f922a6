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

#include "hetcc/layout.hpp"

namespace hetcc {

bool is_known_custom_layout(std::string_view name) { return name == "diana_kblock16" || name == "ne16_cblock16"; }

std::vector<int64_t> canonical_shape(const TensorSpec& s) {
  const auto& p = s.shape;
  if (p.size() != 4) return p;
  switch (s.layout.kind) {
    case Layout::Kind::NHWC: return {p[0], p[3], p[1], p[2]};
    case Layout::Kind::OHWI: return {p[0], p[3], p[1], p[2]};
    case Layout::Kind::Custom: {
      // Custom filter layouts keep their canonical OIHW extents in the
      // physical shape field; only the payload order differs.
      return p;
    }
    default: return p;
  }
}

std::vector<int64_t> physical_shape(std::span<const int64_t> c, const Layout& layout) {
  std::vector<int64_t> v(c.begin(), c.end());
  if (v.size() != 4) return v;
  if (layout.kind == Layout::Kind::NHWC || layout.kind == Layout::Kind::OHWI) return {c[0], c[2], c[3], c[1]};
  return v;
}

void check_filter_layout(const Layout& layout, int64_t K, int64_t, int64_t, int64_t) {
  if (layout.kind != Layout::Kind::Custom) return;
  if (!is_known_custom_layout(layout.custom)) throw ConfigError("unknown custom weight layout '" + layout.custom + "'");
  if (layout.custom == "diana_kblock16" && K % 16 != 0)
    throw ConfigError("layout diana_kblock16 needs K multiple of 16, got " + std::to_string(K));
}

int64_t filter_offset(const Layout& layout, int64_t /*K*/, int64_t C, int64_t FY, int64_t FX, int64_t k, int64_t c,
                      int64_t fy, int64_t fx) {
  switch (layout.kind) {
    case Layout::Kind::OHWI: return ((k * FY + fy) * FX + fx) * C + c;
    case Layout::Kind::Custom:
      if (layout.custom == "diana_kblock16") return ((((k / 16) * C + c) * FY + fy) * FX + fx) * 16 + k % 16;
      if (layout.custom == "ne16_cblock16") {
        int64_t cb0 = (c / 16) * 16;
        int64_t bw = std::min<int64_t>(16, C - cb0);
        return k * C * FY * FX + cb0 * FY * FX + (fy * FX + fx) * bw + (c - cb0);
      }
      throw ConfigError("unknown custom weight layout '" + layout.custom + "'");
    default: return ((k * C + c) * FY + fy) * FX + fx;
  }
}

std::vector<int64_t> to_canonical(const TensorSpec& s, std::span<const int64_t> phys) {
  if (s.shape.size() != 4 || s.layout.kind == Layout::Kind::NCHW || s.layout.kind == Layout::Kind::OIHW ||
      s.layout.kind == Layout::Kind::None)
    return {phys.begin(), phys.end()};
  auto cs = canonical_shape(s);
  std::vector<int64_t> out(phys.size());
  int64_t i = 0;
  if (s.layout.is_activation()) {
    for (int64_t n = 0; n < cs[0]; ++n)
      for (int64_t c = 0; c < cs[1]; ++c)
        for (int64_t h = 0; h < cs[2]; ++h)
          for (int64_t w = 0; w < cs[3]; ++w) out[i++] = phys[activation_offset(true, cs, n, c, h, w)];
    return out;
  }
  check_filter_layout(s.layout, cs[0], cs[1], cs[2], cs[3]);
  for (int64_t k = 0; k < cs[0]; ++k)
    for (int64_t c = 0; c < cs[1]; ++c)
      for (int64_t fy = 0; fy < cs[2]; ++fy)
        for (int64_t fx = 0; fx < cs[3]; ++fx)
          out[i++] = phys[filter_offset(s.layout, cs[0], cs[1], cs[2], cs[3], k, c, fy, fx)];
  return out;
}

std::vector<int64_t> from_canonical(const TensorSpec& s, std::span<const int64_t> canon) {
  if (s.shape.size() != 4 || s.layout.kind == Layout::Kind::NCHW || s.layout.kind == Layout::Kind::OIHW ||
      s.layout.kind == Layout::Kind::None)
    return {canon.begin(), canon.end()};
  auto cs = canonical_shape(s);
  std::vector<int64_t> out(canon.size());
  int64_t i = 0;
  if (s.layout.is_activation()) {
    for (int64_t n = 0; n < cs[0]; ++n)
      for (int64_t c = 0; c < cs[1]; ++c)
        for (int64_t h = 0; h < cs[2]; ++h)
          for (int64_t w = 0; w < cs[3]; ++w) out[activation_offset(true, cs, n, c, h, w)] = canon[i++];
    return out;
  }
  check_filter_layout(s.layout, cs[0], cs[1], cs[2], cs[3]);
  for (int64_t k = 0; k < cs[0]; ++k)
    for (int64_t c = 0; c < cs[1]; ++c)
      for (int64_t fy = 0; fy < cs[2]; ++fy)
        for (int64_t fx = 0; fx < cs[3]; ++fx)
          out[filter_offset(s.layout, cs[0], cs[1], cs[2], cs[3], k, c, fy, fx)] = canon[i++];
  return out;
}

}  // namespace hetcc
