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

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hetcc {

/// Base of every error the compiler reports to a caller.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON syntax or schema).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Dangling references, cycles, broken topological order.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Target description problems: unknown names, missing API bindings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Broken internal contract; indicates a compiler bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

#define HETCC_CHECK(cond, msg)                                          \
  do {                                                                  \
    if (!(cond)) throw ::hetcc::InternalError(std::string("check failed: ") + (msg)); \
  } while (0)

/// Loop dimensions of the workload model, in canonical order.
enum class Dim : int { K = 0, C, OY, OX, FY, FX };
inline constexpr int kNumDims = 6;
inline constexpr std::array<Dim, kNumDims> kAllDims = {Dim::K, Dim::C, Dim::OY, Dim::OX, Dim::FY, Dim::FX};

std::string_view dim_name(Dim d);
std::optional<Dim> parse_dim(std::string_view s);

/// Tensors a layer moves through the memory hierarchy.
enum class Operand : int { I = 0, W, O };
inline constexpr int kNumOperands = 3;
inline constexpr std::array<Operand, kNumOperands> kAllOperands = {Operand::I, Operand::W, Operand::O};

char operand_char(Operand op);
std::optional<Operand> parse_operand(char c);

inline int idx(Dim d) { return static_cast<int>(d); }
inline int idx(Operand o) { return static_cast<int>(o); }

/// Per-dimension integer table.
using DimArray = std::array<int64_t, kNumDims>;

inline DimArray ones() { return {1, 1, 1, 1, 1, 1}; }

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace hetcc
