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

// C text emitted verbatim next to generated layers.
namespace hetcc::csrc {

extern const char* const kRuntimeHeader;  // hetcc_runtime.h
extern const char* const kApiPrelude;     // head of match_api.h
extern const char* const kBackendHeader;  // match_test_backend.h
extern const char* const kBackendSource;  // match_test_backend.c, generic part

}  // namespace hetcc::csrc
