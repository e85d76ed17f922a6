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

#include <map>
#include <string>
#include <vector>

#include "hetcc/graph.hpp"
#include "hetcc/target.hpp"

namespace hetcc {

struct MatchCandidate {
  std::string pattern;  // PatternSpec::name
  std::string module;
  std::vector<std::string> node_ids;  // anchor first, then the fused tail
  std::string anchor;

  friend bool operator==(const MatchCandidate&, const MatchCandidate&) = default;
};

/// Values the constraint variables take on a candidate's anchor.
std::map<std::string, std::string> anchor_facts(const Graph& g, const Node& anchor);

/// Kernel kind of an anchor node, if it has a workload model.
std::optional<KernelKind> anchor_kind(const Graph& g, const Node& anchor);

bool eval_constraint(const Constraint& c, const std::map<std::string, std::string>& facts);

/// True iff the pattern's constraints hold on the candidate.
bool check_constraints(const MatchCandidate& c, const Graph& g, const TargetModel& t);

/// Occurrences of every module pattern, constraints checked, with
/// candidates whose node set is a strict subset of another candidate's set
/// removed.
std::vector<MatchCandidate> match_candidates(const Graph& g, const TargetModel& t);

/// Matches of one pattern anchored at `anchor` (every expansion of the
/// optional steps that occurs in the graph), unchecked.
std::vector<std::vector<std::string>> match_at(const Graph& g, const PatternSpec& p, const Node& anchor);

}  // namespace hetcc
