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

#include "hetcc/pipeline.hpp"

#include <algorithm>

#include "hetcc/passes.hpp"
#include "hetcc/validate.hpp"

namespace hetcc {

Graph prepare_graph(const Graph& g, const TargetModel& t, bool strict_requant) {
  Graph out = fold_constants_and_dce(g);
  out = rewrite_requant(out, strict_requant);
  out = fold_constants_and_dce(out);
  return transform_layout(out, t.activation_layout);
}

PartitionedGraph estimate_graph(const Graph& g, const TargetModel& t, const CompileOptions& opt) {
  return dispatch(prepare_graph(g, t, opt.strict_requant), t, opt.limits);
}

CompileResult compile_graph(const Graph& g, const TargetModel& t, const CompileOptions& opt) {
  CompileResult r;
  CompileOptions o = opt;
  auto specs = infer_specs(g);
  for (auto& in : g.inputs) o.emit.host_specs[in.name] = in;
  for (auto& out : g.outputs) o.emit.host_specs[out] = specs.at(out);
  r.dispatched = estimate_graph(g, t, opt);
  r.materialized = materialize(r.dispatched, t);
  r.plan = plan_static_memory(r.materialized);
  r.program = emit_network(r.materialized, r.plan, t, o.emit);
  r.accelerated = std::any_of(r.materialized.decisions.begin(), r.materialized.decisions.end(),
                              [](const DispatchDecision& d) { return d.assigned; });
  return r;
}

}  // namespace hetcc
