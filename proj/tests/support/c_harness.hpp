#pragma once

#include <filesystem>
#include <string>

#include "hetcc/graph_io.hpp"
#include "hetcc/pipeline.hpp"

namespace hetcc::testing {

struct GeneratedRun {
  bool built = false, ran = false;
  bool outputs_match = false;
  bool counters_match = false;
  std::string detail;  // first mismatch or tool output
  json report;
};

/// Compiles g with the test backend into `dir`, builds it with the host C
/// compiler, runs it on `inputs` and checks outputs against the interpreter
/// and copy counters against the report's predicted transfers.
GeneratedRun run_generated(const Graph& g, const TargetModel& t, const TensorMap& inputs,
                           const std::filesystem::path& dir, const CompileOptions& opt = {});

/// Every file of the program, concatenated with path headers.
std::string program_digest(const EmittedProgram& p);

}  // namespace hetcc::testing
