#ifndef OBJCAP_CLI_HPP
#define OBJCAP_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "objcap/checkpoint.hpp"
#include "objcap/runspec.hpp"
#include "objcap/train.hpp"

namespace objcap {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitUsage = 2 };

struct TrainingRun {
  Checkpoint checkpoint;
  RunHistory history;
  DatasetSplit split;
};

/// Load, split, build vocabulary and model, train, and write checkpoint.json,
/// history.csv and test.jsonl into spec.output_dir.
TrainingRun run_training(const RunSpec& spec, std::ostream& log);

/// Evaluation report as a JSON document.
std::string report_to_json(const EvaluationResult& result, const Checkpoint& ckpt);

/// Entry point shared by the executable and the tests. args[0] is the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace objcap

#endif  // OBJCAP_CLI_HPP
