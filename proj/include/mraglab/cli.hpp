#pragma once

#include <map>
#include <string>
#include <vector>

#include "mraglab/config.hpp"
#include "mraglab/dkmrag.hpp"
#include "mraglab/synthetic.hpp"

namespace mraglab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
/// Outputs were written but some queries were excluded.
inline constexpr int kExitPartial = 2;

/// Runs one command line (without the program name). Fatal errors are
/// reported on stderr as a single line starting with "mraglab: error[<kind>]:".
int run_command(std::vector<std::string> args);

/// The six strategies of the golden trace set.
std::vector<dkmrag::Strategy> golden_strategies();

/// "traces_<strategy>.jsonl" with ':' mapped to '-'.
std::string trace_file_name(const dkmrag::Strategy& strategy);

/// Index, traces for every golden strategy, MLRS, genpref and recall reports
/// over a synthetic data set with in-process mock backends. File name ->
/// contents.
std::map<std::string, std::string> mock_pipeline(const synthetic::Dataset& data,
                                                 const config::ExperimentConfig& config);

}  // namespace mraglab::cli
