#ifndef KBRIDGE_CLI_COMMANDS_HPP_
#define KBRIDGE_CLI_COMMANDS_HPP_

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>

#include "kbridge/cli/config.hpp"

namespace kbridge::cli {

// Exit-code contract shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,           // config, input data, budget
  kExitInfeasible = 2,      // target killed mass where the prior cannot kill
  kExitNonConvergence = 3,  // iteration limit, numerical failure, failed check
};

struct CommandContext {
  RunConfig config;
  std::filesystem::path out_dir;
  std::ostream& out;
  std::ostream& err;
};

// solve: P, u, drift_correction, alpha, Qhat, phi, phihat, Lambda, trace
// CSVs plus manifest.json.
int cmd_solve(const CommandContext& ctx);

// check-kernel: conservation defect and prior survivor mass per time node;
// non-zero exit when the defect reaches [check] defect_bound.
int cmd_check_kernel(const CommandContext& ctx);

// oracle-compare: fs_discrete against ipf_solve on a random chain or on the
// chain matched to the configured grid.
int cmd_oracle_compare(const CommandContext& ctx);

// simulate: particle run; posterior dynamics read drift_correction.csv and
// alpha.csv written by solve.
int cmd_simulate(const CommandContext& ctx);

// Runs body and maps library exceptions onto the exit-code contract,
// reporting them on ctx.err.
int run_guarded(const CommandContext& ctx,
                const std::function<int(const CommandContext&)>& body);

}  // namespace kbridge::cli

#endif  // KBRIDGE_CLI_COMMANDS_HPP_
